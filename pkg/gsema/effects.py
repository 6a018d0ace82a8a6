"""Per-study effect sizes.

A two-group linear fit per pathway gives the difference in means and the
pooled residual variance. Residual variances are shrunk towards a common
prior whose hyperparameters come from a method-of-moments fit of a scaled F
distribution to the log variances. The moderated t is turned into Cohen's d,
then Hedges' g with its raw variance. The bias-corrected variance needs the
mean g across studies and is filled in by the meta stage.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import digamma, polygamma

from .config import EffectsConfig
from .const import PRIOR_DF_CAP, TRIGAMMA_MAX_ITER, TRIGAMMA_TOL
from .errors import DegenerateDesign, DegenerateVariance, DomainError
from .ingest import ClassLabels
from .sse.common import PathwayScoreMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GroupSummary:
    n_e: int
    n_c: int
    mean_e: np.ndarray
    mean_c: np.ndarray
    var_e: np.ndarray
    var_c: np.ndarray

    @property
    def residual_df(self) -> int:
        return self.n_e + self.n_c - 2

    @property
    def mean_diff(self) -> np.ndarray:
        return self.mean_e - self.mean_c

    @property
    def pooled_var(self) -> np.ndarray:
        return ((self.n_e - 1) * self.var_e + (self.n_c - 1) * self.var_c) / self.residual_df


def summarize_groups(scores: PathwayScoreMatrix, labels: ClassLabels) -> GroupSummary:
    is_case = labels.mask_for(scores.sample_ids)
    n_e, n_c = int(is_case.sum()), int((~is_case).sum())
    if n_e < 2 or n_c < 2:
        raise DegenerateDesign(f"need at least 2 samples per group, got {n_e} and {n_c}", study_id=scores.study_id or None)
    case, control = scores.scores[:, is_case], scores.scores[:, ~is_case]
    return GroupSummary(
        n_e=n_e,
        n_c=n_c,
        mean_e=case.mean(axis=1),
        mean_c=control.mean(axis=1),
        var_e=case.var(axis=1, ddof=1),
        var_c=control.var(axis=1, ddof=1),
    )


@dataclass(frozen=True, eq=False)
class ModeratedFit:
    pathway_names: tuple[str, ...]
    t: np.ndarray
    df_total: float
    prior_df: float
    prior_var: float
    residual_var: np.ndarray
    residual_df: int
    posterior_var: np.ndarray
    p_value: np.ndarray
    infinite_prior_df: bool = False


def trigamma_inverse(x: float, tol: float = TRIGAMMA_TOL, max_iter: int = TRIGAMMA_MAX_ITER) -> float:
    """Solve trigamma(y) = x for y > 0.

    Newton steps on ``1/trigamma(y)``, which is convex and nearly linear, so
    the iterate decreases monotonically from ``0.5 + 1/x``.
    """
    if not x > 0:
        raise DomainError(f"trigamma inverse needs a positive argument, got {x!r}")
    if x > 1e7:
        return 1.0 / math.sqrt(x)
    if x < 1e-6:
        return 1.0 / x
    y = 0.5 + 1.0 / x
    for _ in range(max_iter):
        tri = float(polygamma(1, y))
        step = tri * (1.0 - tri / x) / float(polygamma(2, y))
        y += step
        if -step / y < tol:
            return y
    logger.warning("trigamma inverse did not converge in %d iterations", max_iter)
    return y


def fit_f_dist(residual_var: np.ndarray, df: int) -> tuple[float, float]:
    """Prior (d0, s0^2) from log residual variances; d0 is ``inf`` when no extra spread is seen."""
    s2 = np.asarray(residual_var, dtype=np.float64)
    median = float(np.median(s2))
    if median == 0:
        logger.warning("more than half of the residual variances are zero")
        median = 1.0
    s2 = np.maximum(s2, 1e-5 * median)

    half = df / 2.0
    e = np.log(s2) - digamma(half) + math.log(half)
    emean = float(e.mean())
    evar = float(e.var(ddof=1)) - float(polygamma(1, half))
    if evar > 0:
        d0 = 2.0 * trigamma_inverse(evar)
        s0 = math.exp(emean + float(digamma(d0 / 2.0)) - math.log(d0 / 2.0))
        return d0, s0
    # no spread beyond sampling noise: the pooled variance is the scale MLE
    return math.inf, float(s2.mean())


def squeeze_var(residual_var: np.ndarray, df: int, prior_df: float, prior_var: float) -> np.ndarray:
    if math.isinf(prior_df):
        return np.full_like(np.asarray(residual_var, dtype=np.float64), prior_var)
    return (prior_df * prior_var + df * np.asarray(residual_var)) / (prior_df + df)


def fit_moderated_t(scores: PathwayScoreMatrix, labels: ClassLabels, ordinary_t: bool = False) -> ModeratedFit:
    groups = summarize_groups(scores, labels)
    df = groups.residual_df
    s2 = groups.pooled_var
    where = scores.study_id or "study"

    infinite = False
    if ordinary_t:
        d0, s0 = 0.0, float(np.mean(s2)) if np.mean(s2) > 0 else 1.0
    elif scores.n_pathways < 2:
        logger.warning("%s: fewer than 2 pathways, no variance shrinkage", where)
        d0, s0 = 0.0, float(np.mean(s2)) if np.mean(s2) > 0 else 1.0
    else:
        d0, s0 = fit_f_dist(s2, df)
        if math.isinf(d0) or d0 > PRIOR_DF_CAP:
            logger.debug("%s: prior df is infinite, capped at %g", where, PRIOR_DF_CAP)
            infinite = True

    if d0 == 0:
        flat = np.flatnonzero(s2 <= 0)
        if flat.size:
            raise DegenerateVariance(
                "zero residual variance without a variance prior",
                study_id=scores.study_id or None,
                pathway=scores.pathway_names[flat[0]],
            )

    post = squeeze_var(s2, df, d0, s0)
    t = groups.mean_diff / np.sqrt(post * (1.0 / groups.n_e + 1.0 / groups.n_c))
    prior_df = PRIOR_DF_CAP if infinite else d0
    # never more than the residual df pooled over all pathways
    df_total = min(prior_df + df, float(df * scores.n_pathways))
    return ModeratedFit(
        pathway_names=scores.pathway_names,
        t=t,
        df_total=df_total,
        prior_df=prior_df,
        prior_var=s0,
        residual_var=s2,
        residual_df=df,
        posterior_var=post,
        p_value=2.0 * stats.t.sf(np.abs(t), df_total),
        infinite_prior_df=infinite,
    )


def t_to_cohens_d(t, n_e: int, n_c: int, df):
    """d = (n_e + n_c) t / (sqrt(n_e n_c) sqrt(df))."""
    if np.any(np.asarray(df) <= 0):
        raise DomainError(f"degrees of freedom must be positive, got {df!r}")
    return (n_e + n_c) * t / (math.sqrt(n_e * n_c) * np.sqrt(df))


def cohens_to_hedges(d, n_e: int, n_c: int):
    denom = 4 * (n_e + n_c - 2) - 1
    if denom <= 0:
        raise DomainError(f"small-sample correction undefined for n_e={n_e}, n_c={n_c}")
    j = 1.0 - 3.0 / denom
    return j * d, j


def hedges_variance_raw(d, j: float, n_e: int, n_c: int):
    n = n_e + n_c
    return j**2 * (n / (n_e * n_c) + np.square(d) / (2.0 * n))


def hedges_variance_corrected(g_bar, n_e: int, n_c: int):
    return 1.0 / n_e + 1.0 / n_c + np.square(g_bar) / (2.0 * (n_e + n_c))


@dataclass(frozen=True)
class StudyEffect:
    pathway: str
    study_id: str
    t: float
    df: float
    d: float
    g: float
    j_factor: float
    var_raw: float
    n_e: int
    n_c: int
    p_value: float = math.nan
    var_corrected: float | None = None


def compute_study_effects(
    scores: PathwayScoreMatrix, labels: ClassLabels, cfg: EffectsConfig | None = None
) -> tuple[ModeratedFit, list[StudyEffect]]:
    cfg = cfg or EffectsConfig()
    fit = fit_moderated_t(scores, labels, ordinary_t=cfg.ordinary_t)
    is_case = labels.mask_for(scores.sample_ids)
    n_e, n_c = int(is_case.sum()), int((~is_case).sum())

    df = float(fit.residual_df) if cfg.design_df else fit.df_total
    d = t_to_cohens_d(fit.t, n_e, n_c, df)
    g, j = cohens_to_hedges(d, n_e, n_c)
    var_raw = hedges_variance_raw(d, j, n_e, n_c)

    effects = [
        StudyEffect(
            pathway=name,
            study_id=scores.study_id,
            t=float(fit.t[i]),
            df=df,
            d=float(d[i]),
            g=float(g[i]),
            j_factor=j,
            var_raw=float(var_raw[i]),
            n_e=n_e,
            n_c=n_c,
            p_value=float(fit.p_value[i]),
        )
        for i, name in enumerate(scores.pathway_names)
    ]
    logger.info(
        "%s: effects for %d pathways (prior df %.4g)",
        scores.study_id or "study",
        len(effects),
        fit.prior_df,
    )
    return fit, effects
