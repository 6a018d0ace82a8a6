from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .config import MetaConfig
from .const import MODEL_FEM
from .effects import StudyEffect, hedges_variance_corrected
from .errors import DataError, DomainError, NoPathways
from .pathmat import AlignedPathwayPanel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetaResult:
    pathway: str
    k_studies: int
    ces: float
    var_ces: float
    tau2: float
    q: float
    i2: float
    z: float
    p: float
    fdr: float
    significant: bool
    study_ids: tuple[str, ...]
    per_study_g: tuple[float, ...]
    weights: tuple[float, ...]
    effects: tuple[StudyEffect, ...] = ()


def _check_variances(v: np.ndarray) -> None:
    if v.size == 0:
        raise DomainError("no effects to combine")
    if np.any(~(v > 0)):
        raise DomainError("effect variances must be positive")


def fem_combine(g: Sequence[float], v: Sequence[float]) -> tuple[float, float]:
    g, v = np.asarray(g, dtype=np.float64), np.asarray(v, dtype=np.float64)
    _check_variances(v)
    w = 1.0 / v
    return float((w * g).sum() / w.sum()), float(1.0 / w.sum())


def dl_tau2(g: Sequence[float], v: Sequence[float], fem_ces: float) -> tuple[float, float, float]:
    """DerSimonian-Laird moment estimate; returns (tau2, Q, C)."""
    g, v = np.asarray(g, dtype=np.float64), np.asarray(v, dtype=np.float64)
    _check_variances(v)
    if g.size == 1:
        return 0.0, 0.0, 0.0
    w = 1.0 / v
    q = float((w * (g - fem_ces) ** 2).sum())
    df = g.size - 1
    c = float(w.sum() - (w**2).sum() / w.sum())
    if c <= 0:
        if q > df:
            raise DomainError(f"heterogeneity scale C={c!r} is not positive")
        return 0.0, q, c
    return max(0.0, (q - df) / c), q, c


def _z_and_p(ces: float, var: float) -> tuple[float, float]:
    z = ces / np.sqrt(var)
    return float(z), float(min(1.0, 2.0 * norm.sf(abs(z))))


def rem_combine(g: Sequence[float], v: Sequence[float], tau2: float) -> tuple[float, float, float, float]:
    if tau2 < 0:
        raise DomainError(f"tau2 must be nonnegative, got {tau2!r}")
    ces, var = fem_combine(g, np.asarray(v, dtype=np.float64) + tau2)
    return (ces, var, *_z_and_p(ces, var))


def bh_adjust(pvalues: Sequence[float]) -> np.ndarray:
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if np.any(~((p >= 0) & (p <= 1))):
        raise DomainError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    # m / rank >= 1 in floating point, so scaled >= p
    scaled = (m / np.arange(1, m + 1)) * p[order]
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(stepped, 1.0)
    return adjusted


def _index_effects(
    effects: Mapping[str, Sequence[StudyEffect]] | Sequence[Sequence[StudyEffect]],
) -> dict[tuple[str, str], StudyEffect]:
    groups = effects.values() if isinstance(effects, Mapping) else effects
    return {(e.study_id, e.pathway): e for group in groups for e in group}


def run_meta(
    panel: AlignedPathwayPanel,
    effects: Mapping[str, Sequence[StudyEffect]] | Sequence[Sequence[StudyEffect]],
    cfg: MetaConfig | None = None,
) -> list[MetaResult]:
    cfg = cfg or MetaConfig()
    if not panel.pathway_names:
        raise NoPathways("empty pathway panel")
    lookup = _index_effects(effects)
    study_ids = panel.study_ids

    rows = []
    for name in panel.pathway_names:
        members = sorted(study_ids[i] for i in panel.members(name))
        try:
            member_effects = [lookup[(sid, name)] for sid in members]
        except KeyError as e:
            raise DataError("missing study effect", study_id=e.args[0][0], pathway=name) from e

        g = np.array([e.g for e in member_effects])
        g_bar = float(g.mean())
        v = np.array([hedges_variance_corrected(g_bar, e.n_e, e.n_c) for e in member_effects])
        try:
            fem_ces, fem_var = fem_combine(g, v)
            tau2, q, _ = dl_tau2(g, v, fem_ces)
            if cfg.model == MODEL_FEM:
                ces, var = fem_ces, fem_var
                z, p = _z_and_p(ces, var)
                weights = 1.0 / v
                tau2 = 0.0
            else:
                ces, var, z, p = rem_combine(g, v, tau2)
                weights = 1.0 / (v + tau2)
        except DomainError as e:
            e.pathway = e.pathway or name
            raise
        df = len(members) - 1
        rows.append(
            dict(
                pathway=name,
                k_studies=len(members),
                ces=ces,
                var_ces=var,
                tau2=tau2,
                q=q,
                i2=max(0.0, (q - df) / q) if q > 0 else 0.0,
                z=z,
                p=p,
                study_ids=tuple(members),
                per_study_g=tuple(float(x) for x in g),
                weights=tuple(float(x) for x in weights),
                effects=tuple(replace(e, var_corrected=float(vc)) for e, vc in zip(member_effects, v)),
            )
        )

    fdr = bh_adjust([r["p"] for r in rows])
    results = [MetaResult(fdr=float(f), significant=bool(f < cfg.alpha), **r) for r, f in zip(rows, fdr)]
    results.sort(key=lambda r: (-abs(r.ces), r.pathway))
    logger.info(
        "meta-analysed %d pathways, %d with fdr < %g",
        len(results),
        sum(r.significant for r in results),
        cfg.alpha,
    )
    return results
