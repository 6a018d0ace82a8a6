from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .config import FilterConfig
from .const import SSE_ZSCORE, STANDARDIZE_MATRIX
from .errors import NoPathways
from .ingest import ClassLabels
from .sse.common import PathwayScoreMatrix

logger = logging.getLogger(__name__)


def standardize_scores(scores: PathwayScoreMatrix, cfg: FilterConfig | None = None) -> PathwayScoreMatrix:
    """Bring every pathway row to mean 0 and sample SD 1 within the study.

    Zero-SD rows are dropped. Zscore matrices pass through untouched when
    ``skip_standardization_for_zscore`` is set.
    """
    cfg = cfg or FilterConfig()
    if not cfg.standardize:
        return scores
    if scores.method == SSE_ZSCORE and cfg.skip_standardization_for_zscore:
        logger.debug("%s: zscore matrix left as is", scores.study_id or "study")
        return scores

    values = scores.scores
    if cfg.standardize_mode == STANDARDIZE_MATRIX:
        sd = values.std(ddof=1) if values.size > 1 else 0.0
        if not sd > 0:
            raise NoPathways("score matrix has zero variance", study_id=scores.study_id or None)
        return scores.with_scores((values - values.mean()) / sd)

    sd = values.std(axis=1, ddof=1)
    keep = sd > 0
    if not keep.all():
        logger.warning("%s: dropped %d zero-variance pathways", scores.study_id or "study", int((~keep).sum()))
        if not keep.any():
            raise NoPathways("every pathway row has zero variance", study_id=scores.study_id or None)
        scores = scores.subset(keep, reason="zero-variance scores")
        values = scores.scores
        sd = sd[keep]
    z = (values - values.mean(axis=1, keepdims=True)) / sd[:, None]
    return scores.with_scores(z)


def group_medians(scores: PathwayScoreMatrix, labels: ClassLabels) -> tuple[np.ndarray, np.ndarray]:
    """(control, case) medians per pathway; even groups average the central pair."""
    is_case = labels.mask_for(scores.sample_ids)
    values = scores.scores
    return np.median(values[:, ~is_case], axis=1), np.median(values[:, is_case], axis=1)


def _activity_mask(control: np.ndarray, case: np.ndarray, threshold: float) -> np.ndarray:
    return (np.abs(control) >= threshold) | (np.abs(case) >= threshold)


def filter_low_activity(
    scores: PathwayScoreMatrix, labels: ClassLabels, cfg: FilterConfig | None = None
) -> PathwayScoreMatrix:
    cfg = cfg or FilterConfig()
    control, case = group_medians(scores, labels)
    keep = _activity_mask(control, case, cfg.activity_threshold)
    if not keep.any():
        raise NoPathways(
            f"no pathway reaches median activity {cfg.activity_threshold:g}",
            study_id=scores.study_id or None,
        )
    logger.info(
        "%s: %d of %d pathways pass the activity filter",
        scores.study_id or "study",
        int(keep.sum()),
        keep.size,
    )
    return scores.subset(keep, reason=f"median activity below {cfg.activity_threshold:g}")


def filter_report(scores: PathwayScoreMatrix, labels: ClassLabels, cfg: FilterConfig | None = None) -> pd.DataFrame:
    cfg = cfg or FilterConfig()
    control, case = group_medians(scores, labels)
    return pd.DataFrame(
        {
            "pathway": list(scores.pathway_names),
            "study": scores.study_id,
            "control_median": control,
            "case_median": case,
            "kept": _activity_mask(control, case, cfg.activity_threshold),
        }
    )


@dataclass(frozen=True, eq=False)
class AlignedPathwayPanel:
    pathway_names: tuple[str, ...]
    studies: tuple[PathwayScoreMatrix, ...]
    presence: np.ndarray
    min_studies: int

    @property
    def k(self) -> int:
        return len(self.studies)

    @property
    def study_ids(self) -> list[str]:
        return [s.study_id for s in self.studies]

    def members(self, pathway: str) -> list[int]:
        row = self.pathway_names.index(pathway)
        return [int(i) for i in np.flatnonzero(self.presence[row])]

    def k_studies(self) -> np.ndarray:
        return self.presence.sum(axis=1)


def align_panel(matrices: Sequence[PathwayScoreMatrix], cfg: FilterConfig | None = None) -> AlignedPathwayPanel:
    cfg = cfg or FilterConfig()
    if not matrices:
        raise NoPathways("no studies to align")
    required = cfg.required_studies(len(matrices))

    counts: dict[str, int] = {}
    for m in matrices:
        for name in m.pathway_names:
            counts[name] = counts.get(name, 0) + 1
    names = tuple(sorted(n for n, c in counts.items() if c >= required))
    if not names:
        raise NoPathways(f"no pathway survives in {required} of {len(matrices)} studies")

    presence = np.zeros((len(names), len(matrices)), dtype=bool)
    for col, m in enumerate(matrices):
        present = set(m.pathway_names)
        presence[:, col] = [n in present for n in names]
    presence.setflags(write=False)
    logger.info("panel holds %d pathways (min_studies=%d)", len(names), required)
    return AlignedPathwayPanel(names, tuple(matrices), presence, required)
