from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

from ..config import SseConfig
from ..const import SSE_GSVA, SSE_SINGSCORE, SSE_SSGSEA, SSE_ZSCORE
from ..errors import ConfigError, GsemaError
from ..ingest import ExpressionMatrix, GeneSetCollection, Study
from .common import PathwayScoreMatrix, load_score_manifest, parse_scores_tsv, write_scores_tsv
from .gsva import score_gsva
from .singscore import score_singscore
from .ssgsea import score_ssgsea
from .zscore import score_zscore

logger = logging.getLogger(__name__)

Scorer = Callable[[ExpressionMatrix, GeneSetCollection, SseConfig], PathwayScoreMatrix]

SCORERS: dict[str, Scorer] = {
    SSE_ZSCORE: score_zscore,
    SSE_SSGSEA: score_ssgsea,
    SSE_GSVA: score_gsva,
    SSE_SINGSCORE: score_singscore,
}


def score_study(study: Study | ExpressionMatrix, sets: GeneSetCollection, cfg: SseConfig) -> PathwayScoreMatrix:
    matrix = study.matrix if isinstance(study, Study) else study
    try:
        scorer = SCORERS[cfg.method]
    except KeyError as e:
        raise ConfigError(f"unknown sse method {cfg.method!r}") from e
    try:
        scores = scorer(matrix, sets, cfg)
    except GsemaError as e:
        raise e.for_study(matrix.study_id) if matrix.study_id else e
    logger.info(
        "%s: scored %d pathways with %s (%d dropped)",
        matrix.study_id or "study",
        scores.n_pathways,
        cfg.method,
        len(scores.dropped_pathways),
    )
    return scores


def score_studies(
    studies: Sequence[Study], sets: GeneSetCollection, cfg: SseConfig, threads: int = 1
) -> list[PathwayScoreMatrix]:
    """Score every study; the result keeps the input order whatever the thread count."""
    if threads <= 1 or len(studies) <= 1:
        return [score_study(s, sets, cfg) for s in studies]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: score_study(s, sets, cfg), studies))


__all__ = [
    "PathwayScoreMatrix",
    "SCORERS",
    "load_score_manifest",
    "parse_scores_tsv",
    "score_gsva",
    "score_singscore",
    "score_ssgsea",
    "score_study",
    "score_studies",
    "score_zscore",
    "write_scores_tsv",
]
