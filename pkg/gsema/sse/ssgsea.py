"""ssGSEA scoring.

Per sample the genes are ordered by decreasing absolute expression. The
running sum walks that list: in-set genes step up by their rank raised to
the weight exponent (normalized over the set), out-set genes step down by
``1/(G - s)``. The score is the sum of the running difference over all list
positions, which collapses to the closed form used below.
"""
from __future__ import annotations

import numpy as np

from ..config import SseConfig
from ..const import SSE_SSGSEA
from ..ingest import ExpressionMatrix, GeneSetCollection
from .common import PathwayScoreMatrix, finish, resolve_sets


def ssgsea_ranks(values: np.ndarray) -> np.ndarray:
    """Rank of ``|x|`` per column, G for the largest; tied genes keep the lower index nearer the top."""
    n_genes = values.shape[0]
    order = np.argsort(-np.abs(values), axis=0, kind="stable")
    ranks = np.empty(values.shape, dtype=np.float64)
    np.put_along_axis(ranks, order, np.arange(n_genes, 0, -1, dtype=np.float64)[:, None], axis=0)
    return ranks


def score_ssgsea(matrix: ExpressionMatrix, sets: GeneSetCollection, cfg: SseConfig) -> PathwayScoreMatrix:
    resolved = resolve_sets(matrix.gene_ids, sets, cfg)
    ranks = ssgsea_ranks(matrix.values)
    n_genes = matrix.n_genes
    alpha = cfg.ssgsea_weight_exponent
    # sum of all ranks is exact in float64 for any realistic G
    total = n_genes * (n_genes + 1) / 2.0

    scores = np.empty((len(resolved.names), matrix.n_samples))
    for row, idx in enumerate(resolved.indices):
        r_in = ranks[idx]
        weights = r_in**alpha
        in_part = (weights * r_in).sum(axis=0) / weights.sum(axis=0)
        out_part = (total - r_in.sum(axis=0)) / (n_genes - len(idx))
        scores[row] = in_part - out_part

    if cfg.ssgsea_normalize and scores.size:
        spread = scores.max() - scores.min()
        if spread > 0:
            scores = scores / spread
    return finish(matrix, SSE_SSGSEA, resolved, scores)
