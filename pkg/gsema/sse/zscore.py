"""Zscore scoring: standardized genes summed over the set, scaled by the root of the set size."""
from __future__ import annotations

import numpy as np

from ..config import SseConfig
from ..const import SSE_ZSCORE
from ..ingest import ExpressionMatrix, GeneSetCollection
from .common import PathwayScoreMatrix, drop_constant_genes, finish, resolve_sets


def score_zscore(matrix: ExpressionMatrix, sets: GeneSetCollection, cfg: SseConfig) -> PathwayScoreMatrix:
    gene_ids, values, n_dropped = drop_constant_genes(matrix)
    resolved = resolve_sets(gene_ids, sets, cfg)

    z = (values - values.mean(axis=1, keepdims=True)) / values.std(axis=1, ddof=1, keepdims=True)
    scores = np.empty((len(resolved.names), matrix.n_samples))
    for row, idx in enumerate(resolved.indices):
        scores[row] = z[idx].sum(axis=0) / np.sqrt(len(idx))
    return finish(matrix, SSE_ZSCORE, resolved, scores, n_dropped)
