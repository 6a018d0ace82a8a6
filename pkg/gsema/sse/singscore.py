"""singscore: mean rank of the set genes, rescaled by its theoretical extremes."""
from __future__ import annotations

import numpy as np

from ..config import SseConfig
from ..const import SSE_SINGSCORE
from ..ingest import ExpressionMatrix, GeneSetCollection
from .common import PathwayScoreMatrix, ResolvedSets, ascending_ranks, finish, resolve_sets


def _undirected_bounds(n_genes: int, size: int) -> tuple[float, float]:
    centred = np.sort(np.abs(np.arange(1, n_genes + 1, dtype=np.float64) - (n_genes + 1) / 2.0))
    return float(centred[:size].mean()), float(centred[-size:].mean())


def score_singscore(matrix: ExpressionMatrix, sets: GeneSetCollection, cfg: SseConfig) -> PathwayScoreMatrix:
    resolved = resolve_sets(matrix.gene_ids, sets, cfg)
    n_genes = matrix.n_genes
    ranks = ascending_ranks(matrix.values)
    if not cfg.singscore_directed:
        ranks = np.abs(ranks - (n_genes + 1) / 2.0)

    names, indices, rows = [], [], []
    dropped = dict(resolved.dropped)
    for name, idx in zip(resolved.names, resolved.indices):
        s = len(idx)
        if cfg.singscore_directed:
            low, high = (s + 1) / 2.0, (2 * n_genes - s + 1) / 2.0
        else:
            low, high = _undirected_bounds(n_genes, s)
        if high <= low:
            dropped[name] = "rank bounds coincide"
            continue
        names.append(name)
        indices.append(idx)
        rows.append((ranks[idx].mean(axis=0) - low) / (high - low) - 0.5)

    kept = ResolvedSets(
        names=names,
        indices=indices,
        sizes={n: resolved.sizes[n] for n in names},
        dropped=dropped,
    )
    scores = np.vstack(rows) if rows else np.empty((0, matrix.n_samples))
    return finish(matrix, SSE_SINGSCORE, kept, scores)
