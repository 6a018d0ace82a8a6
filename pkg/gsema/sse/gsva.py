"""GSVA scoring.

1. every gene's values are mapped through a kernel estimate of that gene's CDF
   (Gaussian with bandwidth ``factor * sd`` or Poisson with rate ``x + offset``)
2. per sample the genes are ordered by decreasing CDF value and weighted by
   the distance of their position from the middle of the list
3. a Kolmogorov-Smirnov style running sum is walked for every set; the score is
   either the sum of the largest positive and negative deviations (max-diff)
   or the deviation with the larger magnitude
"""
from __future__ import annotations

import logging

import numpy as np
from scipy.special import ndtr
from scipy.stats import poisson

from ..config import SseConfig
from ..const import KERNEL_POISSON, SSE_GSVA
from ..errors import InvalidKernel
from ..ingest import ExpressionMatrix, GeneSetCollection
from .common import PathwayScoreMatrix, descending_order, drop_constant_genes, finish, resolve_sets

logger = logging.getLogger(__name__)

# genes per block when building the G x N x N kernel tensor
_BLOCK_CELLS = 1 << 22


def gaussian_kernel_cdf(sample: np.ndarray, x: np.ndarray | float, bandwidth: float) -> np.ndarray:
    """F(x) = mean_k Phi((x - sample_k) / bandwidth)."""
    x = np.asarray(x, dtype=np.float64)
    return ndtr((x[..., None] - np.asarray(sample, dtype=np.float64)) / bandwidth).mean(axis=-1)


def poisson_kernel_cdf(sample: np.ndarray, x: np.ndarray | float, offset: float) -> np.ndarray:
    """F(x) = mean_k PoissonCDF(x; sample_k + offset)."""
    x = np.asarray(x, dtype=np.float64)
    return poisson.cdf(x[..., None], np.asarray(sample, dtype=np.float64) + offset).mean(axis=-1)


def kernel_cdf_matrix(values: np.ndarray, cfg: SseConfig) -> np.ndarray:
    """Evaluate each gene's kernel CDF at that gene's own observations."""
    n_genes, n_samples = values.shape
    out = np.empty_like(values)
    block = max(1, _BLOCK_CELLS // max(1, n_samples * n_samples))

    if cfg.gsva_kernel == KERNEL_POISSON:
        for start in range(0, n_genes, block):
            chunk = values[start : start + block]
            out[start : start + block] = poisson.cdf(
                chunk[:, :, None], chunk[:, None, :] + cfg.poisson_offset
            ).mean(axis=2)
        return out

    bandwidth = cfg.gsva_bandwidth_factor * values.std(axis=1, ddof=1)
    for start in range(0, n_genes, block):
        chunk = values[start : start + block]
        h = bandwidth[start : start + block, None, None]
        out[start : start + block] = ndtr((chunk[:, :, None] - chunk[:, None, :]) / h).mean(axis=2)
    return out


def rank_weights(n_genes: int) -> np.ndarray:
    """Weight of list position k (1-based, top first): ``|G - k + 1 - G/2|``."""
    positions = np.arange(1, n_genes + 1, dtype=np.float64)
    return np.abs(n_genes - positions + 1 - n_genes / 2.0)


def _check_counts(matrix: ExpressionMatrix) -> None:
    values = matrix.values
    if np.any(values < 0) or np.any(values != np.round(values)):
        raise InvalidKernel(
            "poisson kernel needs nonnegative integer values",
            study_id=matrix.study_id or None,
        )


def score_gsva(matrix: ExpressionMatrix, sets: GeneSetCollection, cfg: SseConfig) -> PathwayScoreMatrix:
    if cfg.gsva_kernel == KERNEL_POISSON:
        _check_counts(matrix)
        gene_ids, values, n_dropped = list(matrix.gene_ids), matrix.values, 0
    else:
        gene_ids, values, n_dropped = drop_constant_genes(matrix)
    resolved = resolve_sets(gene_ids, sets, cfg)
    n_genes = len(gene_ids)
    logger.debug("gsva %s kernel over %d genes x %d samples", cfg.gsva_kernel, n_genes, matrix.n_samples)

    cdf = kernel_cdf_matrix(values, cfg)
    # samples x positions: gene index at each list position
    order = descending_order(cdf).T
    weight_at = rank_weights(n_genes)[None, :]

    scores = np.empty((len(resolved.names), matrix.n_samples))
    for row, idx in enumerate(resolved.indices):
        mask = np.zeros(n_genes, dtype=bool)
        mask[idx] = True
        hit = mask[order]
        hit_weight = np.where(hit, weight_at, 0.0)
        total = hit_weight.sum(axis=1, keepdims=True)
        # a set sitting on the zero-weight middle position falls back to equal steps
        flat = total[:, 0] == 0
        if np.any(flat):
            hit_weight[flat] = hit[flat].astype(np.float64)
            total[flat] = len(idx)
        steps = np.where(hit, hit_weight / total, -1.0 / (n_genes - len(idx)))
        walk = np.cumsum(steps, axis=1)
        pos = np.maximum(walk.max(axis=1), 0.0)
        neg = np.minimum(walk.min(axis=1), 0.0)
        if cfg.gsva_max_diff:
            scores[row] = pos + neg
        else:
            scores[row] = np.where(pos > np.abs(neg), pos, neg)
    return finish(matrix, SSE_GSVA, resolved, scores, n_dropped)
