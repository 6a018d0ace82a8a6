from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..config import SseConfig
from ..const import FLOAT_FORMAT, SSE_METHODS
from ..errors import ConfigError, DataError, GsemaError, NoPathways
from ..ingest import (
    ClassLabels,
    ExpressionMatrix,
    GeneSetCollection,
    ManifestEntry,
    parse_expression_tsv,
    parse_labels,
    read_manifest,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PathwayScoreMatrix:
    pathway_names: tuple[str, ...]
    sample_ids: tuple[str, ...]
    scores: np.ndarray
    study_id: str
    method: str
    effective_set_sizes: dict[str, int] = field(default_factory=dict)
    dropped_pathways: dict[str, str] = field(default_factory=dict)
    dropped_genes: int = 0

    def __post_init__(self) -> None:
        scores = np.array(self.scores, dtype=np.float64)
        if scores.shape != (len(self.pathway_names), len(self.sample_ids)):
            raise DataError(
                f"score matrix shape {scores.shape} does not match "
                f"{len(self.pathway_names)} pathways x {len(self.sample_ids)} samples",
                study_id=self.study_id or None,
            )
        if not np.all(np.isfinite(scores)):
            raise DataError("non-finite enrichment score", study_id=self.study_id or None)
        scores.setflags(write=False)
        object.__setattr__(self, "pathway_names", tuple(self.pathway_names))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "scores", scores)

    @property
    def n_pathways(self) -> int:
        return len(self.pathway_names)

    def row(self, pathway: str) -> np.ndarray:
        return self.scores[self.pathway_names.index(pathway)]

    def subset(self, keep: np.ndarray, reason: str | None = None) -> PathwayScoreMatrix:
        keep = np.asarray(keep, dtype=bool)
        names = [n for n, k in zip(self.pathway_names, keep) if k]
        dropped = dict(self.dropped_pathways)
        if reason is not None:
            dropped.update({n: reason for n, k in zip(self.pathway_names, keep) if not k})
        return PathwayScoreMatrix(
            pathway_names=tuple(names),
            sample_ids=self.sample_ids,
            scores=self.scores[keep],
            study_id=self.study_id,
            method=self.method,
            effective_set_sizes={n: self.effective_set_sizes[n] for n in names if n in self.effective_set_sizes},
            dropped_pathways=dropped,
            dropped_genes=self.dropped_genes,
        )

    def with_scores(self, scores: np.ndarray) -> PathwayScoreMatrix:
        return PathwayScoreMatrix(
            pathway_names=self.pathway_names,
            sample_ids=self.sample_ids,
            scores=scores,
            study_id=self.study_id,
            method=self.method,
            effective_set_sizes=dict(self.effective_set_sizes),
            dropped_pathways=dict(self.dropped_pathways),
            dropped_genes=self.dropped_genes,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.scores, index=list(self.pathway_names), columns=list(self.sample_ids))


@dataclass(frozen=True)
class ResolvedSets:
    names: list[str]
    indices: list[np.ndarray]
    sizes: dict[str, int]
    dropped: dict[str, str]


def resolve_sets(gene_ids: Sequence[str], sets: GeneSetCollection, cfg: SseConfig) -> ResolvedSets:
    """Intersect every set with the measured genes and apply the size rules.

    Indices keep the catalog order of each set's genes.
    """
    position = {g: i for i, g in enumerate(gene_ids)}
    n_genes = len(gene_ids)
    names: list[str] = []
    indices: list[np.ndarray] = []
    sizes: dict[str, int] = {}
    dropped: dict[str, str] = {}
    for gene_set in sets:
        idx = [position[g] for g in gene_set.genes if g in position]
        n = len(idx)
        if n == 0:
            dropped[gene_set.name] = "no measured genes"
        elif n < cfg.min_set_size:
            dropped[gene_set.name] = f"{n} measured genes, below min_set_size {cfg.min_set_size}"
        elif cfg.max_set_size is not None and n > cfg.max_set_size:
            dropped[gene_set.name] = f"{n} measured genes, above max_set_size {cfg.max_set_size}"
        elif n >= n_genes:
            dropped[gene_set.name] = "covers all measured genes"
        else:
            names.append(gene_set.name)
            indices.append(np.array(idx, dtype=np.intp))
            sizes[gene_set.name] = n
    return ResolvedSets(names, indices, sizes, dropped)


def drop_constant_genes(matrix: ExpressionMatrix) -> tuple[list[str], np.ndarray, int]:
    values = matrix.values
    if matrix.n_samples < 2:
        return list(matrix.gene_ids), values, 0
    sd = values.std(axis=1, ddof=1)
    keep = sd > 0
    n_dropped = int((~keep).sum())
    if n_dropped:
        logger.warning("%s: dropped %d zero-variance genes", matrix.study_id or "study", n_dropped)
    return [g for g, k in zip(matrix.gene_ids, keep) if k], values[keep], n_dropped


def ascending_ranks(values: np.ndarray) -> np.ndarray:
    """Column-wise ranks 1..G, smallest value first; ties go to the lower gene index first."""
    n_genes = values.shape[0]
    order = np.argsort(values, axis=0, kind="stable")
    ranks = np.empty(values.shape, dtype=np.float64)
    np.put_along_axis(ranks, order, np.arange(1, n_genes + 1, dtype=np.float64)[:, None], axis=0)
    return ranks


def descending_order(values: np.ndarray) -> np.ndarray:
    """Per column, gene indices from largest to smallest value; ties by ascending gene index."""
    return np.argsort(-values, axis=0, kind="stable")


def finish(
    matrix: ExpressionMatrix,
    method: str,
    resolved: ResolvedSets,
    scores: np.ndarray,
    dropped_genes: int = 0,
) -> PathwayScoreMatrix:
    if not resolved.names:
        raise NoPathways(
            f"no gene set passed the size filters ({len(resolved.dropped)} dropped)",
            study_id=matrix.study_id or None,
        )
    if resolved.dropped:
        logger.info("%s: %d gene sets dropped before scoring", matrix.study_id or "study", len(resolved.dropped))
    return PathwayScoreMatrix(
        pathway_names=tuple(resolved.names),
        sample_ids=matrix.sample_ids,
        scores=scores,
        study_id=matrix.study_id,
        method=method,
        effective_set_sizes=dict(resolved.sizes),
        dropped_pathways=dict(resolved.dropped),
        dropped_genes=dropped_genes,
    )


def write_scores_tsv(scores: PathwayScoreMatrix, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scores.to_frame().to_csv(
        path,
        sep="\t",
        index_label="pathway",
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
        quoting=csv.QUOTE_NONE,
    )
    return path


def parse_scores_tsv(path: str | Path, study_id: str = "", method: str = "") -> PathwayScoreMatrix:
    table = parse_expression_tsv(path, study_id=study_id, id_header="pathway")
    return PathwayScoreMatrix(
        pathway_names=table.gene_ids,
        sample_ids=table.sample_ids,
        scores=table.values,
        study_id=study_id,
        method=method,
    )


def resolve_score_method(entries: Sequence[ManifestEntry], requested: str | None = None) -> str:
    recorded = {e.method for e in entries}
    if recorded == {None}:
        if requested is None:
            raise ConfigError("score manifest records no scoring method; pass --sse")
        return requested
    if len(recorded) > 1:
        raise ConfigError(f"score manifest mixes scoring methods: {sorted(str(m) for m in recorded)}")
    (method,) = recorded
    if method not in SSE_METHODS:
        raise ConfigError(f"score manifest names unknown method {method!r}")
    if requested is not None and requested != method:
        raise ConfigError(f"scores were made with {method}, not {requested}")
    return method


def _load_scored(entry: ManifestEntry, method: str) -> tuple[PathwayScoreMatrix, ClassLabels]:
    try:
        scores = parse_scores_tsv(entry.expression_path, study_id=entry.study_id, method=method)
        labels = parse_labels(entry.labels_path, scores)
    except GsemaError as e:
        raise e.for_study(entry.study_id)
    return scores, labels


def load_score_manifest(
    path: str | Path, requested: str | None = None, threads: int = 1
) -> tuple[list[PathwayScoreMatrix], list[ClassLabels]]:
    """Score matrices and labels listed by a manifest written by ``gsema score``.

    ``requested`` is an explicitly chosen method; it must agree with the one
    the manifest records.
    """
    manifest = read_manifest(path)
    method = resolve_score_method(manifest.entries, requested)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        loaded = list(pool.map(lambda e: _load_scored(e, method), manifest.entries))
    logger.info("loaded %d %s score matrices from %s", len(loaded), method, path)
    return [scores for scores, _ in loaded], [labels for _, labels in loaded]
