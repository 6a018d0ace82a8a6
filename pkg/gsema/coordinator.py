from __future__ import annotations

import logging
import time
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import TypeVar

import pandas as pd

from .config import PipelineConfig
from .effects import ModeratedFit, StudyEffect, compute_study_effects
from .errors import GsemaError
from .ingest import ClassLabels, GeneSetCollection, Study
from .meta import MetaResult, run_meta
from .pathmat import AlignedPathwayPanel, align_panel, filter_low_activity, filter_report, standardize_scores
from .sse import PathwayScoreMatrix, score_studies

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(eq=False)
class AnalysisResult:
    standardized: list[PathwayScoreMatrix]
    filtered: list[PathwayScoreMatrix]
    filter_table: pd.DataFrame
    panel: AlignedPathwayPanel
    fits: dict[str, ModeratedFit]
    effects: dict[str, list[StudyEffect]]
    results: list[MetaResult]
    scores: list[PathwayScoreMatrix] = field(default_factory=list)


class GsemaCoordinator:
    """Runs score -> standardize -> filter -> align -> effects -> meta and times each stage."""

    def __init__(self, config: PipelineConfig | None = None, threads: int = 1) -> None:
        self.config = config or PipelineConfig()
        self.threads = max(1, threads)
        self.timings: dict[str, float] = {}

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def _map(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        if self.threads == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def score(self, studies: Sequence[Study], sets: GeneSetCollection) -> list[PathwayScoreMatrix]:
        with self._stage("score"):
            return score_studies(studies, sets, self.config.sse, threads=self.threads)

    def standardize(self, scores: Sequence[PathwayScoreMatrix]) -> list[PathwayScoreMatrix]:
        with self._stage("standardize"):
            return self._map(lambda s: standardize_scores(s, self.config.filter), scores)

    def analyze(self, standardized: Sequence[PathwayScoreMatrix], labels: Sequence[ClassLabels]) -> AnalysisResult:
        """Everything downstream of scoring; labels are matched to matrices by position."""
        if len(standardized) != len(labels):
            raise GsemaError(f"{len(standardized)} score matrices but {len(labels)} label sets")
        pairs = list(zip(standardized, labels))
        cfg = self.config

        with self._stage("filter"):
            filtered = self._map(lambda p: _tagged(p[0], filter_low_activity, p[0], p[1], cfg.filter), pairs)
            table = pd.concat([filter_report(s, l, cfg.filter) for s, l in pairs], ignore_index=True)
        with self._stage("align"):
            panel = align_panel(filtered, cfg.filter)
        with self._stage("effects"):
            computed = self._map(
                lambda p: _tagged(p[0], compute_study_effects, p[0], p[1], cfg.effects),
                list(zip(filtered, labels)),
            )
        fits = {s.study_id: fit for s, (fit, _) in zip(filtered, computed)}
        effects = {s.study_id: eff for s, (_, eff) in zip(filtered, computed)}
        with self._stage("meta"):
            results = run_meta(panel, effects, cfg.meta)

        return AnalysisResult(
            standardized=list(standardized),
            filtered=filtered,
            filter_table=table,
            panel=panel,
            fits=fits,
            effects=effects,
            results=results,
        )

    def run(self, studies: Sequence[Study], sets: GeneSetCollection) -> AnalysisResult:
        scores = self.score(studies, sets)
        result = self.analyze(self.standardize(scores), [s.labels for s in studies])
        result.scores = scores
        logger.info(
            "pipeline finished in %.2fs over %d studies",
            sum(self.timings.values()),
            len(studies),
        )
        return result


def _tagged(scores: PathwayScoreMatrix, fn: Callable[..., R], *args) -> R:
    try:
        return fn(*args)
    except GsemaError as e:
        raise e.for_study(scores.study_id) if scores.study_id else e
