"""Label-permutation suite: how many pathways come out significant when labels are shuffled."""
from __future__ import annotations

import logging
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from tqdm import tqdm

from .config import PipelineConfig
from .const import DEFAULT_ALPHA, DEFAULT_ITERATIONS, DEFAULT_SEED, SPIKED_PATHWAY, STREAM_PERMUTE
from .coordinator import GsemaCoordinator
from .errors import GsemaError, NoPathways
from .ingest import ClassLabels, GeneSetCollection, Study
from .simulate import substream
from .sse import PathwayScoreMatrix

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_EMPTY = "empty"
STATUS_FAILED = "failed"


def permute_labels(labels: ClassLabels, rng: np.random.Generator) -> ClassLabels:
    return labels.with_assignment(rng.permutation(labels.is_case))


@dataclass(frozen=True)
class IterationOutcome:
    iteration: int
    status: str
    n_tested: int
    n_significant: int
    spiked_significant: bool
    error: str = ""


@dataclass(frozen=True)
class PermutationReport:
    outcomes: tuple[IterationOutcome, ...]
    seed: int
    p_threshold: float

    @property
    def iterations(self) -> int:
        return len(self.outcomes)

    @property
    def counts(self) -> np.ndarray:
        return np.array([o.n_significant for o in self.outcomes if o.status != STATUS_FAILED], dtype=int)

    @property
    def spiked_flags(self) -> np.ndarray:
        return np.array([o.spiked_significant for o in self.outcomes if o.status != STATUS_FAILED], dtype=bool)

    @property
    def n_failed(self) -> int:
        return sum(o.status == STATUS_FAILED for o in self.outcomes)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": [o.iteration for o in self.outcomes],
                "status": [o.status for o in self.outcomes],
                "n_tested": [o.n_tested for o in self.outcomes],
                "n_significant": [o.n_significant for o in self.outcomes],
                "spiked_significant": [o.spiked_significant for o in self.outcomes],
                "error": [o.error for o in self.outcomes],
            }
        )

    def summary(self) -> dict[str, Any]:
        counts = self.counts
        tested = np.array([o.n_tested for o in self.outcomes if o.status != STATUS_FAILED], dtype=float)
        out: dict[str, Any] = {
            "iterations": self.iterations,
            "seed": self.seed,
            "p_threshold": self.p_threshold,
            "failed": self.n_failed,
            "empty": sum(o.status == STATUS_EMPTY for o in self.outcomes),
        }
        if counts.size:
            q = np.quantile(counts, [0.0, 0.25, 0.5, 0.75, 1.0])
            out.update(
                min=float(q[0]),
                q25=float(q[1]),
                median=float(q[2]),
                q75=float(q[3]),
                max=float(q[4]),
                mean=float(counts.mean()),
                spiked_frequency=float(self.spiked_flags.mean()),
                median_fraction_tested=float(
                    np.median(np.divide(counts, tested, out=np.zeros_like(tested), where=tested > 0))
                ),
            )
        return out


def _one_iteration(
    iteration: int,
    standardized: Sequence[PathwayScoreMatrix],
    studies: Sequence[Study],
    config: PipelineConfig,
    seed: int,
    p_threshold: float,
) -> IterationOutcome:
    labels = [permute_labels(s.labels, substream(seed, STREAM_PERMUTE, iteration, k)) for k, s in enumerate(studies)]
    try:
        results = GsemaCoordinator(config).analyze(standardized, labels).results
    except NoPathways:
        return IterationOutcome(iteration, STATUS_EMPTY, 0, 0, False)
    except GsemaError as e:
        logger.warning("permutation %d failed: %s", iteration, e)
        return IterationOutcome(iteration, STATUS_FAILED, 0, 0, False, str(e))
    hits = [r for r in results if r.p < p_threshold]
    return IterationOutcome(
        iteration,
        STATUS_OK,
        len(results),
        len(hits),
        any(r.pathway == SPIKED_PATHWAY for r in hits),
    )


def run_permutation_suite(
    studies: Sequence[Study],
    sets: GeneSetCollection,
    config: PipelineConfig | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
    p_threshold: float = DEFAULT_ALPHA,
    progress: bool = True,
) -> PermutationReport:
    """Shuffle every study's labels independently per iteration and rerun everything after scoring.

    Scores do not depend on labels, so studies are scored and standardized once.
    """
    config = config or PipelineConfig()
    coordinator = GsemaCoordinator(config, threads=threads)
    standardized = coordinator.standardize(coordinator.score(studies, sets))

    def job(i: int) -> IterationOutcome:
        return _one_iteration(i, standardized, studies, config, seed, p_threshold)

    bar = dict(total=iterations, desc="permutations", file=sys.stderr, disable=not progress)
    if threads <= 1:
        outcomes = [job(i) for i in tqdm(range(iterations), **bar)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(tqdm(pool.map(job, range(iterations)), **bar))

    report = PermutationReport(tuple(outcomes), seed, p_threshold)
    logger.info(
        "%d permutations, median %s significant, %d failed",
        iterations,
        report.summary().get("median", "n/a"),
        report.n_failed,
    )
    return report
