"""Synthetic multi-study expression data with one spiked pathway.

Counts come from a negative binomial with shared per-gene baseline means.
A pool of DE genes is shared by all studies; the spiked pathway is drawn
from it and always up-regulated. Decoy sets avoid the DE pool unless
``decoy_overlap_de`` is set.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol

from .const import DEFAULT_SEED, GMT_FILE, MANIFEST_FILE, SPIKED_PATHWAY, STREAM_DESIGN, STREAM_STUDY, TRUTH_FILE
from .errors import ConfigError
from .ingest import ClassLabels, ExpressionMatrix, GeneSet, GeneSetCollection, ManifestEntry, Study
from .ingest import write_expression_tsv, write_gmt, write_labels_tsv, write_manifest
from .report import save_json

logger = logging.getLogger(__name__)

COUNT = vol.All(vol.Coerce(int), vol.Range(min=1))
NONNEG_COUNT = vol.All(vol.Coerce(int), vol.Range(min=0))
POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))


def _pair(kind):
    return vol.All(vol.ExactSequence([kind, kind]), lambda p: tuple(p))


SIM_SCHEMA = vol.Schema(
    {
        vol.Required("k_studies"): COUNT,
        vol.Required("genes"): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Required("n_e"): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Required("n_c"): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Required("de_fraction"): vol.All(vol.Coerce(float), vol.Range(min=0, max=1)),
        vol.Required("spiked_set_size"): NONNEG_COUNT,
        vol.Required("fold_change_range"): _pair(POSITIVE),
        vol.Required("nb_dispersion"): POSITIVE,
        vol.Required("baseline_log_mean"): vol.Coerce(float),
        vol.Required("baseline_log_sd"): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Required("n_decoy_sets"): NONNEG_COUNT,
        vol.Required("decoy_set_size_range"): _pair(COUNT),
        vol.Required("decoy_overlap_de"): vol.Boolean(),
        vol.Required("seed"): vol.All(vol.Coerce(int), vol.Range(min=0, max=2**64 - 1)),
    }
)


@dataclass(frozen=True)
class SimConfig:
    k_studies: int = 5
    genes: int = 2000
    n_e: int = 20
    n_c: int = 20
    de_fraction: float = 0.01
    spiked_set_size: int = 23
    fold_change_range: tuple[float, float] = (2.0, 4.0)
    nb_dispersion: float = 0.2
    baseline_log_mean: float = 4.0
    baseline_log_sd: float = 1.5
    n_decoy_sets: int = 500
    decoy_set_size_range: tuple[int, int] = (10, 100)
    decoy_overlap_de: bool = False
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        try:
            checked = SIM_SCHEMA(asdict(self))
        except vol.Invalid as e:
            raise ConfigError(f"invalid simulation setting: {e}") from e
        for key, value in checked.items():
            object.__setattr__(self, key, value)
        low, high = self.fold_change_range
        if low > high:
            raise ConfigError(f"fold_change_range {self.fold_change_range} is not ordered")
        low, high = self.decoy_set_size_range
        if low > high:
            raise ConfigError(f"decoy_set_size_range {self.decoy_set_size_range} is not ordered")
        if self.spiked_set_size > self.n_de:
            raise ConfigError(f"spiked set of {self.spiked_set_size} genes does not fit a DE pool of {self.n_de}")
        if self.spiked_set_size >= self.genes:
            raise ConfigError("spiked set must leave some genes outside it")

    @property
    def n_de(self) -> int:
        """DE pool size; grown to hold the spiked set whenever any DE is requested."""
        if self.de_fraction == 0:
            return 0
        return min(self.genes, max(int(round(self.de_fraction * self.genes)), self.spiked_set_size))


def substream(seed: int, tag: int, *counters: int) -> np.random.Generator:
    """Independent generator for ``(seed, tag, *counters)``; the same key always gives the same stream."""
    return np.random.default_rng(np.random.SeedSequence([seed, tag, *counters]))


@dataclass(frozen=True, eq=False)
class SimulatedData:
    studies: list[Study]
    sets: GeneSetCollection
    truth: dict[str, Any] = field(default_factory=dict)


def _gene_ids(n: int) -> list[str]:
    width = len(str(n))
    return [f"G{i:0{width}d}" for i in range(1, n + 1)]


def _decoys(cfg: SimConfig, rng: np.random.Generator, gene_ids: list[str], de_pool: np.ndarray) -> list[GeneSet]:
    if cfg.n_decoy_sets == 0:
        return []
    candidates = np.arange(cfg.genes) if cfg.decoy_overlap_de else np.setdiff1d(np.arange(cfg.genes), de_pool)
    low, high = cfg.decoy_set_size_range
    high = min(high, candidates.size)
    if candidates.size == 0 or low > high:
        raise ConfigError(f"only {candidates.size} genes available for decoy sets of at least {low}")
    width = len(str(cfg.n_decoy_sets))
    decoys = []
    for i in range(cfg.n_decoy_sets):
        size = int(rng.integers(low, high + 1))
        picked = np.sort(rng.choice(candidates, size=size, replace=False))
        decoys.append(GeneSet(f"Decoy_{i + 1:0{width}d}", "random decoy set", tuple(gene_ids[j] for j in picked)))
    return decoys


def _draw_counts(rng: np.random.Generator, mu: np.ndarray, n_samples: int, dispersion: float) -> np.ndarray:
    n = 1.0 / dispersion
    p = n / (n + mu)
    return rng.negative_binomial(n, np.repeat(p[:, None], n_samples, axis=1))


def simulate_studies(cfg: SimConfig | None = None) -> SimulatedData:
    cfg = cfg or SimConfig()
    design = substream(cfg.seed, STREAM_DESIGN)
    gene_ids = _gene_ids(cfg.genes)

    baseline = design.lognormal(cfg.baseline_log_mean, cfg.baseline_log_sd, size=cfg.genes)
    de_pool = np.sort(design.choice(cfg.genes, size=cfg.n_de, replace=False)) if cfg.n_de else np.array([], dtype=int)
    shuffled = design.permutation(de_pool)
    spiked = np.sort(shuffled[: cfg.spiked_set_size])
    direction = np.zeros(cfg.genes)
    direction[de_pool] = design.choice([-1.0, 1.0], size=de_pool.size)
    direction[spiked] = 1.0
    fold = np.ones(cfg.genes)
    fold[de_pool] = design.uniform(*cfg.fold_change_range, size=de_pool.size)
    case_mu = baseline * np.where(direction > 0, fold, np.where(direction < 0, 1.0 / fold, 1.0))

    gene_sets = []
    if cfg.spiked_set_size:
        gene_sets.append(GeneSet(SPIKED_PATHWAY, "spiked up-regulated DE genes", tuple(gene_ids[i] for i in spiked)))
    gene_sets.extend(_decoys(cfg, design, gene_ids, de_pool))
    if not gene_sets:
        raise ConfigError("simulation would produce an empty gene set catalog")
    sets = GeneSetCollection(tuple(gene_sets))

    width = len(str(cfg.k_studies))
    studies = []
    for k in range(cfg.k_studies):
        study_id = f"study{k + 1:0{width}d}"
        rng = substream(cfg.seed, STREAM_STUDY, k)
        counts = np.hstack(
            [
                _draw_counts(rng, case_mu, cfg.n_e, cfg.nb_dispersion),
                _draw_counts(rng, baseline, cfg.n_c, cfg.nb_dispersion),
            ]
        )
        samples = [f"{study_id}_case{i + 1:03d}" for i in range(cfg.n_e)]
        samples += [f"{study_id}_ctrl{i + 1:03d}" for i in range(cfg.n_c)]
        matrix = ExpressionMatrix(tuple(gene_ids), tuple(samples), np.log2(counts + 1.0), study_id)
        labels = ClassLabels(tuple(samples), np.r_[np.ones(cfg.n_e, bool), np.zeros(cfg.n_c, bool)])
        studies.append(Study(study_id, matrix, labels))

    truth = {
        "seed": cfg.seed,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()},
        "spiked_set": SPIKED_PATHWAY if cfg.spiked_set_size else None,
        "spiked_genes": [gene_ids[i] for i in spiked],
        "de_genes": [gene_ids[i] for i in de_pool],
        "up_genes": [gene_ids[i] for i in de_pool if direction[i] > 0],
        "down_genes": [gene_ids[i] for i in de_pool if direction[i] < 0],
        "studies": [s.study_id for s in studies],
    }
    logger.info(
        "simulated %d studies, %d genes, %d de genes, %d gene sets",
        cfg.k_studies,
        cfg.genes,
        de_pool.size,
        len(sets),
    )
    return SimulatedData(studies, sets, truth)


def write_simulation(sim: SimulatedData, out_dir: str | Path) -> Path:
    """Write studies, labels, catalog, manifest and truth record; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for study in sim.studies:
        expr = write_expression_tsv(study.matrix, out / f"{study.study_id}.tsv")
        labels = write_labels_tsv(study.labels, out / f"{study.study_id}_labels.tsv")
        entries.append(ManifestEntry(study.study_id, expr, labels))
    write_gmt(sim.sets, out / GMT_FILE)
    save_json(sim.truth, out / TRUTH_FILE)
    manifest = write_manifest(entries, out / MANIFEST_FILE)
    logger.info("wrote %d studies to %s", len(entries), out)
    return manifest
