"""Shared fixtures: tiny hand-checkable matrices and a small simulated panel."""
from pathlib import Path

import numpy as np
import pytest

from gsema.config import SseConfig
from gsema.ingest import ClassLabels, ExpressionMatrix, GeneSet, GeneSetCollection
from gsema.simulate import SimConfig, simulate_studies


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance runs over many seeds or permutations")


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def toy_matrix():
    """5 genes x 4 samples, no ties within any column."""
    rng = np.random.default_rng(11)
    values = rng.normal(5.0, 2.0, size=(5, 4))
    return ExpressionMatrix(
        gene_ids=("g1", "g2", "g3", "g4", "g5"),
        sample_ids=("s1", "s2", "s3", "s4"),
        values=values,
        study_id="toy",
    )


@pytest.fixture
def toy_sets():
    return GeneSetCollection(
        (
            GeneSet("S1", "first", ("g1", "g2")),
            GeneSet("S2", "second", ("g2", "g3", "g4")),
        )
    )


@pytest.fixture
def loose_sse():
    return SseConfig(min_set_size=1)


@pytest.fixture
def balanced_labels():
    def make(sample_ids, n_case):
        is_case = np.zeros(len(sample_ids), dtype=bool)
        is_case[:n_case] = True
        return ClassLabels(tuple(sample_ids), is_case)

    return make


@pytest.fixture(scope="session")
def small_sim():
    cfg = SimConfig(
        k_studies=3,
        genes=300,
        n_e=6,
        n_c=6,
        n_decoy_sets=40,
        decoy_set_size_range=(8, 30),
        seed=1234,
    )
    return simulate_studies(cfg)


@pytest.fixture
def toy_files(tmp_path):
    """Writer for small TSV and GMT inputs under ``tmp_path``."""

    def write(name: str, text: str) -> Path:
        return write_text(tmp_path / name, text)

    return write
