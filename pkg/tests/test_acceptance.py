"""Behaviour on simulated data over many seeds; deselect with ``-m "not slow"``."""
import numpy as np
import pytest
from scipy import stats

from gsema.config import EffectsConfig, FilterConfig, PipelineConfig, SseConfig
from gsema.const import SPIKED_PATHWAY
from gsema.coordinator import GsemaCoordinator
from gsema.permute import run_permutation_suite
from gsema.simulate import SimConfig, simulate_studies

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("method", ["zscore", "ssgsea"])
def test_spiked_pathway_recovered(method):
    config = PipelineConfig(sse=SseConfig(method=method))
    hits = 0
    for seed in range(100):
        sim = simulate_studies(SimConfig(seed=seed))
        results = GsemaCoordinator(config).run(sim.studies, sim.sets).results
        top = results[0]
        hits += top.pathway == SPIKED_PATHWAY and top.fdr < 0.05
    assert hits >= 95


def test_permuted_labels_rarely_call_spiked_pathway():
    sim = simulate_studies(SimConfig(seed=2024))
    report = run_permutation_suite(sim.studies, sim.sets, PipelineConfig(), iterations=100, seed=11, progress=False)
    summary = report.summary()
    assert report.n_failed == 0
    assert summary.get("spiked_frequency", 0.0) <= 0.05
    assert summary.get("median_fraction_tested", 0.0) <= 0.05


def test_null_p_values_uniform():
    sim = simulate_studies(
        SimConfig(
            de_fraction=0.0,
            spiked_set_size=0,
            genes=20000,
            n_decoy_sets=4000,
            decoy_set_size_range=(7, 10),
            seed=77,
        )
    )
    config = PipelineConfig(
        filter=FilterConfig(activity_threshold=0.0),
        effects=EffectsConfig(ordinary_t=True),
    )
    results = GsemaCoordinator(config, threads=4).run(sim.studies, sim.sets).results
    p = np.array([r.p for r in results])
    assert p.size >= 1000
    assert stats.kstest(p, "uniform").statistic < 0.05
