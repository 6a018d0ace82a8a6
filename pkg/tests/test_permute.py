"""Label permutation suite."""
import numpy as np
import pytest

from gsema.config import FilterConfig, PipelineConfig
from gsema.ingest import ClassLabels
from gsema.permute import PermutationReport, permute_labels, run_permutation_suite
from gsema.simulate import substream


@pytest.fixture
def labels():
    return ClassLabels(tuple(f"s{i}" for i in range(40)), np.arange(40) < 20)


class TestPermuteLabels:
    def test_group_sizes_kept(self, labels):
        rng = np.random.default_rng(0)
        for _ in range(50):
            shuffled = permute_labels(labels, rng)
            assert (shuffled.n_e, shuffled.n_c) == (20, 20)
            assert shuffled.sample_ids == labels.sample_ids

    def test_reproducible(self, labels):
        a = [permute_labels(labels, substream(3, 2, i, 0)).is_case for i in range(5)]
        b = [permute_labels(labels, substream(3, 2, i, 0)).is_case for i in range(5)]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_identity_assignment_valid(self, labels):
        same = labels.with_assignment(labels.is_case)
        np.testing.assert_array_equal(same.is_case, labels.is_case)


class TestSuite:
    @pytest.fixture
    def config(self):
        return PipelineConfig(filter=FilterConfig(activity_threshold=0.3))

    def test_threads_do_not_change_report(self, small_sim, config):
        one = run_permutation_suite(small_sim.studies, small_sim.sets, config, iterations=6, seed=7, progress=False)
        many = run_permutation_suite(
            small_sim.studies, small_sim.sets, config, iterations=6, seed=7, threads=3, progress=False
        )
        assert one == many
        assert one.to_frame().equals(many.to_frame())

    def test_outcomes(self, small_sim, config):
        report = run_permutation_suite(small_sim.studies, small_sim.sets, config, iterations=5, seed=1, progress=False)
        assert isinstance(report, PermutationReport)
        assert report.iterations == 5
        assert [o.iteration for o in report.outcomes] == list(range(5))
        for outcome in report.outcomes:
            assert outcome.status in ("ok", "empty", "failed")
            assert 0 <= outcome.n_significant <= outcome.n_tested <= len(small_sim.sets)
        summary = report.summary()
        assert summary["iterations"] == 5
        assert summary["seed"] == 1
        if report.counts.size:
            assert summary["min"] <= summary["median"] <= summary["max"]
            assert 0.0 <= summary["spiked_frequency"] <= 1.0

    def test_nothing_passes_filter(self, small_sim):
        config = PipelineConfig(filter=FilterConfig(activity_threshold=100.0))
        report = run_permutation_suite(small_sim.studies, small_sim.sets, config, iterations=3, progress=False)
        assert [o.status for o in report.outcomes] == ["empty"] * 3
        assert report.summary()["empty"] == 3
        assert report.n_failed == 0

    def test_frame_columns(self, small_sim, config):
        report = run_permutation_suite(small_sim.studies, small_sim.sets, config, iterations=2, progress=False)
        assert list(report.to_frame().columns) == [
            "iteration",
            "status",
            "n_tested",
            "n_significant",
            "spiked_significant",
            "error",
        ]
