"""Moderated t, Cohen's d, Hedges' g and their variances."""
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import polygamma

from gsema.config import EffectsConfig
from gsema.const import PRIOR_DF_CAP
from gsema.effects import (
    cohens_to_hedges,
    compute_study_effects,
    fit_f_dist,
    fit_moderated_t,
    hedges_variance_corrected,
    hedges_variance_raw,
    squeeze_var,
    t_to_cohens_d,
    trigamma_inverse,
)
from gsema.errors import DegenerateVariance, DomainError
from gsema.ingest import ClassLabels
from gsema.sse.common import PathwayScoreMatrix


def make_panel(values, n_case, study_id="s"):
    values = np.asarray(values, dtype=float)
    samples = tuple(f"x{i}" for i in range(values.shape[1]))
    names = tuple(f"P{i:03d}" for i in range(values.shape[0]))
    scores = PathwayScoreMatrix(names, samples, values, study_id, "ssgsea")
    labels = ClassLabels(samples, np.arange(values.shape[1]) < n_case)
    return scores, labels


def random_panel(seed, n_pathways=30, n_case=8, n_control=7, shift=0.5):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n_pathways, n_case + n_control)) * rng.uniform(0.5, 2.0, size=(n_pathways, 1))
    values[:, :n_case] += shift * rng.normal(size=(n_pathways, 1))
    return make_panel(values, n_case)


class TestHandValues:
    def test_zero_t(self):
        assert t_to_cohens_d(0.0, 10, 12, 20) == 0.0

    def test_t_to_d(self):
        assert t_to_cohens_d(2.0, 50, 50, 98) == pytest.approx(100 * 2 / (50 * math.sqrt(98)), abs=1e-12)
        assert t_to_cohens_d(2.0, 50, 50, 98) == pytest.approx(0.404061017820884, abs=1e-12)

    def test_nonpositive_df(self):
        with pytest.raises(DomainError):
            t_to_cohens_d(1.0, 5, 5, 0)

    def test_correction_factor(self):
        _, j = cohens_to_hedges(0.3, 50, 50)
        assert j == pytest.approx(1 - 3 / 391, abs=1e-15)
        assert j == pytest.approx(0.9923273657289002, abs=1e-12)

    def test_zero_d(self):
        assert cohens_to_hedges(0.0, 3, 17)[0] == 0.0

    def test_two_by_two(self):
        # x_case = [2, 4], x_control = [1, 3]: pooled sd sqrt(2), d = 1/sqrt(2)
        d = (3.0 - 2.0) / math.sqrt(2.0)
        g, j = cohens_to_hedges(d, 2, 2)
        assert j == pytest.approx(4 / 7, abs=1e-15)
        assert g == pytest.approx(0.40406101782088427, abs=1e-12)
        assert hedges_variance_raw(d, j, 2, 2) == pytest.approx((16 / 49) * (1 + 0.5 / 8), abs=1e-12)

    def test_correction_undefined(self):
        with pytest.raises(DomainError):
            cohens_to_hedges(0.5, 1, 1)

    def test_raw_variance_collapse(self):
        assert hedges_variance_raw(0.0, 1.0, 25, 25) == pytest.approx(2 / 25, abs=1e-15)

    def test_raw_variance_grows_with_effect(self):
        d = np.linspace(0.0, 3.0, 50)
        v = hedges_variance_raw(d, 0.97, 12, 9)
        assert np.all(np.diff(v) > 0)
        np.testing.assert_allclose(hedges_variance_raw(-d, 0.97, 12, 9), v, atol=0)

    def test_corrected_variance(self):
        assert hedges_variance_corrected(0.5, 50, 50) == pytest.approx(0.04125, abs=1e-12)
        assert hedges_variance_corrected(0.0, 20, 30) == 1 / 20 + 1 / 30


class TestTrigammaInverse:
    @pytest.mark.parametrize("x", [1e-4, 0.01, 0.3, 1.0, 4.0, 100.0, 1e5])
    def test_inverts(self, x):
        y = trigamma_inverse(x)
        assert float(polygamma(1, y)) == pytest.approx(x, rel=1e-6)

    def test_large_argument(self):
        assert trigamma_inverse(1e8) == pytest.approx(1e-4)

    def test_small_argument(self):
        assert trigamma_inverse(1e-7) == pytest.approx(1e7)

    @pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            trigamma_inverse(x)


class TestPriorFit:
    def test_recovers_scaled_f(self):
        rng = np.random.default_rng(17)
        d, d0, s0 = 10, 8.0, 2.0
        s2 = s0 * (rng.chisquare(d, 50000) / d) / (rng.chisquare(d0, 50000) / d0)
        est_d0, est_s0 = fit_f_dist(s2, d)
        assert est_d0 == pytest.approx(d0, rel=0.15)
        assert est_s0 == pytest.approx(s0, rel=0.05)

    def test_no_extra_spread_gives_infinite_prior(self):
        d0, s0 = fit_f_dist(np.full(25, 0.8), 12)
        assert math.isinf(d0)
        assert s0 == pytest.approx(0.8, rel=1e-12)

    def test_squeeze_identical_variances(self):
        v = np.full(7, 1.3)
        for prior_df in (0.0, 3.0, 250.0, math.inf):
            np.testing.assert_allclose(squeeze_var(v, 10, prior_df, 1.3), v, rtol=1e-14)

    def test_squeeze_is_weighted_mean(self):
        out = squeeze_var(np.array([1.0, 4.0]), 6, 2.0, 2.0)
        np.testing.assert_allclose(out, [(4 + 6) / 8, (4 + 24) / 8])


class TestModeratedT:
    def test_ordinary_matches_two_sample_t(self):
        scores, labels = random_panel(1, n_pathways=20)
        fit = fit_moderated_t(scores, labels, ordinary_t=True)
        case, control = scores.scores[:, labels.is_case], scores.scores[:, ~labels.is_case]
        oracle = stats.ttest_ind(case, control, axis=1)
        np.testing.assert_allclose(fit.t, oracle.statistic, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(fit.p_value, oracle.pvalue, rtol=1e-8, atol=1e-12)
        assert fit.df_total == labels.n_e + labels.n_c - 2
        assert fit.prior_df == 0.0

    def test_identical_residual_variances(self):
        rng = np.random.default_rng(6)
        case, control = rng.normal(size=6), rng.normal(size=5)
        rows = [np.r_[case + shift, control] for shift in np.linspace(-1.0, 1.0, 12)]
        scores, labels = make_panel(rows, 6)
        fit = fit_moderated_t(scores, labels)
        np.testing.assert_allclose(fit.posterior_var, fit.residual_var, rtol=1e-9)
        assert fit.infinite_prior_df
        assert fit.prior_df == PRIOR_DF_CAP
        # capped at the residual df pooled over all pathways
        assert fit.df_total == 9 * 12

    def test_single_pathway_has_no_prior(self, caplog):
        scores, labels = random_panel(2, n_pathways=1)
        fit = fit_moderated_t(scores, labels)
        ordinary = fit_moderated_t(scores, labels, ordinary_t=True)
        np.testing.assert_array_equal(fit.t, ordinary.t)
        assert "fewer than 2 pathways" in caplog.text

    def test_degenerate_variance(self):
        values = np.array([[1.0, 1.0, 1.0, 2.0, 2.0, 2.0], [0.3, 1.2, 0.8, 2.0, 1.1, 0.4]])
        scores, labels = make_panel(values, 3)
        with pytest.raises(DegenerateVariance) as info:
            fit_moderated_t(scores, labels, ordinary_t=True)
        assert info.value.pathway == "P000"

    def test_shrinkage_pulls_towards_prior(self):
        scores, labels = random_panel(3, n_pathways=200)
        fit = fit_moderated_t(scores, labels)
        assert 0 < fit.prior_df < math.inf
        low, high = np.minimum(fit.residual_var, fit.prior_var), np.maximum(fit.residual_var, fit.prior_var)
        assert np.all(fit.posterior_var >= low - 1e-12)
        assert np.all(fit.posterior_var <= high + 1e-12)
        assert fit.df_total == pytest.approx(fit.prior_df + fit.residual_df)


class TestStudyEffects:
    def test_label_swap_negates(self):
        scores, labels = random_panel(4)
        _, forward = compute_study_effects(scores, labels)
        _, backward = compute_study_effects(scores, labels.swapped())
        for a, b in zip(forward, backward):
            assert b.pathway == a.pathway
            assert b.t == -a.t
            assert b.d == -a.d
            assert b.g == -a.g
            assert b.var_raw == a.var_raw
            assert (b.n_e, b.n_c) == (a.n_c, a.n_e)

    def test_ordinary_t_identity_on_random_designs(self):
        rng = np.random.default_rng(1000)
        cfg = EffectsConfig(ordinary_t=True)
        for _ in range(1000):
            n_e, n_c = (int(x) for x in rng.integers(2, 31, size=2))
            values = rng.normal(size=(3, n_e + n_c)) * rng.uniform(0.1, 10.0) + rng.normal(size=(3, 1))
            scores, labels = make_panel(values, n_e)
            _, effects = compute_study_effects(scores, labels, cfg)
            case, control = values[:, :n_e], values[:, n_e:]
            pooled = ((n_e - 1) * case.var(axis=1, ddof=1) + (n_c - 1) * control.var(axis=1, ddof=1)) / (n_e + n_c - 2)
            direct = (case.mean(axis=1) - control.mean(axis=1)) / np.sqrt(pooled)
            expected = direct * math.sqrt((n_e + n_c) / (n_e + n_c - 2))
            np.testing.assert_allclose([e.d for e in effects], expected, rtol=1e-12, atol=1e-12)

    def test_affine_per_pathway_ordinary(self):
        scores, labels = random_panel(5)
        cfg = EffectsConfig(ordinary_t=True)
        values = np.array(scores.scores)
        values[4] = 3.5 * values[4] - 11.0
        _, before = compute_study_effects(scores, labels, cfg)
        _, after = compute_study_effects(scores.with_scores(values), labels, cfg)
        for name in ("d", "g", "var_raw"):
            assert getattr(after[4], name) == pytest.approx(getattr(before[4], name), rel=1e-10)

    def test_global_scale_moderated(self):
        scores, labels = random_panel(6, n_pathways=60)
        fit_a, before = compute_study_effects(scores, labels)
        fit_b, after = compute_study_effects(scores.with_scores(scores.scores * 3.7), labels)
        np.testing.assert_allclose(fit_b.t, fit_a.t, rtol=1e-9)
        np.testing.assert_allclose([e.g for e in after], [e.g for e in before], rtol=1e-9)

    def test_design_df_switch(self):
        scores, labels = random_panel(7)
        fit, moderated = compute_study_effects(scores, labels)
        _, design = compute_study_effects(scores, labels, EffectsConfig(design_df=True))
        assert moderated[0].df == fit.df_total
        assert design[0].df == labels.n_e + labels.n_c - 2
        assert design[0].t == moderated[0].t

    def test_fields(self):
        scores, labels = random_panel(8)
        _, effects = compute_study_effects(scores, labels)
        assert [e.pathway for e in effects] == list(scores.pathway_names)
        assert all(e.study_id == "s" for e in effects)
        assert all(e.var_corrected is None for e in effects)
        assert all(0 <= e.p_value <= 1 for e in effects)
