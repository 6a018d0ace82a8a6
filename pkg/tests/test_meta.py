"""Fixed and random effects combination and the BH adjustment."""
import math

import numpy as np
import pytest

from gsema.config import FilterConfig, MetaConfig
from gsema.effects import StudyEffect, hedges_variance_corrected
from gsema.errors import DataError, DomainError
from gsema.meta import bh_adjust, dl_tau2, fem_combine, rem_combine, run_meta
from gsema.pathmat import align_panel
from gsema.sse.common import PathwayScoreMatrix


def brute_force_bh(p):
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    for pos, i in enumerate(order):
        adjusted[i] = min(min(1.0, (m / (j + 1)) * p[order[j]]) for j in range(pos, m))
    return adjusted


def build(effect_table, n_e=10, n_c=12, min_studies=None):
    """``effect_table`` maps study id -> {pathway: g}."""
    matrices, effects = [], {}
    for sid, per_pathway in effect_table.items():
        names = tuple(per_pathway)
        matrices.append(PathwayScoreMatrix(names, ("a", "b"), np.zeros((len(names), 2)), sid, "zscore"))
        effects[sid] = [
            StudyEffect(
                pathway=name,
                study_id=sid,
                t=g,
                df=20.0,
                d=g,
                g=g,
                j_factor=1.0,
                var_raw=0.1,
                n_e=n_e,
                n_c=n_c,
            )
            for name, g in per_pathway.items()
        ]
    panel = align_panel(matrices, FilterConfig(min_studies=min_studies))
    return panel, effects


def random_table(seed, k=4, n_pathways=25):
    rng = np.random.default_rng(seed)
    names = [f"P{i:02d}" for i in range(n_pathways)]
    return {
        f"study{j}": {n: float(g) for n, g in zip(names, rng.normal(rng.normal(size=n_pathways), 0.4))}
        for j in range(1, k + 1)
    }


class TestFem:
    def test_equal_effects(self):
        assert fem_combine([0.5, 0.5], [0.1, 0.1]) == pytest.approx((0.5, 0.05), abs=1e-15)

    def test_single_study(self):
        assert fem_combine([0.37], [0.2]) == pytest.approx((0.37, 0.2), abs=1e-15)

    def test_midpoint(self):
        assert fem_combine([0.0, 1.0], [0.1, 0.1])[0] == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("v", [[0.1, 0.0], [0.1, -0.2], [0.1, float("nan")]])
    def test_nonpositive_variance(self, v):
        with pytest.raises(DomainError):
            fem_combine([0.1, 0.2], v)


class TestDerSimonianLaird:
    def test_identical_effects(self):
        tau2, q, _ = dl_tau2([0.5, 0.5], [0.1, 0.1], 0.5)
        assert (tau2, q) == (0.0, 0.0)

    def test_worked_example(self):
        tau2, q, c = dl_tau2([0.0, 1.0], [0.1, 0.1], 0.5)
        assert q == pytest.approx(5.0, abs=1e-10)
        assert c == pytest.approx(10.0, abs=1e-10)
        assert tau2 == pytest.approx(0.4, abs=1e-10)

    def test_q_below_df(self):
        g, v = [0.0, 0.1], [1.0, 1.0]
        tau2, q, _ = dl_tau2(g, v, fem_combine(g, v)[0])
        assert q < 1
        assert tau2 == 0.0

    def test_single_study(self):
        assert dl_tau2([0.8], [0.1], 0.8) == (0.0, 0.0, 0.0)


class TestRem:
    def test_worked_example(self):
        ces, var, z, p = rem_combine([0.0, 1.0], [0.1, 0.1], 0.4)
        assert ces == pytest.approx(0.5, abs=1e-10)
        assert var == pytest.approx(0.25, abs=1e-10)
        assert z == pytest.approx(1.0, abs=1e-10)
        assert p == pytest.approx(math.erfc(1 / math.sqrt(2)), abs=1e-10)
        assert p == pytest.approx(0.317310507862914, abs=1e-10)

    def test_zero_tau2_is_fem(self):
        g, v = [0.2, 0.9, -0.1], [0.05, 0.2, 0.1]
        ces, var, z, _ = rem_combine(g, v, 0.0)
        assert (ces, var) == fem_combine(g, v)
        assert z == ces / math.sqrt(var)

    def test_zero_z(self):
        _, _, z, p = rem_combine([-1.0, 1.0], [0.3, 0.3], 0.1)
        assert z == 0.0
        assert p == 1.0

    def test_negative_tau2(self):
        with pytest.raises(DomainError):
            rem_combine([0.1], [0.1], -0.01)


class TestBenjaminiHochberg:
    def test_example(self):
        np.testing.assert_allclose(bh_adjust([0.01, 0.02, 0.03, 0.04]), [0.04] * 4, atol=1e-15)

    def test_all_ones(self):
        np.testing.assert_array_equal(bh_adjust([1.0, 1.0, 1.0]), [1.0, 1.0, 1.0])

    def test_single(self):
        np.testing.assert_array_equal(bh_adjust([0.023]), [0.023])

    def test_empty(self):
        assert bh_adjust([]).size == 0

    def test_top_rank_keeps_its_p(self):
        # 0.983 * 85 / 85 rounds to 0.9829999999999999
        p = np.full(85, 0.983)
        np.testing.assert_array_equal(bh_adjust(p), p)
        p = np.linspace(0.2, 0.983, 85)
        assert bh_adjust(p)[-1] == 0.983

    def test_matches_brute_force(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            m = int(rng.integers(1, 1001))
            # rounding produces ties
            p = np.round(rng.uniform(size=m) ** 2, 3)
            adjusted = bh_adjust(p)
            assert adjusted.tolist() == brute_force_bh(p.tolist())
            assert np.all(adjusted >= p)
            assert np.all(adjusted <= 1.0)
            order = np.argsort(p, kind="stable")
            assert np.all(np.diff(adjusted[order]) >= 0)

    @pytest.mark.parametrize("bad", [[0.1, 1.2], [-0.01], [float("nan")]])
    def test_outside_unit_interval(self, bad):
        with pytest.raises(DomainError):
            bh_adjust(bad)


class TestRunMeta:
    def test_single_study(self):
        panel, effects = build({"only": {"A": 0.6, "B": -0.2}}, n_e=8, n_c=9)
        results = {r.pathway: r for r in run_meta(panel, effects)}
        a = results["A"]
        assert a.k_studies == 1
        assert a.ces == pytest.approx(0.6, abs=1e-15)
        assert a.var_ces == pytest.approx(hedges_variance_corrected(0.6, 8, 9), abs=1e-15)
        assert (a.tau2, a.q, a.i2) == (0.0, 0.0, 0.0)

    def test_corrected_variance_attached(self):
        panel, effects = build({"s1": {"A": 0.2}, "s2": {"A": 0.6}}, n_e=10, n_c=10)
        (result,) = run_meta(panel, effects)
        expected = hedges_variance_corrected(0.4, 10, 10)
        assert [e.var_corrected for e in result.effects] == [pytest.approx(expected)] * 2
        assert result.per_study_g == (0.2, 0.6)
        assert result.study_ids == ("s1", "s2")

    def test_study_order_irrelevant(self):
        table = random_table(1)
        forward = run_meta(*build(table))
        backward = run_meta(*build(dict(reversed(list(table.items())))))
        assert forward == backward

    def test_negation(self):
        table = random_table(2)
        flipped = {sid: {n: -g for n, g in row.items()} for sid, row in table.items()}
        original = {r.pathway: r for r in run_meta(*build(table))}
        negated = {r.pathway: r for r in run_meta(*build(flipped))}
        for name, r in original.items():
            n = negated[name]
            assert n.ces == -r.ces
            assert n.z == -r.z
            assert (n.tau2, n.q, n.p, n.fdr) == (r.tau2, r.q, r.p, r.fdr)

    @pytest.mark.parametrize("model", ["fem", "rem"])
    def test_convex_combination(self, model):
        for r in run_meta(*build(random_table(3)), MetaConfig(model=model)):
            assert min(r.per_study_g) - 1e-12 <= r.ces <= max(r.per_study_g) + 1e-12
            assert r.tau2 >= 0
            assert r.fdr >= r.p

    def test_rem_variance_not_below_fem(self):
        table = random_table(4)
        fem = {r.pathway: r for r in run_meta(*build(table), MetaConfig(model="fem"))}
        rem = {r.pathway: r for r in run_meta(*build(table), MetaConfig(model="rem"))}
        for name, r in rem.items():
            assert fem[name].tau2 == 0.0
            if r.tau2 > 0:
                assert r.var_ces > fem[name].var_ces
            else:
                assert r.var_ces == fem[name].var_ces

    def test_identical_effects_same_under_both_models(self):
        table = {f"s{k}": {"A": 0.45, "B": -0.3} for k in range(3)}
        fem = run_meta(*build(table), MetaConfig(model="fem"))
        rem = run_meta(*build(table), MetaConfig(model="rem"))
        assert [r.ces for r in fem] == [r.ces for r in rem]
        assert all(r.tau2 == 0.0 for r in rem)

    def test_sorted_by_absolute_ces_then_name(self):
        table = {"s1": {"B": 0.5, "A": -0.5, "C": 0.1, "D": 0.9}}
        names = [r.pathway for r in run_meta(*build(table))]
        assert names == ["D", "A", "B", "C"]

    def test_partial_membership(self):
        table = {"s1": {"A": 0.3, "B": 0.2}, "s2": {"A": 0.5}, "s3": {"A": 0.1, "B": 0.4}}
        results = {r.pathway: r for r in run_meta(*build(table, min_studies=2))}
        assert results["B"].k_studies == 2
        assert results["B"].study_ids == ("s1", "s3")
        assert results["A"].k_studies == 3

    def test_heterogeneity_share(self):
        for r in run_meta(*build(random_table(5))):
            df = r.k_studies - 1
            expected = max(0.0, (r.q - df) / r.q) if r.q > 0 else 0.0
            assert r.i2 == pytest.approx(expected)
            assert 0.0 <= r.i2 < 1.0

    def test_significance_flag(self):
        results = run_meta(*build(random_table(6)), MetaConfig(alpha=0.2))
        assert all(r.significant == (r.fdr < 0.2) for r in results)

    def test_missing_effect(self):
        panel, effects = build({"s1": {"A": 0.3}, "s2": {"A": 0.5}})
        effects["s2"] = []
        with pytest.raises(DataError) as info:
            run_meta(panel, effects)
        assert info.value.pathway == "A"
        assert info.value.study_id == "s2"
