from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import stats

from causalomics.citests import (
    ChiSquareTester,
    CgLrtTester,
    CITestError,
    DsepOracle,
    RcitParams,
    RcitTester,
    cg_lrt,
    chi_square_test,
    dsep_oracle_test,
    rcit,
)
from causalomics.graphs import MixedGraph, d_separated
from util import build_table


def fisher_z_p(data, i, j, rest):
    """Classical partial-correlation test used as an oracle."""
    cols = [i, j] + list(rest)
    corr = np.corrcoef(data[:, cols], rowvar=False)
    prec = np.linalg.inv(corr)
    r = -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])
    z = 0.5 * np.log((1 + r) / (1 - r)) * np.sqrt(len(data) - len(rest) - 3)
    return 2 * stats.norm.sf(abs(z))


class TestChiSquare:
    def test_perfectly_balanced_table(self):
        t = build_table(x=np.repeat([0, 1], 50),
                        y=np.tile(np.repeat([0, 1], 25), 2))
        r = chi_square_test(t, "x", "y")
        assert r.statistic == 0.0
        assert r.p_value == 1.0
        assert r.independent

    def test_identical_columns_reject_hard(self):
        codes = np.repeat([0, 1], 50)
        t = build_table(x=codes, y=codes.copy())
        r = chi_square_test(t, "x", "y")
        assert r.p_value < 1e-10
        assert not r.independent

    def test_hand_computed_three_by_two(self):
        counts = np.array([[10, 20], [30, 5], [5, 30]], dtype=float)
        x = np.repeat([0, 0, 1, 1, 2, 2], [10, 20, 30, 5, 5, 30])
        y = np.tile([0, 1], 3).repeat([10, 20, 30, 5, 5, 30])
        t = build_table(x=x, y=y)
        expected = np.outer(counts.sum(1), counts.sum(0)) / counts.sum()
        oracle = ((counts - expected) ** 2 / expected).sum()
        r = chi_square_test(t, "x", "y")
        assert r.statistic == pytest.approx(oracle, rel=1e-12)
        assert r.dof == 2

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scipy_on_two_by_two(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 2, 200)
        y = rng.integers(0, 2, 200)
        t = build_table(x=x, y=y)
        table = np.zeros((2, 2))
        np.add.at(table, (x, y), 1)
        oracle = stats.chi2_contingency(table, correction=False)
        r = chi_square_test(t, "x", "y")
        assert r.statistic == pytest.approx(oracle.statistic, rel=1e-10)
        assert r.p_value == pytest.approx(oracle.pvalue, rel=1e-10)

    def test_stratified_sums_over_z(self):
        rng = np.random.default_rng(4)
        z = rng.integers(0, 3, 600)
        x = rng.integers(0, 2, 600)
        y = (x + (rng.random(600) < 0.3)) % 2
        t = build_table(x=x, y=y, z=z)
        r = chi_square_test(t, "x", "y", ["z"])
        stat, dof = 0.0, 0
        for level in range(3):
            sub = np.zeros((2, 2))
            np.add.at(sub, (x[z == level], y[z == level]), 1)
            res = stats.chi2_contingency(sub, correction=False)
            stat += res.statistic
            dof += res.dof
        assert r.statistic == pytest.approx(stat, rel=1e-10)
        assert r.dof == dof

    def test_zero_margin_reduces_dof(self):
        from causalomics.tabular import (Categorical, DataTable, Family,
                                         VariableMeta)
        # cardinality 3 declared, but level 2 never occurs: table is 2x2
        metas = [VariableMeta("x", Categorical(3), Family.OTHER,
                              ("a", "b", "c")),
                 VariableMeta("y", Categorical(2), Family.OTHER, ("u", "v"))]
        rng = np.random.default_rng(0)
        t = DataTable(metas, [rng.integers(0, 2, 80), rng.integers(0, 2, 80)])
        r = chi_square_test(t, "x", "y")
        assert r.dof == 1

    def test_all_strata_degenerate(self):
        # x is a copy of z, so x is constant inside every stratum
        z = np.repeat([0, 1], 30)
        t = build_table(x=z.copy(), y=np.tile([0, 1], 30), z=z)
        r = chi_square_test(t, "x", "y", ["z"])
        assert r.p_value == 1.0
        assert r.dof == 0.0
        assert "degenerate" in r.flags
        assert r.independent

    def test_requires_categorical(self):
        t = build_table(x=np.repeat([0, 1], 10), y=np.arange(20.0))
        with pytest.raises(CITestError, match="categorical"):
            chi_square_test(t, "x", "y")

    def test_swap_symmetry_is_exact(self):
        rng = np.random.default_rng(9)
        t = build_table(x=rng.integers(0, 3, 150),
                        y=rng.integers(0, 2, 150),
                        z=rng.integers(0, 2, 150))
        a = chi_square_test(t, "x", "y", ["z"])
        b = chi_square_test(t, "y", "x", ["z"])
        assert a == b


class TestCgLrt:
    def test_all_continuous_equals_partial_correlation_statistic(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((3, 3))
        data = rng.multivariate_normal(np.zeros(3), a @ a.T + np.eye(3),
                                       size=500)
        t = build_table(x=data[:, 0], y=data[:, 1], z=data[:, 2])
        r = cg_lrt(t, "x", "y", ["z"])
        corr = np.corrcoef(data, rowvar=False)
        prec = np.linalg.inv(corr)
        rho = -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])
        assert r.statistic == pytest.approx(-500 * np.log(1 - rho ** 2),
                                            rel=1e-5)
        assert r.dof == 1

    def test_decisions_agree_with_fisher_z(self):
        rng = np.random.default_rng(77)
        agree = 0
        draws = 1000
        for _ in range(draws):
            a = rng.standard_normal((3, 3))
            data = rng.multivariate_normal(
                np.zeros(3), a @ a.T + 0.5 * np.eye(3), size=200)
            t = build_table(x=data[:, 0], y=data[:, 1], z=data[:, 2])
            mine = cg_lrt(t, "x", "y", ["z"]).independent
            oracle = fisher_z_p(data, 0, 1, [2]) > 0.05
            agree += mine == oracle
        assert agree >= 0.99 * draws

    def test_near_copy_rejects_hard(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(300)
        t = build_table(x=x, y=x + 1e-3 * rng.standard_normal(300))
        r = cg_lrt(t, "x", "y")
        assert r.p_value < 1e-10

    def test_mixed_null_calibration(self):
        rejections = 0
        trials = 2000
        for s in range(trials):
            rng = np.random.default_rng((101, s))
            t = build_table(d=rng.integers(0, 2, 2000),
                            x=rng.standard_normal(2000))
            rejections += not cg_lrt(t, "d", "x").independent
        assert 0.03 <= rejections / trials <= 0.07

    def test_three_sigma_shift_rejects(self):
        rng = np.random.default_rng(6)
        d = rng.integers(0, 2, 2000)
        x = rng.standard_normal(2000) + 3.0 * d
        t = build_table(d=d, x=x)
        assert cg_lrt(t, "d", "x").p_value < 1e-6

    def test_discrete_only_matches_chi_square_dof(self):
        rng = np.random.default_rng(3)
        t = build_table(x=rng.integers(0, 2, 500),
                        y=rng.integers(0, 3, 500),
                        z=rng.integers(0, 2, 500))
        r = cg_lrt(t, "x", "y", ["z"])
        # z * (card(x)-1) * (card(y)-1)
        assert r.dof == 2 * 1 * 2

    def test_insufficient_rows(self):
        t = build_table(x=np.array([0, 1, 2, 0, 1, 2, 0, 1]),
                        y=np.array([0, 1, 2, 1, 2, 0, 2, 0]))
        with pytest.raises(CITestError, match="insufficient rows"):
            cg_lrt(t, "x", "y")

    def test_constant_column_reports_variable(self):
        t = build_table(x=np.ones(50), y=np.arange(50.0))
        with pytest.raises(CITestError, match=r"singular.*\['x'\]"):
            cg_lrt(t, "x", "y")

    def test_swap_symmetry_is_exact(self):
        rng = np.random.default_rng(10)
        t = build_table(d=rng.integers(0, 2, 200),
                        x=rng.standard_normal(200),
                        y=rng.standard_normal(200))
        assert cg_lrt(t, "x", "d", ["y"]) == cg_lrt(t, "d", "x", ["y"])


class TestRcit:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(0)
        t = build_table(x=rng.standard_normal(200),
                        y=rng.standard_normal(200),
                        z=rng.standard_normal(200))
        a = rcit(t, "x", "y", ["z"])
        b = rcit(t, "x", "y", ["z"])
        assert a == b
        c = rcit(t, "x", "y", ["z"], params=RcitParams(seed=1))
        assert c.statistic != a.statistic

    def test_swap_symmetry_is_bit_identical(self):
        rng = np.random.default_rng(1)
        t = build_table(x=rng.standard_normal(300),
                        y=rng.standard_normal(300),
                        z=rng.standard_normal(300))
        a = rcit(t, "x", "y", ["z"])
        b = rcit(t, "y", "x", ["z"])
        assert a.statistic == b.statistic
        assert a.p_value == b.p_value

    def test_row_order_invariance(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal(200)
        y = rng.standard_normal(200)
        z = rng.standard_normal(200)
        perm = rng.permutation(200)
        a = rcit(build_table(x=x, y=y, z=z), "x", "y", ["z"])
        b = rcit(build_table(x=x[perm], y=y[perm], z=z[perm]),
                 "x", "y", ["z"])
        assert a.statistic == pytest.approx(b.statistic, rel=1e-9)

    def test_conditional_null_calibration(self):
        rejections = 0
        seeds = 500
        for s in range(seeds):
            rng = np.random.default_rng((55, s))
            t = build_table(x=rng.standard_normal(1000),
                            y=rng.standard_normal(1000),
                            z=rng.standard_normal(1000))
            rejections += not rcit(t, "x", "y", ["z"],
                                   params=RcitParams(seed=s)).independent
        assert 0.02 <= rejections / seeds <= 0.10

    def test_nonlinear_dependence_power(self):
        rejections = 0
        seeds = 25
        for s in range(seeds):
            rng = np.random.default_rng((56, s))
            x = rng.standard_normal(1000)
            y = x ** 2 + 0.25 * rng.standard_normal(1000)
            t = build_table(x=x, y=y)
            rejections += not rcit(t, "x", "y",
                                   params=RcitParams(seed=s)).independent
        assert rejections >= 23

    def test_common_cause_screened_off(self):
        rejections = 0
        seeds = 100
        for s in range(seeds):
            rng = np.random.default_rng((57, s))
            z = rng.standard_normal(1000)
            x = 1.5 * z + rng.standard_normal(1000)
            y = z ** 2 + rng.standard_normal(1000)
            t = build_table(x=x, y=y, z=z)
            rejections += not rcit(t, "x", "y", ["z"],
                                   params=RcitParams(seed=s)).independent
        assert rejections / seeds <= 0.15

    def test_direct_link_detected_given_noise_condition(self):
        for s in range(10):
            rng = np.random.default_rng((58, s))
            x = rng.standard_normal(1000)
            y = x + 0.3 * rng.standard_normal(1000)
            z = rng.standard_normal(1000)
            t = build_table(x=x, y=y, z=z)
            assert not rcit(t, "x", "y", ["z"],
                            params=RcitParams(seed=s)).independent

    def test_categorical_variables_are_encoded(self):
        rng = np.random.default_rng(21)
        d = rng.integers(0, 3, 400)
        x = rng.standard_normal(400) + 1.5 * d
        t = build_table(d=d, x=x)
        assert not rcit(t, "d", "x").independent

    def test_small_sample_rejected(self):
        t = build_table(x=np.arange(20.0), y=np.arange(20.0))
        with pytest.raises(CITestError, match="at least 50"):
            rcit(t, "x", "y")

    def test_zero_variance_rejected(self):
        t = build_table(x=np.ones(100), y=np.arange(100.0))
        with pytest.raises(CITestError, match="zero variance"):
            rcit(t, "x", "y")


class TestDsepOracle:
    def test_collider_and_chain(self):
        collider = MixedGraph.from_edges(
            "xzy", directed=[("x", "z"), ("y", "z")], kind="dag")
        assert dsep_oracle_test(collider, "x", "y").independent
        assert not dsep_oracle_test(collider, "x", "y", ["z"]).independent
        chain = MixedGraph.from_edges(
            "abc", directed=[("a", "b"), ("b", "c")], kind="dag")
        assert not dsep_oracle_test(chain, "a", "c").independent
        assert dsep_oracle_test(chain, "a", "c", ["b"]).independent

    def test_agrees_with_dsep_on_random_queries(self):
        rng = np.random.default_rng(33)
        names = [f"n{i}" for i in range(7)]
        queries = 0
        for g_seed in range(100):
            g = MixedGraph(names, kind="dag")
            order = rng.permutation(7)
            for i in range(7):
                for j in range(i + 1, 7):
                    if rng.random() < 0.3:
                        g.add_directed(names[order[i]], names[order[j]])
            oracle = DsepOracle(g)
            for _ in range(10):
                x, y = rng.choice(names, 2, replace=False)
                z = [n for n in names if n not in (x, y)
                     and rng.random() < 0.3]
                want = d_separated(g, x, y, z)
                assert oracle.test(x, y, z).independent == want
                queries += 1
        assert queries == 1000

    def test_rejects_non_dag(self):
        g = MixedGraph.from_edges("ab", undirected=[("a", "b")])
        with pytest.raises(Exception, match="DAG"):
            DsepOracle(g)


class TestCacheAndValidation:
    def test_cache_transparency_and_stats(self):
        rng = np.random.default_rng(2)
        t = build_table(x=rng.integers(0, 2, 100),
                        y=rng.integers(0, 2, 100))
        cached = ChiSquareTester(t)
        uncached = ChiSquareTester(t, cache=False)
        first = cached.test("x", "y")
        second = cached.test("y", "x")
        assert first == second
        assert first == uncached.test("x", "y")
        assert cached.cache_stats() == {"hits": 1, "misses": 1, "size": 1}
        assert uncached.cache_stats()["size"] == 0

    def test_concurrent_use(self):
        rng = np.random.default_rng(15)
        t = build_table(x=rng.integers(0, 2, 300),
                        y=rng.integers(0, 3, 300),
                        z=rng.integers(0, 2, 300))
        tester = CgLrtTester(t)
        pairs = [("x", "y", ()), ("x", "z", ()), ("y", "z", ()),
                 ("x", "y", ("z",)), ("x", "z", ("y",)), ("y", "z", ("x",))]
        with ThreadPoolExecutor(8) as pool:
            results = list(pool.map(
                lambda a: tester.test(*a), pairs * 20))
        for i, (x, y, z) in enumerate(pairs * 20):
            assert results[i] == tester.test(x, y, z)
        assert tester.cache_stats()["size"] == len(pairs)

    def test_alpha_validation(self):
        t = build_table(x=np.repeat([0, 1], 10), y=np.repeat([0, 1], 10))
        with pytest.raises(CITestError, match="alpha"):
            ChiSquareTester(t, alpha=1.5)

    def test_x_equals_y_rejected(self):
        t = build_table(x=np.repeat([0, 1], 10), y=np.repeat([0, 1], 10))
        with pytest.raises(CITestError, match="differ"):
            chi_square_test(t, "x", "x")

    def test_x_in_z_rejected(self):
        t = build_table(x=np.repeat([0, 1], 10), y=np.repeat([0, 1], 10),
                        z=np.repeat([0, 1], 10))
        with pytest.raises(CITestError, match="conditioning"):
            chi_square_test(t, "x", "y", ["x"])

    def test_unknown_variable(self):
        t = build_table(x=np.repeat([0, 1], 10), y=np.repeat([0, 1], 10))
        with pytest.raises(CITestError, match="unknown"):
            chi_square_test(t, "x", "w")

    def test_independent_flag_tracks_alpha(self):
        rng = np.random.default_rng(44)
        x = rng.integers(0, 2, 400)
        noisy = (x + (rng.random(400) < 0.42)) % 2
        t = build_table(x=x, y=noisy)
        r = chi_square_test(t, "x", "y")
        assert 0.0 < r.p_value < 1.0
        assert chi_square_test(t, "x", "y",
                               alpha=r.p_value / 2).independent
        assert not chi_square_test(
            t, "x", "y", alpha=(1 + r.p_value) / 2).independent


class TestMonotoneSampleBehavior:
    def test_median_p_shrinks_with_n(self):
        medians = []
        for n in (200, 1000, 5000):
            ps = []
            for s in range(100):
                rng = np.random.default_rng((71, s))
                x = rng.integers(0, 2, n)
                y = (x + (rng.random(n) < 0.45)) % 2
                ps.append(chi_square_test(build_table(x=x, y=y),
                                          "x", "y").p_value)
            medians.append(np.median(ps))
        assert medians[0] >= medians[1] >= medians[2]
