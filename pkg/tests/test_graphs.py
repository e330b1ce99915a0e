from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from branchkit.convergence import loglog_schedule, trend_ok
from branchkit.graphs import (
    DegreeSequence,
    Multigraph,
    balanced_bidegree,
    bfs_exploration,
    config_model,
    d1_integer,
    exploration_coupling_experiment,
    gw_coupling_experiment,
    pagerank,
    rank_vs_wbt,
    size_biased,
    size_biased_limits,
    sizebias_rate_experiment,
)
from branchkit.measures import DiscreteMeasure


class TestDegreeSequence:
    def test_parity_enforced(self):
        with pytest.raises(ValueError, match="even"):
            DegreeSequence(degrees=np.array([1, 2]))

    def test_balance_enforced(self):
        with pytest.raises(ValueError, match="in-degree"):
            DegreeSequence(in_degrees=np.array([1, 1]), out_degrees=np.array([1, 2]))

    def test_text_round_trip(self):
        ds = DegreeSequence(degrees=np.array([3, 1, 2, 2]))
        again = DegreeSequence.from_lines(ds.to_lines())
        assert np.array_equal(ds.degrees, again.degrees)
        bi = DegreeSequence(in_degrees=np.array([1, 2]), out_degrees=np.array([2, 1]))
        again = DegreeSequence.from_lines(bi.to_lines())
        assert np.array_equal(bi.in_degrees, again.in_degrees)


class TestConfigModel:
    def test_degrees_preserved(self):
        ds = DegreeSequence(degrees=np.array([3, 2, 2, 1, 4, 2]))
        for seed in range(5):
            assert config_model(ds, seed=seed).degree_check(ds)

    def test_directed_degrees_preserved(self):
        ds = balanced_bidegree(
            DiscreteMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.5])),
            DiscreteMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.5])),
            100,
            seed=3,
        )
        assert config_model(ds, seed=1).degree_check(ds)

    def test_single_edge_forced(self):
        g = config_model(DegreeSequence(degrees=np.array([1, 1])), seed=0)
        assert sorted(g.edges[0].tolist()) == [0, 1]

    def test_self_loop_forced(self):
        g = config_model(DegreeSequence(degrees=np.array([2])), seed=0)
        assert g.edges[0].tolist() == [0, 0]

    def test_uniform_over_matchings(self):
        # degrees (1,1,1,1): three perfect matchings, each with frequency 1/3
        ds = DegreeSequence(degrees=np.array([1, 1, 1, 1]))
        counts = Counter()
        reps = 6000
        for seed in range(reps):
            g = config_model(ds, seed=seed)
            counts[tuple(sorted(tuple(sorted(e)) for e in g.edges.tolist()))] += 1
        assert len(counts) == 3
        _, p_value = chisquare(list(counts.values()))
        assert p_value > 1e-4

    def test_simple_mode(self):
        ds = DegreeSequence(degrees=np.array([2, 2, 2]))
        g = config_model(ds, seed=2, simple=True)
        assert g.is_simple() and g.degree_check(ds)


class TestBFS:
    def test_isolated_node(self):
        g = Multigraph(1, np.zeros((0, 2), dtype=np.int64), False)
        assert bfs_exploration(g, 0, 3).sizes == (1, 0)

    def test_path_graph(self):
        g = Multigraph(3, np.array([[0, 1], [1, 2]]), False)
        assert bfs_exploration(g, 0, 2).sizes == (1, 1, 1)

    def test_star_from_hub(self):
        k = 5
        g = Multigraph(k + 1, np.array([[0, i] for i in range(1, k + 1)]), False)
        assert bfs_exploration(g, 0, 2).sizes == (1, k, 0)

    def test_depletion_flagged_on_cycle(self):
        g = Multigraph(3, np.array([[0, 1], [1, 2], [2, 0]]), False)
        trace = bfs_exploration(g, 0, 3)
        assert any(trace.depleted)


class TestSizeBiased:
    def test_example_1_2_3(self):
        sb = size_biased(DegreeSequence(degrees=np.array([1, 2, 3])))
        assert sb.nu_star.atoms.tolist() == [1.0, 2.0, 3.0]
        assert np.allclose(sb.nu_star.masses, 1 / 3)
        assert sb.nu.atoms.tolist() == [0.0, 1.0, 2.0]
        assert sb.nu_fractions == ((0, Fraction(1, 6)), (1, Fraction(1, 3)), (2, Fraction(1, 2)))

    def test_regular_degrees(self):
        sb = size_biased(DegreeSequence(degrees=np.array([4, 4, 4, 4])))
        assert sb.nu.atoms.tolist() == [3.0]
        assert sb.nu.masses.tolist() == [1.0]

    def test_single_node(self):
        sb = size_biased(DegreeSequence(degrees=np.array([2])))
        assert sb.nu_star.atoms.tolist() == [2.0]
        assert sb.nu.atoms.tolist() == [1.0]

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError, match="undefined"):
            size_biased(DegreeSequence(degrees=np.array([0, 0])))

    def test_exact_mass_sums(self):
        rng = np.random.default_rng(5)
        degrees = rng.integers(1, 9, size=200)
        degrees[0] += degrees.sum() % 2
        sb = size_biased(DegreeSequence(degrees=degrees))
        assert sum(f for _, f in sb.nu_fractions) == 1
        assert sum(f for _, f in sb.nu_star_fractions) == 1


class TestSizebiasExperiment:
    def test_constant_degree_all_zero(self):
        f = DiscreteMeasure.point(3.0)
        out = sizebias_rate_experiment(f, 1.0, [50, 100], 0.4, 0.3, reps=3, seed=1)
        assert max(out.medians["nu_star"]) == 0.0
        assert max(out.medians["nu"]) == 0.0

    def test_two_point_reduction(self):
        # support {1, 2}: d1(nu_n*, nu*) collapses to |p_hat - p|
        p = 0.4
        f = DiscreteMeasure(np.array([1.0, 2.0]), np.array([1 - p, p]))
        nu_star_lim, _ = size_biased_limits(f)
        rng = np.random.default_rng(7)
        n = 500
        degrees = f.sample_np(rng.random(n)).astype(np.int64)
        degrees[0] += degrees.sum() % 2
        sb = size_biased(DegreeSequence(degrees=degrees))
        p_hat = (degrees == 2).mean()
        assert d1_integer(sb.nu_star, nu_star_lim) == pytest.approx(abs(p_hat - p), abs=1e-12)

    def test_exponent_validation(self):
        f = DiscreteMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            sizebias_rate_experiment(f, 1.0, [10], 0.6, 0.3, reps=1)
        with pytest.raises(ValueError):
            sizebias_rate_experiment(f, 1.0, [10], 0.4, 0.34, reps=1)

    def test_geometric_trend(self):
        from branchkit.distributions import Geometric

        f = DiscreteMeasure(*Geometric(0.5, start=1).as_table())
        out = sizebias_rate_experiment(f, 2.0, [100, 1000, 10000], 0.4, 0.4, reps=12, seed=9)
        assert out.medians["nu_star"][-1] < out.medians["nu_star"][0]
        assert out.medians["nu"][-1] < out.medians["nu"][0]


class TestGWCoupling:
    def test_degenerate_law_zero_gaps(self):
        f = DiscreteMeasure.point(2.0)
        out = gw_coupling_experiment(f, [50, 100], loglog_schedule(), reps=3, seed=2)
        assert max(out.medians["norm"]) == 0.0
        assert max(out.medians["raw"]) == 0.0

    def test_level1_identity(self):
        f = DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.full(3, 1 / 3))
        out = gw_coupling_experiment(f, [200, 2000], loglog_schedule(), reps=3, seed=4)
        gaps = {r.n: (r.value, r.se) for r in out.rows if r.statistic == "level1_gap"}
        d1s = {r.n: r.value for r in out.rows if r.statistic == "level1_d1"}
        for n in (200, 2000):
            mean, se = gaps[n]
            assert abs(mean - d1s[n]) <= 3 * se

    def test_maxima_trend(self):
        f = DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.full(3, 1 / 3))
        out = gw_coupling_experiment(
            f, [100, 1000, 10000], loglog_schedule(), reps=20, seed=6
        )
        assert trend_ok(out.medians["norm"])


class TestExplorationCoupling:
    def test_bounded_degree_high_fidelity(self):
        f = DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.full(3, 1 / 3))
        out = exploration_coupling_experiment(f, 10_000, 2, reps=60, seed=8)
        fractions = {r.statistic: r.value for r in out.rows if "fraction" in r.statistic}
        assert fractions["equal_fraction_within_threshold"] >= 0.95

    def test_small_graph_departs(self):
        # tiny graphs collide constantly; fidelity must be visibly below 1
        f = DiscreteMeasure(np.array([2.0, 3.0]), np.array([0.5, 0.5]))
        out = exploration_coupling_experiment(f, 10, 2, reps=200, seed=10)
        fractions = {r.statistic: r.value for r in out.rows if r.statistic == "equal_fraction"}
        assert fractions["equal_fraction"] < 0.9


class TestPageRank:
    def test_single_dangling_node(self):
        g = Multigraph(1, np.zeros((0, 2), dtype=np.int64), True)
        r = pagerank(g, 0.3)
        # affine recursion with self-dangling: r = c r + (1-c) -> r = 1
        assert r[0] == pytest.approx(1.0, abs=1e-10)

    def test_two_cycle_symmetric(self):
        g = Multigraph(2, np.array([[0, 1], [1, 0]]), True)
        r = pagerank(g, 0.5)
        assert r[0] == pytest.approx(r[1], abs=1e-12)

    def test_fixed_point_equation(self):
        rng = np.random.default_rng(11)
        ds = balanced_bidegree(
            DiscreteMeasure(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.1, 0.4, 0.3, 0.2])),
            DiscreteMeasure(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.2, 0.3, 0.3, 0.2])),
            150,
            seed=12,
        )
        g = config_model(ds, seed=13)
        c = 0.6
        r = pagerank(g, c, tol=1e-13)
        n = g.n
        out_deg = np.bincount(g.edges[:, 0], minlength=n)
        contrib = np.full(n, 1 - c)
        for u, v in g.edges:
            contrib[v] += c * r[u] / out_deg[u]
        contrib += c * r[out_deg == 0].sum() / n
        assert np.abs(contrib - r).sum() <= 1e-9

    def test_damping_validated(self):
        g = Multigraph(1, np.zeros((0, 2), dtype=np.int64), True)
        with pytest.raises(ValueError):
            pagerank(g, 1.5)


class TestRankVsWBT:
    def test_single_self_loop(self):
        # both sides are degenerate; they differ only by the c^(k+1) tail
        ds = DegreeSequence(in_degrees=np.array([1]), out_degrees=np.array([1]))
        out = rank_vs_wbt(ds, 0.5, 40, 100, seed=14)
        stats = {r.statistic: r.value for r in out.rows}
        assert stats["baseline"] == 0.0
        assert stats["d1"] <= 1e-9

    def test_regular_closed_form(self):
        d = 2
        c = 0.5
        k = 10
        ds = DegreeSequence(in_degrees=np.full(40, d), out_degrees=np.full(40, d))
        out = rank_vs_wbt(ds, c, k, 400, seed=15)
        stats = {r.statistic: r.value for r in out.rows}
        # graph ranks are exactly 1; the truncated tree value is 1 - c^(k+1)
        assert stats["rank_mean"] == pytest.approx(1.0, abs=1e-9)
        assert stats["d1"] == pytest.approx(c ** (k + 1), abs=1e-9)

    def test_heterogeneous_close_to_baseline(self):
        ds = balanced_bidegree(
            DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.array([0.3, 0.4, 0.3])),
            DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.array([0.3, 0.4, 0.3])),
            3000,
            seed=16,
        )
        out = rank_vs_wbt(ds, 0.4, 8, 3000, seed=17)
        stats = {r.statistic: r.value for r in out.rows}
        assert stats["d1"] <= 3 * stats["baseline"] + 0.01

    def test_heavy_tailed_in_degrees(self):
        # skewed in-degree mass, n = 1e4, k = 10: the tree construction
        # must sit within Monte Carlo resolution of the graph ranks
        from branchkit.distributions import Geometric

        in_law = DiscreteMeasure(*Geometric(0.45, start=1).as_table())
        out_law = DiscreteMeasure(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.2, 0.3, 0.3, 0.2]))
        ds = balanced_bidegree(in_law, out_law, 10_000, seed=18)
        out = rank_vs_wbt(ds, 0.3, 10, 3000, seed=19)
        stats = {r.statistic: r.value for r in out.rows}
        assert stats["d1"] <= 3 * stats["baseline"]
