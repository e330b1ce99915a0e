import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchkit.branching import wbp_sampler, wbt_table_sampler
from branchkit.convergence import (
    SamplerSequence,
    constant_schedule,
    fixed_level_convergence,
    fixed_point_selfcheck,
    lemma_condition_check,
    linear_schedule,
    log_schedule,
    loglog_schedule,
    power_bounds,
    r_limit_convergence,
    scaled_martingale_convergence,
    schedule_premise,
    trend_ok,
)
from branchkit.coupling import coupling_constants, process_gap_bound, quantile_coupled
from branchkit.errors import ContractionError


def det_shift_family(base=0.3, magnitude=0.1):
    return SamplerSequence(
        name="det_shift",
        mode="wbp",
        sampler_for=lambda n: wbp_sampler(q=1.0, n=2, weights=base + magnitude / n),
        limit=wbp_sampler(q=1.0, n=2, weights=base),
    )


class TestPowerBounds:
    def test_x_equals_one(self):
        for j in (1, 5, 50):
            assert power_bounds(1.0, j) == (1.0, 1.0, 0.0, 0.0)

    def test_spec_values(self):
        lhs1, rhs1, lhs2, rhs2 = power_bounds(1.1, 3)
        assert lhs1 == pytest.approx(1.331)
        assert rhs1 == pytest.approx(math.exp(0.3))
        assert lhs1 <= rhs1
        lhs1, rhs1, lhs2, rhs2 = power_bounds(0.5, 4)
        assert lhs2 == pytest.approx(0.9375)
        assert rhs2 == pytest.approx(2.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            power_bounds(0.0, 1)
        with pytest.raises(ValueError):
            power_bounds(1.0, 0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=1e-6, max_value=10.0), st.integers(min_value=1, max_value=50))
    def test_inequalities_hold(self, x, j):
        lhs1, rhs1, lhs2, rhs2 = power_bounds(x, j)
        assert lhs1 <= rhs1 * (1 + 1e-12)
        assert lhs2 <= rhs2 * (1 + 1e-12) + 1e-300


class TestSchedules:
    def test_monotonicity_check(self):
        loglog_schedule().check_monotone([10, 100, 1000])
        with pytest.raises(ValueError):
            constant_schedule(0)(10)

    def test_premise_flags_linear(self):
        seq = det_shift_family()
        _, ok_log = schedule_premise(seq, log_schedule(), [10, 100, 1000])
        _, ok_lin = schedule_premise(seq, linear_schedule(), [10, 100, 1000])
        assert ok_log and not ok_lin


class TestTrend:
    def test_halving_and_baseline(self):
        assert trend_ok([1.0, 0.6, 0.4], baselines=[0.2, 0.2, 0.2])
        assert not trend_ok([1.0, 0.9, 0.8])
        assert not trend_ok([1.0, 0.1, 0.4], baselines=[0.01, 0.01, 0.01])
        assert trend_ok([0.0, 0.0, 0.0], baselines=[0.0, 0.0, 0.0])


class TestFixedLevel:
    def test_exact_deterministic_curve(self):
        out = fixed_level_convergence(det_shift_family(), 1, [1, 2, 5, 10], 64, seed=3)
        for n, med in zip([1, 2, 5, 10], out.medians["d1"]):
            assert med == pytest.approx(0.2 / n, abs=1e-12)

    def test_point_mass_shift_level_zero(self):
        seq = SamplerSequence(
            name="qshift",
            mode="wbp",
            sampler_for=lambda n: wbp_sampler(q=1.0 + 1.0 / n, n=0, weights=0.5),
            limit=wbp_sampler(q=1.0, n=0, weights=0.5),
        )
        out = fixed_level_convergence(seq, 0, [1, 4, 16], 32, seed=5)
        for n, med in zip([1, 4, 16], out.medians["d1"]):
            assert med == pytest.approx(1.0 / n, abs=1e-12)

    def test_constant_sequence_sits_at_baseline(self):
        base = wbp_sampler(q=1.0, n={"discrete": {"atoms": [0, 1, 2], "probs": [0.25, 0.5, 0.25]}},
                           weights={"uniform": [0.2, 0.8]})
        seq = SamplerSequence(name="const", mode="wbp", sampler_for=lambda n: base, limit=base)
        out = fixed_level_convergence(seq, 2, [100, 1000], 2000, reps=5, seed=7)
        for d1_med, base_med in zip(out.medians["d1"], out.medians["baseline"]):
            assert d1_med <= 3 * base_med

    def test_gap_bounded_by_process_bound(self):
        # E[|W(n,j) - W(j)|] dominates d1, so the certified bound applies
        seq = det_shift_family()
        j = 3
        out = fixed_level_convergence(seq, j, [2, 4], 64, seed=9)
        for n, med in zip([2, 4], out.medians["d1"]):
            cc = coupling_constants(quantile_coupled(seq.limit, seq.sampler_for(n)))
            assert med <= process_gap_bound(cc, j) + 1e-12


class TestScaledMartingale:
    def binom2(self, p):
        return {"discrete": {"atoms": [0, 1, 2], "probs": [(1 - p) ** 2, 2 * p * (1 - p), p * p]}}

    def test_deterministic_family_fixed_at_one(self):
        seq = SamplerSequence(
            name="det", mode="wbp",
            sampler_for=lambda n: wbp_sampler(q=1.0, n=2, weights=0.5),
            limit=wbp_sampler(q=1.0, n=2, weights=0.5),
            mean_w_one=True,
        )
        out = scaled_martingale_convergence(
            seq, log_schedule(), [10, 100], 256, seed=11, limit_depth=10
        )
        assert max(out.medians["ks_rho_n"]) <= 1e-12

    def test_ks_trend_decreases(self):
        seq = SamplerSequence(
            name="gw", mode="wbp",
            sampler_for=lambda n: wbp_sampler(q=1.0, n=self.binom2(0.5 + 0.25 / math.sqrt(n)), weights=1.0),
            limit=wbp_sampler(q=1.0, n=self.binom2(0.5), weights=1.0),
        )
        out = scaled_martingale_convergence(
            seq, log_schedule(), [10, 100, 1000, 10000], 3000, reps=5, seed=13, limit_depth=12
        )
        assert trend_ok(out.medians["ks_rho_n"], baselines=None)
        assert not out.warnings

    def test_negative_control_warns(self):
        seq = det_shift_family(base=1.0, magnitude=1.0)
        out = scaled_martingale_convergence(
            seq, linear_schedule(0.1), [10, 100], 64, seed=15, limit_depth=6
        )
        assert out.warnings

    def test_requires_unit_marks(self):
        seq = SamplerSequence(
            name="bad", mode="wbp",
            sampler_for=lambda n: wbp_sampler(q=2.0, n=2, weights=0.5),
            limit=wbp_sampler(q=2.0, n=2, weights=0.5),
        )
        with pytest.raises(ValueError, match="marks"):
            scaled_martingale_convergence(seq, log_schedule(), [10], 16, seed=17)

    def test_normalization_gap_obeys_power_bound(self):
        seq = det_shift_family(base=0.4, magnitude=0.2)
        for n in (2, 10):
            s_n = seq.sampler_for(n)
            j = 4
            x = seq.limit.rho / s_n.rho
            _, _, lhs2, rhs2 = power_bounds(x, j)
            # per-sample normalized gap scales with |x^j - 1|
            assert lhs2 <= rhs2 + 1e-12


class TestRLimit:
    def test_requires_contraction(self):
        seq = det_shift_family(base=0.6)
        with pytest.raises(ContractionError):
            r_limit_convergence(seq, constant_schedule(5), 1e-3, [10], 32, seed=19)

    def test_deterministic_family_converges(self):
        seq = det_shift_family(base=0.25, magnitude=0.05)
        out = r_limit_convergence(seq, constant_schedule(12), 1e-3, [2, 8, 32], 500, seed=21, reps=3)
        assert trend_ok(out.medians["d1"])
        means = {r.n: r.value for r in out.rows if r.statistic == "mean_r"}
        for n in (2, 8, 32):
            assert means[n] == pytest.approx(1.0 / (0.5 - 0.1 / n), rel=0.02)

    def test_constant_sequence_at_baseline_plus_slack(self):
        base = wbp_sampler(q=1.0, n=2, weights={"uniform": [0.0, 0.4]})
        seq = SamplerSequence(name="const", mode="wbp", sampler_for=lambda n: base, limit=base)
        out = r_limit_convergence(seq, constant_schedule(8), 1e-2, [10, 100], 500, reps=5, seed=22)
        slacks = {r.n: r.value for r in out.rows if r.statistic == "tail_slack"}
        for d1_med, base_med, n in zip(out.medians["d1"], out.medians["baseline"], [10, 100]):
            assert d1_med <= 3 * base_med + slacks[n] + 1e-2

    def test_tail_slack_reported(self):
        seq = det_shift_family(base=0.25, magnitude=0.05)
        out = r_limit_convergence(seq, constant_schedule(10), 1e-3, [4], 64, seed=23)
        slacks = [r for r in out.rows if r.statistic == "tail_slack"]
        assert slacks and slacks[0].value == pytest.approx(
            (0.5 + 0.1 / 4) ** 11 / (1 - 0.5 - 0.1 / 4), rel=1e-9
        )


class TestLemma:
    BASE = [(1, 0, 0.5), (1, 2, 0.3), (2, 1, 0.4)]

    def scaled_family(self):
        def sampler_for(n):
            return wbt_table_sampler(
                [(q, k, c * (1 + 1 / n)) for q, k, c in self.BASE], [0.3, 0.4, 0.3]
            )

        return SamplerSequence(
            name="scale", mode="wbt", sampler_for=sampler_for,
            limit=wbt_table_sampler(self.BASE, [0.3, 0.4, 0.3]),
        )

    def test_constant_sequence_all_zero(self):
        limit = wbt_table_sampler(self.BASE, [0.3, 0.4, 0.3])
        seq = SamplerSequence(name="const", mode="wbt", sampler_for=lambda n: limit, limit=limit)
        out = lemma_condition_check(seq, [2, 4, 8])
        assert max(out.medians["d1_mu"]) <= 1e-12

    def test_scaling_family_matches_closed_form(self):
        seq = self.scaled_family()
        out = lemma_condition_check(seq, [2, 4, 8, 16])
        bound = seq.limit.abs_mean_cq + seq.limit.rho
        for n, d1_mu in zip([2, 4, 8, 16], out.medians["d1_mu"]):
            assert d1_mu == pytest.approx(bound / n, abs=1e-9)
        assert out.meta["hypotheses_converge"] and out.meta["conclusion_converges"]

    def test_escaping_mass_counterexample(self):
        # vanishing-probability atoms with N = C = n: d1(nu_n, nu) -> 0 but
        # E[|C|N] stays off-limit, and d1(mu_n, mu) must not vanish
        limit = wbt_table_sampler([(1.0, 1, 0.5)], [1.0])

        def sampler_for(n):
            return wbt_table_sampler(
                [(1.0, 1, 0.5), (1.0, n, float(n))], [1 - 1 / n**2, 1 / n**2]
            )

        seq = SamplerSequence(name="escape", mode="wbt", sampler_for=sampler_for, limit=limit)
        out = lemma_condition_check(seq, [4, 8, 16, 32])
        assert out.medians["d1_nu"][-1] < 0.5 * out.medians["d1_nu"][0]
        assert not out.meta["conclusion_converges"]
        assert min(out.medians["d1_mu"]) > 0.5  # stuck near the escaping mass


class TestSelfCheck:
    def test_passes_for_contraction_family(self):
        s = wbp_sampler(q=1.0, n=2, weights={"uniform": [0.0, 0.4]})
        result = fixed_point_selfcheck(s, 1e-3, 4000, seed=25)
        assert result["passed"]

    def test_rejects_tree_form(self):
        s = wbt_table_sampler([(1, 1, 0.4)], [1.0])
        with pytest.raises(ValueError):
            fixed_point_selfcheck(s, 1e-3, 100, seed=27)
