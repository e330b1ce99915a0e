"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` (a few minutes; the
compiled kernel speeds up the Monte Carlo criteria substantially) or
standalone via `python tests/test_acceptance.py`.

Every Monte Carlo criterion runs at its stated budget and tolerance under a
pinned seed; pinned seeds are part of the reproducibility contract, and the
trend criteria were checked to hold in expectation across seeds.
"""

import math
import time

import numpy as np
import pytest

from branchkit.branching import (
    endogenous_r_batch,
    w_batch,
    wbp_sampler,
    wbt_sampler,
    wbt_table_sampler,
    root_sampler,
)
from branchkit.cli import main as cli_main
from branchkit.config import ExperimentConfig, validate_experiment
from branchkit.convergence import (
    SamplerSequence,
    constant_schedule,
    fixed_level_convergence,
    fixed_point_selfcheck,
    log_schedule,
    loglog_schedule,
    r_limit_convergence,
    scaled_martingale_convergence,
    trend_ok,
)
from branchkit.coupling import (
    certify,
    independent_coupled,
    pair_table_coupled,
    quantile_coupled,
)
from branchkit.distributions import Geometric
from branchkit.graphs import gw_coupling_experiment, sizebias_rate_experiment
from branchkit.measures import (
    DiscreteMeasure,
    EmpiricalMeasure,
    d1_empirical_1d,
    d1_empirical_l1,
)

from conftest import brute_force_matching_cost


def _report(criterion, detail):
    print(f"[PASS] criterion {criterion}: {detail}")


def test_criterion_1_exact_certification():
    """Deterministic pair bound check, exact to 1e-12, under one second."""
    t0 = time.perf_counter()
    a = wbp_sampler(q=1.0, n=2, weights=0.3)
    b = wbp_sampler(q=1.0, n=2, weights=0.4)
    report = certify(quantile_coupled(a, b), 10, 4, seed=1)
    assert report.constants.e == pytest.approx(0.2, abs=1e-12)
    for row in report.rows:
        if row.j == 0:
            continue
        expected_gap = 0.8**row.j - 0.6**row.j
        expected_bound = (
            0.8**row.j + sum(0.6**t * 0.8 ** (row.j - 1 - t) for t in range(row.j))
        ) * 0.2
        assert row.gap == pytest.approx(expected_gap, abs=1e-12)
        assert row.bound == pytest.approx(expected_bound, abs=1e-12)
        assert row.gap <= row.bound + 1e-12
        assert row.gap_se == 0.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _report(1, f"exact gaps/bounds equal to 1e-12 for j=1..10 in {elapsed:.2f}s")


# the certification families: five process-form, three tree-form, including
# supercritical hatted sides in both forms
WBP_FAMILIES = {
    "binary_discrete_weights": quantile_coupled(
        wbp_sampler(q=1.0, n={"discrete": {"atoms": [0, 1, 2], "probs": [0.25, 0.5, 0.25]}},
                    weights={"discrete": {"atoms": [0.2, 0.6], "probs": [0.5, 0.5]}}),
        wbp_sampler(q=1.0, n={"discrete": {"atoms": [0, 1, 2], "probs": [0.25, 0.5, 0.25]}},
                    weights={"discrete": {"atoms": [0.3, 0.7], "probs": [0.5, 0.5]}}),
    ),
    "supercritical_uniform": quantile_coupled(
        wbp_sampler(q=1.0, n={"discrete": {"atoms": [1, 2, 3], "probs": [0.3, 0.4, 0.3]}},
                    weights={"uniform": [0.3, 0.8]}),
        wbp_sampler(q=1.0, n={"discrete": {"atoms": [1, 2, 3], "probs": [0.3, 0.4, 0.3]}},
                    weights={"uniform": [0.35, 0.85]}),
    ),
    "mark_shift_geometric": quantile_coupled(
        wbp_sampler(q={"uniform": [0.0, 2.0]}, n={"geometric": {"p": 0.6}}, weights=0.5),
        wbp_sampler(q={"uniform": [0.1, 2.1]}, n={"geometric": {"p": 0.6}}, weights=0.5),
    ),
    "independent_same_law": independent_coupled(
        wbp_sampler(q={"discrete": {"atoms": [0.0, 2.0], "probs": [0.5, 0.5]}},
                    n={"discrete": {"atoms": [0, 1, 2], "probs": [0.3, 0.4, 0.3]}},
                    weights={"discrete": {"atoms": [0.25, 0.5], "probs": [0.5, 0.5]}}),
        wbp_sampler(q={"discrete": {"atoms": [0.0, 2.0], "probs": [0.5, 0.5]}},
                    n={"discrete": {"atoms": [0, 1, 2], "probs": [0.3, 0.4, 0.3]}},
                    weights={"discrete": {"atoms": [0.25, 0.5], "probs": [0.5, 0.5]}}),
    ),
    "poisson_offspring_shift": quantile_coupled(
        wbp_sampler(q={"discrete": {"atoms": [0.0, 2.0], "probs": [0.5, 0.5]}},
                    n={"poisson": 1.0}, weights=0.5),
        wbp_sampler(q={"discrete": {"atoms": [0.0, 2.0], "probs": [0.5, 0.5]}},
                    n={"poisson": 1.3}, weights=0.5),
    ),
}

WBT_FAMILIES = {
    "prims_shifted": quantile_coupled(
        wbt_sampler(q={"discrete": {"atoms": [1.0, 2.0], "probs": [0.5, 0.5]}},
                    n={"discrete": {"atoms": [0, 1, 2], "probs": [0.5, 0.25, 0.25]}},
                    c={"discrete": {"atoms": [0.4, 0.8], "probs": [0.5, 0.5]}}),
        wbt_sampler(q={"discrete": {"atoms": [1.1, 2.1], "probs": [0.5, 0.5]}},
                    n={"discrete": {"atoms": [0, 1, 2], "probs": [0.5, 0.25, 0.25]}},
                    c={"discrete": {"atoms": [0.45, 0.85], "probs": [0.5, 0.5]}}),
    ),
    "pair_table_supercritical": pair_table_coupled(
        "wbt",
        [0.5, 0.5],
        [(1.0, 3, 0.40), (2.0, 1, 0.30)],
        [(1.0, 3, 0.45), (2.0, 2, 0.35)],  # rho_hat = 1.025 > 1
    ),
    "delayed_roots_dependent": independent_coupled(
        wbt_table_sampler([(1, 0, 0.9), (1, 2, 0.2), (2, 1, 0.5)], [1 / 3, 1 / 3, 1 / 3]),
        wbt_table_sampler([(1, 0, 0.8), (1, 2, 0.3), (2, 1, 0.6)], [0.3, 0.4, 0.3]),
        root_a=root_sampler(q=1.0, n={"discrete": {"atoms": [1, 2], "probs": [0.5, 0.5]}}),
        root_b=root_sampler(q=1.5, n={"discrete": {"atoms": [1, 3], "probs": [0.5, 0.5]}}),
    ),
}


def test_criterion_2_mc_certification():
    """Monte Carlo bound certification at 1e5 replications per family."""
    t0 = time.perf_counter()
    n_reps = 100_000
    supercritical_seen = False
    for i, (label, cs) in enumerate({**WBP_FAMILIES, **WBT_FAMILIES}.items()):
        report = certify(cs, 6, n_reps, seed=1000 + i)
        assert report.passed, f"{label} violated a bound:\n{report}"
        if report.constants.rho_hat > 1.0:
            supercritical_seen = True
        if cs.mode == "wbt":
            for row in report.rows[1:]:
                assert row.bound == pytest.approx(
                    max(row.bound_statement, row.bound_proof)
                )
    assert supercritical_seen
    elapsed = time.perf_counter() - t0
    _report(
        2,
        f"{len(WBP_FAMILIES)} process + {len(WBT_FAMILIES)} tree families certified "
        f"at {n_reps} replications, j=0..6, in {elapsed:.0f}s",
    )


def test_criterion_3_d1_oracle_equivalence():
    """Quantile = assignment = permutation minimum on random small clouds."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        x = rng.normal(scale=4.0, size=n)
        y = rng.normal(scale=4.0, size=n)
        ex, ey = EmpiricalMeasure(x), EmpiricalMeasure(y)
        sorted_value = d1_empirical_1d(ex, ey)
        assigned = d1_empirical_l1(ex, ey)
        brute = brute_force_matching_cost(x, y)
        assert abs(sorted_value - assigned) <= 1e-9
        assert abs(assigned - brute) <= 1e-9
    for _ in range(200):
        n = int(rng.integers(1, 7))
        x = rng.normal(scale=4.0, size=(n, 3))
        y = rng.normal(scale=4.0, size=(n, 3))
        assigned = d1_empirical_l1(EmpiricalMeasure(x), EmpiricalMeasure(y))
        brute = brute_force_matching_cost(x, y)
        assert abs(assigned - brute) <= 1e-9
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _report(3, f"1000 1-D + 200 3-D clouds agree to 1e-9 in {elapsed:.1f}s")


def test_criterion_4_martingale_and_fixed_point():
    """Martingale mean, fixed-point mean, and distributional self-consistency."""
    t0 = time.perf_counter()
    n = 100_000
    gw = wbp_sampler(q=1.0, n={"poisson": 1.5}, weights={"uniform": [0.0, 1.0]})
    h = w_batch(gw, 6, n, seed=41, homogeneous=True)
    rho = gw.rho
    for j in range(1, 7):
        norm = h[:, j] / rho**j
        se = norm.std(ddof=1) / math.sqrt(n)
        assert abs(norm.mean() - 1.0) <= 3 * se, f"martingale mean off at level {j}"

    family = wbp_sampler(q=1.0, n=2, weights={"uniform": [0.0, 0.4]})
    values, k, tail = endogenous_r_batch(family, 1e-4, n, seed=42)
    se = values.std(ddof=1) / math.sqrt(n)
    assert abs(values.mean() - 5 / 3) <= 3 * se + tail

    check = fixed_point_selfcheck(family, 1e-4, 10_000, seed=43)
    assert check["passed"], check
    elapsed = time.perf_counter() - t0
    _report(
        4,
        f"martingale mean 1 (j<=6), E[R]={values.mean():.5f}~5/3, "
        f"self-consistency d1={check['d1']:.4f} <= 3x{check['baseline']:.4f}, {elapsed:.0f}s",
    )


def test_criterion_5_convergence_curves():
    """Exact curves to 1e-9; MC curves pass the trend test; bad schedules flagged."""
    t0 = time.perf_counter()
    # exact family: closed form 0.2/n at level 1
    det = SamplerSequence(
        name="det", mode="wbp",
        sampler_for=lambda n: wbp_sampler(q=1.0, n=2, weights=0.3 + 0.1 / n),
        limit=wbp_sampler(q=1.0, n=2, weights=0.3),
    )
    out = fixed_level_convergence(det, 1, [1, 2, 5, 10], 64, seed=51)
    for n, med in zip([1, 2, 5, 10], out.medians["d1"]):
        assert abs(med - 0.2 / n) <= 1e-9

    # MC fixed level
    mc = SamplerSequence(
        name="mc", mode="wbp",
        sampler_for=lambda n: wbp_sampler(
            q=1.0, n={"discrete": {"atoms": [0, 1, 2], "probs": [0.25, 0.5, 0.25]}},
            weights={"uniform": [0.0, 0.4 + 0.8 / n]},
        ),
        limit=wbp_sampler(
            q=1.0, n={"discrete": {"atoms": [0, 1, 2], "probs": [0.25, 0.5, 0.25]}},
            weights={"uniform": [0.0, 0.4]},
        ),
    )
    out = fixed_level_convergence(mc, 2, [2, 20, 200, 2000], 10_000, reps=20, seed=52)
    assert trend_ok(out.medians["d1"], out.medians["baseline"])

    # MC scaled martingale
    def binom2(p):
        return {"discrete": {"atoms": [0, 1, 2], "probs": [(1 - p) ** 2, 2 * p * (1 - p), p * p]}}

    gw = SamplerSequence(
        name="gw", mode="wbp",
        sampler_for=lambda n: wbp_sampler(q=1.0, n=binom2(0.5 + 0.25 / math.sqrt(n)), weights=1.0),
        limit=wbp_sampler(q=1.0, n=binom2(0.5), weights=1.0),
    )
    out = scaled_martingale_convergence(
        gw, log_schedule(), [10, 100, 1000, 10000], 4000, reps=10, seed=53, limit_depth=12
    )
    assert trend_ok(out.medians["ks_rho_n"], out.medians["ks_baseline"])
    assert not out.warnings

    # MC fixed-point limit
    rfam = SamplerSequence(
        name="rfam", mode="wbp",
        sampler_for=lambda n: wbp_sampler(q=1.0, n=2, weights={"uniform": [0.0, 0.4 + 0.4 / n]}),
        limit=wbp_sampler(q=1.0, n=2, weights={"uniform": [0.0, 0.4]}),
    )
    out = r_limit_convergence(
        rfam, constant_schedule(10), 1e-3, [2, 8, 32], 500, reps=20, seed=54
    )
    assert trend_ok(out.medians["d1"], out.medians["baseline"])

    # negative control: a linear schedule must be flagged by validation
    cfg = ExperimentConfig(
        kind="converge",
        name="negative_control",
        params={
            "experiment": "scaled_martingale",
            "family": {
                "type": "perturbed",
                "base": {"mode": "wbp", "q": 1.0, "n": binom2(0.5), "weights": 1.0},
                "target": "weights",
                "change": "scale",
                "magnitude": 0.5,
            },
            "schedule": {"kind": "linear"},
            "grid": [10, 100, 1000],
            "samples": 16,
        },
        seed=1,
    )
    warnings = validate_experiment(cfg)
    assert warnings and "premise" in warnings[0]
    elapsed = time.perf_counter() - t0
    _report(5, f"exact curve to 1e-9; three MC trend tests pass; control flagged ({elapsed:.0f}s)")


def test_criterion_6_size_biased_rates():
    """Scaled empirical-measure distances strictly decreasing on the grid."""
    t0 = time.perf_counter()
    f = DiscreteMeasure(*Geometric(0.5, start=1).as_table())
    out = sizebias_rate_experiment(
        f, eps_moment=2.0, n_grid=[100, 1000, 10_000, 100_000],
        delta_star=0.4, delta=0.4, reps=20, seed=7,
    )
    for label in ("nu_star", "nu"):
        medians = out.medians[label]
        assert all(b < a for a, b in zip(medians, medians[1:])), (label, medians)

    # exact rational spot value for D = (1, 2, 3)
    from branchkit.graphs import DegreeSequence, size_biased

    sb = size_biased(DegreeSequence(degrees=np.array([1, 2, 3])))
    assert sb.nu.atoms.tolist() == [0.0, 1.0, 2.0]
    assert [str(fr) for _, fr in sb.nu_fractions] == ["1/6", "1/3", "1/2"]
    elapsed = time.perf_counter() - t0
    _report(6, f"both scaled-distance median curves strictly decreasing ({elapsed:.0f}s)")


def test_criterion_7_gw_coupling():
    """Level-1 identity and decreasing coupled maxima for j_n = floor(loglog n)+1."""
    t0 = time.perf_counter()
    f = DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.full(3, 1 / 3))
    out = gw_coupling_experiment(f, [100, 1000, 10_000, 100_000], loglog_schedule(), reps=20, seed=71)
    gaps = {r.n: (r.value, r.se) for r in out.rows if r.statistic == "level1_gap"}
    d1s = {r.n: r.value for r in out.rows if r.statistic == "level1_d1"}
    for n, (mean, se) in gaps.items():
        assert abs(mean - d1s[n]) <= 3 * se, f"level-1 identity failed at n={n}"
    assert trend_ok(out.medians["norm"]), out.medians["norm"]
    assert trend_ok(out.medians["raw"]), out.medians["raw"]
    elapsed = time.perf_counter() - t0
    _report(7, f"level-1 gap = d1 within 3SE; maxima medians pass the trend test ({elapsed:.0f}s)")


def test_criterion_8_power_bound_property():
    """Both elementary inequalities over 1e5 random (x, j) pairs."""
    rng = np.random.default_rng(8)
    x = rng.uniform(1e-12, 10.0, size=100_000)
    j = rng.integers(1, 51, size=100_000)
    pos = np.maximum(x - 1.0, 0.0)
    lhs1 = np.maximum(x, 1.0) ** j
    rhs1 = np.exp(j * pos)
    lhs2 = np.abs(x**j - 1.0)
    rhs2 = j * np.abs(x - 1.0) * np.exp((j - 1) * pos)
    assert np.all(lhs1 <= rhs1)
    assert np.all(lhs2 <= rhs2)
    _report(8, "both power inequalities hold on all 100000 draws")


ACCEPTANCE_CONFIG = """\
seed: 424242
experiments:
  - kind: certify
    name: accept_cert
    coupling:
      mode: wbp
      kind: quantile
      left:  {q: {point: 1.0}, n: {point: 2}, weights: {point: 0.3}}
      right: {q: {point: 1.0}, n: {point: 2}, weights: {point: 0.4}}
    j_max: 10
    replications: 4
  - kind: sizebias
    name: accept_sb
    degree_law: {discrete: {atoms: [1, 2, 3], probs: [0.4, 0.4, 0.2]}}
    eps_moment: 2.0
    grid: [100, 400]
    delta_star: 0.4
    delta: 0.4
    reps: 5
  - kind: rank
    name: accept_rank
    n: 400
    in_law: {discrete: {atoms: [1, 2, 3], probs: [0.3, 0.4, 0.3]}}
    out_law: {discrete: {atoms: [1, 2, 3], probs: [0.3, 0.4, 0.3]}}
    damping: 0.4
    k: 8
    samples: 400
"""


def test_criterion_9_reproducibility(tmp_path):
    """Identical seeds reproduce result files byte for byte."""
    cfg = tmp_path / "acceptance.yaml"
    cfg.write_text(ACCEPTANCE_CONFIG)
    out1, out2 = str(tmp_path / "r1.tsv"), str(tmp_path / "r2.tsv")
    assert cli_main(["run", "--config", str(cfg), "--out", out1]) == 0
    assert cli_main(["run", "--config", str(cfg), "--out", out2]) == 0
    b1 = (tmp_path / "r1.tsv").read_bytes()
    b2 = (tmp_path / "r2.tsv").read_bytes()
    assert b1 == b2 and len(b1) > 0
    m1 = (tmp_path / "r1.tsv.manifest.json").read_text().replace("r1", "")
    m2 = (tmp_path / "r2.tsv.manifest.json").read_text().replace("r2", "")
    assert m1 == m2
    _report(9, f"two runs, {len(b1)} bytes each, byte-identical")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
