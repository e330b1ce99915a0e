"""Command-line front end: run experiment configs, validate them, summarize results.

    branchkit run --config exp.yaml [--seed N] [--out results.tsv] [--threads T]
    branchkit validate --config exp.yaml
    branchkit summarize --results results.tsv [--series-dir DIR]

`run` is deterministic given (config, seed): rows are canonically sorted and
floats written in shortest round-trip form, so repeated runs produce
byte-identical files. A manifest (toolkit version, config hash, seed,
kernel backend) lands next to the result file.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, _kernel
from .branching import endogenous_r_batch, w_batch
from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_coupling,
    parse_degree_law,
    parse_family,
    parse_root,
    parse_sampler,
    parse_schedule,
    validate_experiment,
)
from .convergence import (
    fixed_level_convergence,
    lemma_condition_check,
    r_limit_convergence,
    scaled_martingale_convergence,
)
from .coupling import certify
from .graphs import (
    DegreeSequence,
    balanced_bidegree,
    exploration_coupling_experiment,
    gw_coupling_experiment,
    rank_vs_wbt,
    sizebias_rate_experiment,
)
from .results import ResultRow, config_hash, read_rows, write_manifest, write_rows
from .rngkeys import derive_seed


def _run_simulate(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    sampler = parse_sampler(dict(p["sampler"]))
    root = parse_root(p["root"]) if "root" in p else None
    depth = int(p.get("depth", 6))
    n_reps = int(p["replications"])
    seed = derive_seed(cfg.seed, 101)
    rows = []
    w = w_batch(sampler, depth, n_reps, root=root, seed=seed)
    rho = sampler.rho
    for j in range(depth + 1):
        col = w[:, j]
        se = float(col.std(ddof=1) / math.sqrt(n_reps))
        rows.append(ResultRow(cfg.name, "w_mean", float(col.mean()), level=j, se=se))
        if rho > 0:
            norm = col / rho**j
            rows.append(
                ResultRow(
                    cfg.name, "martingale_mean", float(norm.mean()), level=j,
                    se=float(norm.std(ddof=1) / math.sqrt(n_reps)),
                )
            )
    if "eps" in p:
        values, k, tail = endogenous_r_batch(
            sampler, float(p["eps"]), n_reps, root=root, seed=derive_seed(cfg.seed, 102)
        )
        rows.append(
            ResultRow(
                cfg.name, "r_mean", float(values.mean()), level=k,
                se=float(values.std(ddof=1) / math.sqrt(n_reps)),
            )
        )
        rows.append(ResultRow(cfg.name, "r_tail_bound", tail, level=k))
    return rows


def _run_certify(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    cs = parse_coupling(p["coupling"])
    report = certify(
        cs,
        int(p["j_max"]),
        int(p["replications"]),
        seed=derive_seed(cfg.seed, 201),
        n_mc_constants=int(p.get("mc_constants", 200_000)),
    )
    rows = []
    for r in report.rows:
        rows.append(ResultRow(cfg.name, "gap", r.gap, level=r.j, se=r.gap_se))
        rows.append(ResultRow(cfg.name, "bound", r.bound, level=r.j, se=0.0))
        if r.bound_statement is not None:
            rows.append(ResultRow(cfg.name, "bound_statement", r.bound_statement, level=r.j, se=0.0))
            rows.append(ResultRow(cfg.name, "bound_proof", r.bound_proof, level=r.j, se=0.0))
        rows.append(ResultRow(cfg.name, "pass", float(r.passed), level=r.j))
    cc = report.constants
    rows.append(ResultRow(cfg.name, "rho", cc.rho, se=0.0))
    rows.append(ResultRow(cfg.name, "rho_hat", cc.rho_hat, se=0.0))
    rows.append(ResultRow(cfg.name, "e_constant", cc.e, se=cc.e_se))
    if cc.e_star is not None:
        rows.append(ResultRow(cfg.name, "e_star", cc.e_star, se=cc.e_star_se))
    rows.append(ResultRow(cfg.name, "all_pass", float(report.passed)))
    return rows


def _rename(rows, name):
    return [
        ResultRow(name, r.statistic, r.value, n=r.n, rep=r.rep, level=r.level, se=r.se, note=r.note)
        for r in rows
    ]


def _run_converge(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    sub = p["experiment"]
    seq = parse_family(p["family"])
    grid = [int(n) for n in p["grid"]]
    samples = int(p.get("samples", 1000))
    reps = int(p.get("reps", 1))
    seed = derive_seed(cfg.seed, 301)
    if sub == "fixed_level":
        out = fixed_level_convergence(
            seq, int(p.get("level", 1)), grid, samples,
            kind=p.get("process", "w"), reps=reps, seed=seed,
        )
    elif sub == "scaled_martingale":
        out = scaled_martingale_convergence(
            seq, parse_schedule(p.get("schedule")), grid, samples,
            reps=reps, seed=seed, limit_depth=int(p.get("limit_depth", 14)),
        )
    elif sub == "r_limit":
        out = r_limit_convergence(
            seq, parse_schedule(p.get("schedule")), float(p.get("eps", 1e-4)),
            grid, samples, reps=reps, seed=seed,
        )
    else:
        out = lemma_condition_check(seq, grid)
    rows = _rename(out.rows, cfg.name)
    for w in out.warnings:
        rows.append(ResultRow(cfg.name, "warning", 1.0, note=w))
    return rows


def _run_graph(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    f = parse_degree_law(p["degree_law"])
    sub = p.get("experiment", "exploration")
    if sub == "exploration":
        out = exploration_coupling_experiment(
            f, int(p["n"]), int(p.get("depth", 2)), int(p["reps"]),
            seed=derive_seed(cfg.seed, 401),
        )
    else:
        out = gw_coupling_experiment(
            f, [int(n) for n in p["grid"]],
            parse_schedule(p.get("schedule", {"kind": "loglog"})),
            int(p["reps"]), seed=derive_seed(cfg.seed, 402),
        )
    return _rename(out.rows, cfg.name)


def _run_sizebias(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    f = parse_degree_law(p["degree_law"])
    out = sizebias_rate_experiment(
        f,
        float(p.get("eps_moment", 1.0)),
        [int(n) for n in p["grid"]],
        float(p["delta_star"]),
        float(p["delta"]),
        int(p["reps"]),
        seed=derive_seed(cfg.seed, 501),
    )
    return _rename(out.rows, cfg.name)


def _run_rank(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    if "bidegree_file" in p:
        with open(p["bidegree_file"]) as fh:
            ds = DegreeSequence.from_lines(fh.read())
    else:
        ds = balanced_bidegree(
            parse_degree_law(p["in_law"]),
            parse_degree_law(p["out_law"]),
            int(p["n"]),
            seed=derive_seed(cfg.seed, 601),
        )
    out = rank_vs_wbt(
        ds, float(p.get("damping", 0.5)), int(p["k"]), int(p["samples"]),
        seed=derive_seed(cfg.seed, 602),
    )
    return _rename(out.rows, cfg.name)


_RUNNERS = {
    "simulate": _run_simulate,
    "certify": _run_certify,
    "converge": _run_converge,
    "graph": _run_graph,
    "sizebias": _run_sizebias,
    "rank": _run_rank,
}


def run_experiments(configs: list[ExperimentConfig], threads: int = 1) -> list[ResultRow]:
    if threads > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda c: _RUNNERS[c.kind](c), configs))
    else:
        chunks = [_RUNNERS[c.kind](c) for c in configs]
    rows: list[ResultRow] = []
    for chunk in chunks:
        rows.extend(chunk)
    return rows


def cmd_run(args) -> int:
    try:
        configs = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        for c in configs:
            c.seed = args.seed
    threads = args.threads or configs[0].threads
    warnings = []
    try:
        for c in configs:
            warnings.extend(validate_experiment(c))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    rows = run_experiments(configs, threads)
    out_path = args.out or configs[0].out or "results.tsv"
    write_rows(out_path, rows)
    with open(args.config, "rb") as fh:
        digest = config_hash(fh.read())
    write_manifest(
        out_path + ".manifest.json",
        version=__version__,
        config_digest=digest,
        seed=configs[0].seed,
        kernel=_kernel.backend_name(),
        row_count=len(rows),
    )
    print(f"wrote {len(rows)} rows to {out_path}")
    return 0


def cmd_validate(args) -> int:
    try:
        configs = load_config(args.config)
        warnings = []
        for c in configs:
            warnings.extend(validate_experiment(c))
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    for w in warnings:
        print(f"warning: {w}")
    print(f"ok: {len(configs)} experiment(s) validated")
    return 0


def cmd_summarize(args) -> int:
    rows = read_rows(args.results)
    if not rows:
        print("no rows")
        return 0
    by_exp: dict[str, list[ResultRow]] = {}
    for r in rows:
        by_exp.setdefault(r.experiment, []).append(r)
    for exp in sorted(by_exp):
        print(f"== {exp}")
        stats: dict[str, list[ResultRow]] = {}
        for r in by_exp[exp]:
            stats.setdefault(r.statistic, []).append(r)
        if "pass" in stats:
            passed = sum(r.value for r in stats["pass"])
            print(f"   pass: {int(passed)}/{len(stats['pass'])} levels")
        for stat in sorted(stats):
            if stat in ("pass", "warning"):
                continue
            values = [r.value for r in stats[stat]]
            med = float(np.median(values))
            print(f"   {stat}: median {med:.6g} over {len(values)} rows")
        for r in stats.get("warning", []):
            print(f"   warning: {r.note}")
    if args.series_dir:
        import os

        os.makedirs(args.series_dir, exist_ok=True)
        count = 0
        for exp in sorted(by_exp):
            per_stat: dict[str, dict[int, list[float]]] = {}
            for r in by_exp[exp]:
                if r.n is None or not math.isfinite(r.value):
                    continue
                per_stat.setdefault(r.statistic, {}).setdefault(r.n, []).append(r.value)
            for stat, series in per_stat.items():
                path = f"{args.series_dir}/{exp}.{stat}.csv"
                with open(path, "w") as fh:
                    fh.write("n,median\n")
                    for n in sorted(series):
                        fh.write(f"{n},{repr(float(np.median(series[n])))}\n")
                count += 1
        print(f"wrote {count} series files to {args.series_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branchkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.set_defaults(func=cmd_run)
    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)
    p_sum = sub.add_parser("summarize", help="aggregate a result file")
    p_sum.add_argument("--results", required=True)
    p_sum.add_argument("--series-dir", default=None, help="write per-statistic x/y series here")
    p_sum.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
