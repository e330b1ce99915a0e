"""Config-file parsing: samplers, couplings, families, schedules, experiments.

Configs are YAML mappings. A run file holds either one `experiment` mapping
or an `experiments` list; every run must carry an explicit integer seed
(wall-clock seeding is not available anywhere in the toolkit).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .branching import (
    BranchingVectorSampler,
    RootSampler,
    root_sampler,
    root_table_sampler,
    wbp_lookup_sampler,
    wbp_sampler,
    wbp_table_sampler,
    wbt_sampler,
    wbt_table_sampler,
)
from .convergence import (
    SamplerSequence,
    Schedule,
    constant_schedule,
    linear_schedule,
    log_schedule,
    loglog_schedule,
)
from .coupling import CoupledSampler
from .distributions import (
    FiniteDiscrete,
    PointMass,
    UniformInterval,
    parse_primitive,
)
from .measures import DiscreteMeasure

EXPERIMENT_KINDS = ("simulate", "certify", "converge", "graph", "sizebias", "rank")


class ConfigError(ValueError):
    """Validation failure; the message names the offending field."""


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def parse_sampler(body: dict, field_name: str = "sampler") -> BranchingVectorSampler:
    _require(isinstance(body, dict), f"{field_name}: expected a mapping")
    body = dict(body)
    mode = body.pop("mode", None)
    _require(mode in ("wbp", "wbt"), f"{field_name}.mode: must be 'wbp' or 'wbt'")
    try:
        if "atoms" in body:
            atoms, probs = body.pop("atoms"), body.pop("probs")
            _require(not body, f"{field_name}: unexpected keys {sorted(body)}")
            if mode == "wbt":
                return wbt_table_sampler(atoms, probs)
            return wbp_table_sampler(atoms, probs)
        q = body.pop("q")
        n = body.pop("n")
        if mode == "wbt":
            c = body.pop("c")
            _require(not body, f"{field_name}: unexpected keys {sorted(body)}")
            return wbt_sampler(q, n, c)
        if "weights_by_n" in body:
            table = {int(k): list(v) for k, v in body.pop("weights_by_n").items()}
            _require(not body, f"{field_name}: unexpected keys {sorted(body)}")
            return wbp_lookup_sampler(q, n, table)
        weights = body.pop("weights")
        _require(not body, f"{field_name}: unexpected keys {sorted(body)}")
        return wbp_sampler(q, n, weights)
    except KeyError as exc:
        raise ConfigError(f"{field_name}: missing key {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field_name}: {exc}") from None


def parse_root(body: dict, field_name: str = "root") -> RootSampler:
    _require(isinstance(body, dict), f"{field_name}: expected a mapping")
    try:
        if "atoms" in body:
            return root_table_sampler(body["atoms"], body["probs"])
        return root_sampler(body["q"], body["n"])
    except KeyError as exc:
        raise ConfigError(f"{field_name}: missing key {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field_name}: {exc}") from None


def parse_coupling(body: dict, field_name: str = "coupling") -> CoupledSampler:
    _require(isinstance(body, dict), f"{field_name}: expected a mapping")
    mode = body.get("mode")
    kind = body.get("kind")
    _require(mode in ("wbp", "wbt"), f"{field_name}.mode: must be 'wbp' or 'wbt'")
    root_a = root_b = None
    root_kind = None
    root_pair = None
    if "root" in body:
        root_body = body["root"]
        root_kind = root_body.get("kind", "quantile")
        if "pairs" in root_body:
            rp = root_body["pairs"]
            root_pair = (
                rp["probs"],
                [tuple(a) for a in rp["left_atoms"]],
                [tuple(a) for a in rp["right_atoms"]],
            )
            root_kind = "pair_table"
        else:
            root_a = parse_root(root_body["left"], f"{field_name}.root.left")
            root_b = parse_root(root_body["right"], f"{field_name}.root.right")
    try:
        if kind == "pair_table":
            pairs = body["pairs"]
            table = (
                pairs["probs"],
                [tuple(a) for a in pairs["left_atoms"]],
                [tuple(a) for a in pairs["right_atoms"]],
            )
            return CoupledSampler(
                mode, kind, pair=table, root_a=root_a, root_b=root_b,
                root_kind=root_kind, root_pair=root_pair,
            )
        left = dict(body["left"])
        left.setdefault("mode", mode)
        right = dict(body["right"])
        right.setdefault("mode", mode)
        a = parse_sampler(left, f"{field_name}.left")
        b = parse_sampler(right, f"{field_name}.right")
        if kind == "identity":
            b = a
        return CoupledSampler(
            mode, kind, a, b, root_a=root_a, root_b=root_b,
            root_kind=root_kind, root_pair=root_pair,
        )
    except KeyError as exc:
        raise ConfigError(f"{field_name}: missing key {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field_name}: {exc}") from None


def _perturb_primitive(prim: Primitive, change: str, magnitude: float, n: int) -> Primitive:
    eps = magnitude / n
    if isinstance(prim, PointMass):
        if change == "shift":
            return PointMass(prim.value + eps)
        return PointMass(prim.value * (1.0 + eps))
    if isinstance(prim, UniformInterval):
        if change == "shift":
            return UniformInterval(prim.lo + eps, prim.hi + eps)
        return UniformInterval(prim.lo * (1.0 + eps), prim.hi * (1.0 + eps))
    if isinstance(prim, FiniteDiscrete):
        if change == "shift":
            return FiniteDiscrete(prim.atoms + eps, prim.probs)
        return FiniteDiscrete(prim.atoms * (1.0 + eps), prim.probs)
    raise ConfigError(f"cannot perturb primitive of type {type(prim).__name__}")


def parse_family(body: dict, field_name: str = "family") -> SamplerSequence:
    _require(isinstance(body, dict), f"{field_name}: expected a mapping")
    ftype = body.get("type", "perturbed")
    name = body.get("name", ftype)
    if ftype == "perturbed":
        base = parse_sampler(dict(body["base"]), f"{field_name}.base")
        target = body.get("target", "weights")
        change = body.get("change", "shift")
        magnitude = float(body.get("magnitude", 0.1))
        _require(change in ("shift", "scale"), f"{field_name}.change: shift or scale")
        mode = base.mode

        def sampler_for(n: int) -> BranchingVectorSampler:
            if base.is_table:
                _require(target in ("c", "weights"), f"{field_name}.target for tables: c")
                probs, q_atoms, n_atoms, third = base.table
                eps = magnitude / n
                if mode == "wbt":
                    scale = (1.0 + eps) if change == "scale" else None
                    new_c = third * scale if scale else third + eps
                    return wbt_table_sampler(
                        list(zip(q_atoms, n_atoms, new_c)), probs
                    )
                rows = [
                    tuple(w * (1.0 + eps) if change == "scale" else w + eps for w in row)
                    for row in third
                ]
                return wbp_table_sampler(list(zip(q_atoms, n_atoms, rows)), probs)
            parts = {"q": base.q, "n": base.n, "c": base.c}
            key = {"weights": "c"}.get(target, target)
            _require(key in parts, f"{field_name}.target: one of q, n, weights/c")
            parts[key] = _perturb_primitive(parts[key], change, magnitude, n)
            if mode == "wbt":
                return wbt_sampler(parts["q"], parts["n"], parts["c"])
            return wbp_sampler(parts["q"], parts["n"], parts["c"])

        return SamplerSequence(
            name=name,
            mode=base.mode,
            sampler_for=sampler_for,
            limit=base,
            mean_w_one=bool(body.get("mean_w_one", False)),
        )
    if ftype == "escaping_mass":
        # tree-form counterexample: a vanishing-probability atom with jointly
        # growing N and C keeps d1(nu_n, nu) -> 0 while E[|C|N] stays bounded
        # away from its limit, so d1(mu_n, mu) must not vanish
        base_atom = tuple(body.get("base_atom", (1.0, 1, 0.5)))
        limit = wbt_table_sampler([base_atom], [1.0])

        def sampler_for(n: int) -> BranchingVectorSampler:
            _require(n >= 2, f"{field_name}: grid values must be >= 2")
            esc = (base_atom[0], int(n), float(n))
            return wbt_table_sampler(
                [base_atom, esc], [1.0 - 1.0 / n**2, 1.0 / n**2]
            )

        return SamplerSequence(name=name, mode="wbt", sampler_for=sampler_for, limit=limit)
    raise ConfigError(f"{field_name}.type: unknown family type {ftype!r}")


def parse_schedule(body, field_name: str = "schedule") -> Schedule:
    if body is None:
        return constant_schedule(1)
    if isinstance(body, int):
        return constant_schedule(body)
    _require(isinstance(body, dict), f"{field_name}: expected a mapping or integer")
    kind = body.get("kind")
    if kind == "log":
        return log_schedule(float(body.get("scale", 1.0)))
    if kind == "loglog":
        return loglog_schedule()
    if kind == "const":
        return constant_schedule(int(body["k"]))
    if kind == "linear":
        return linear_schedule(float(body.get("frac", 1.0)))
    raise ConfigError(f"{field_name}.kind: unknown schedule kind {kind!r}")


def parse_degree_law(body, field_name: str = "degree_law") -> DiscreteMeasure:
    if isinstance(body, dict) and set(body) == {"file"}:
        # atom/mass pairs from a measure file
        with open(body["file"]) as fh:
            measure = DiscreteMeasure.from_lines(fh.read())
        atoms, probs = measure.atoms, measure.masses
    else:
        prim = parse_primitive(body)
        tab = prim.as_table()
        _require(tab is not None, f"{field_name}: must be integer-valued with a finite table")
        atoms, probs = tab
    _require(all(a == int(a) and a >= 0 for a in atoms), f"{field_name}: integer atoms only")
    return DiscreteMeasure(atoms, probs)


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    params: dict
    seed: int
    out: str | None = None
    threads: int = 1

    warnings: list = field(default_factory=list)


def load_config(path: str) -> list[ExperimentConfig]:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw)


def parse_config(raw: dict) -> list[ExperimentConfig]:
    _require(isinstance(raw, dict), "config: expected a mapping at top level")
    _require("seed" in raw, "config.seed: a seed is required (no wall-clock seeding)")
    seed = raw["seed"]
    _require(isinstance(seed, int), "config.seed: must be an integer")
    out = raw.get("out")
    threads = int(raw.get("threads", 1))
    _require(threads >= 1, "config.threads: must be >= 1")
    if "experiments" in raw:
        bodies = raw["experiments"]
        _require(isinstance(bodies, list) and bodies, "config.experiments: nonempty list")
    else:
        _require("experiment" in raw, "config.experiment: missing")
        bodies = [raw["experiment"]]
    configs = []
    for i, body in enumerate(bodies):
        _require(isinstance(body, dict), f"experiment[{i}]: expected a mapping")
        kind = body.get("kind")
        _require(kind in EXPERIMENT_KINDS, f"experiment[{i}].kind: one of {EXPERIMENT_KINDS}")
        name = body.get("name", f"{kind}{i}")
        params = {k: v for k, v in body.items() if k not in ("kind", "name")}
        configs.append(
            ExperimentConfig(
                kind=kind,
                name=name,
                params=params,
                seed=seed,
                out=out,
                threads=threads,
            )
        )
    return configs


def validate_experiment(cfg: ExperimentConfig) -> list[str]:
    """Parse everything the experiment will need; returns premise warnings.

    Raises ConfigError on schema violations or broken mathematical preconditions
    (e.g. an R-limit experiment whose limit has rho >= 1).
    """
    from .convergence import schedule_premise

    p = cfg.params
    warnings: list[str] = []
    if cfg.kind == "simulate":
        sampler = parse_sampler(dict(p["sampler"]))
        if "root" in p:
            parse_root(p["root"])
        _require(int(p.get("depth", 6)) >= 0, "simulate.depth: must be >= 0")
        _require(int(p.get("replications", 0)) > 0, "simulate.replications: must be positive")
        if "eps" in p and sampler.rho >= 1:
            raise ConfigError(
                f"simulate.eps: truncated fixed-point sampling requires rho < 1 "
                f"(contraction premise); got rho = {sampler.rho}"
            )
    elif cfg.kind == "certify":
        parse_coupling(p["coupling"])
        _require(int(p.get("replications", 0)) > 0, "certify.replications: must be positive")
        _require(int(p.get("j_max", -1)) >= 0, "certify.j_max: must be >= 0")
    elif cfg.kind == "converge":
        sub = p.get("experiment")
        _require(
            sub in ("fixed_level", "scaled_martingale", "r_limit", "lemma_check"),
            "converge.experiment: fixed_level | scaled_martingale | r_limit | lemma_check",
        )
        seq = parse_family(p["family"])
        grid = p.get("grid")
        _require(isinstance(grid, list) and grid, "converge.grid: nonempty list")
        _require(int(p.get("samples", 0)) > 0 or sub == "lemma_check", "converge.samples: positive")
        if sub in ("scaled_martingale", "r_limit"):
            schedule = parse_schedule(p.get("schedule"))
            if sub == "r_limit":
                if seq.limit.rho >= 1:
                    raise ConfigError(
                        "converge.family: the limit has rho = "
                        f"{seq.limit.rho} >= 1, violating the contraction premise "
                        "required for convergence to the fixed point"
                    )
            if sub == "scaled_martingale":
                values, ok = schedule_premise(seq, schedule, grid)
                if not ok:
                    warnings.append(
                        f"{cfg.name}: schedule may violate the vanishing premise; "
                        f"j_n*d1 went {values[0]:.4g} -> {values[-1]:.4g} over the grid"
                    )
    elif cfg.kind == "sizebias":
        parse_degree_law(p["degree_law"])
        _require(0 < float(p["delta_star"]) < 0.5, "sizebias.delta_star: in (0, 1/2)")
        eps_m = float(p.get("eps_moment", 1.0))
        _require(
            0 < float(p["delta"]) < min(0.5, eps_m / (2 + eps_m)),
            "sizebias.delta: in (0, min(1/2, eps/(2+eps)))",
        )
        _require(isinstance(p.get("grid"), list) and p["grid"], "sizebias.grid: nonempty list")
        _require(int(p.get("reps", 0)) > 0, "sizebias.reps: positive")
    elif cfg.kind == "graph":
        parse_degree_law(p["degree_law"])
        _require(int(p.get("reps", 0)) > 0, "graph.reps: positive")
        sub = p.get("experiment", "exploration")
        _require(sub in ("exploration", "gw_coupling"), "graph.experiment")
        if sub == "gw_coupling":
            parse_schedule(p.get("schedule", {"kind": "loglog"}))
            _require(isinstance(p.get("grid"), list) and p["grid"], "graph.grid: nonempty")
        else:
            _require(int(p.get("n", 0)) > 0, "graph.n: positive")
    elif cfg.kind == "rank":
        _require(0 < float(p.get("damping", 0.5)) < 1, "rank.damping: in (0, 1)")
        _require(int(p.get("k", 0)) >= 0, "rank.k: >= 0")
        _require(int(p.get("samples", 0)) > 0, "rank.samples: positive")
        if "bidegree_file" not in p:
            parse_degree_law(p["in_law"], "rank.in_law")
            parse_degree_law(p["out_law"], "rank.out_law")
            _require(int(p.get("n", 0)) > 0, "rank.n: positive")
    return warnings
