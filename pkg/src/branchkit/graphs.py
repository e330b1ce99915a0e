"""Random-graph applications: configuration model, exploration coupling,
size-biased empirical measures, and the PageRank-versus-tree comparison.

The configuration model pairs half-edges uniformly and keeps the resulting
multigraph (self-loops and multi-edges included): that is the object the
couplings are stated for. A conditioned simple-graph mode retries the
pairing with an attempt cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix

from .branching import root_table_sampler, wbt_table_sampler, w_batch
from .measures import DiscreteMeasure, EmpiricalMeasure, d1_empirical_1d, d1_integer
from .results import ResultRow
from .rngkeys import derive_seed

__all__ = [
    "DegreeSequence",
    "Multigraph",
    "SizeBiasedMeasures",
    "ExplorationTrace",
    "config_model",
    "bfs_exploration",
    "size_biased",
    "d1_integer",
    "sizebias_rate_experiment",
    "gw_coupling_experiment",
    "exploration_coupling_experiment",
    "pagerank",
    "rank_vs_wbt",
    "balanced_bidegree",
]


@dataclass(frozen=True)
class DegreeSequence:
    """Prescribed degrees: one list (undirected) or paired in/out lists."""

    degrees: np.ndarray | None = None
    in_degrees: np.ndarray | None = None
    out_degrees: np.ndarray | None = None

    def __post_init__(self):
        if self.degrees is not None:
            d = np.asarray(self.degrees, dtype=np.int64)
            if np.any(d < 0):
                raise ValueError("degrees must be nonnegative")
            if d.sum() % 2 != 0:
                raise ValueError("total degree must be even")
            object.__setattr__(self, "degrees", d)
        else:
            din = np.asarray(self.in_degrees, dtype=np.int64)
            dout = np.asarray(self.out_degrees, dtype=np.int64)
            if din.shape != dout.shape:
                raise ValueError("in/out lists must have equal length")
            if np.any(din < 0) or np.any(dout < 0):
                raise ValueError("degrees must be nonnegative")
            if din.sum() != dout.sum():
                raise ValueError("total in-degree must equal total out-degree")
            object.__setattr__(self, "in_degrees", din)
            object.__setattr__(self, "out_degrees", dout)

    @property
    def directed(self) -> bool:
        return self.degrees is None

    @property
    def n(self) -> int:
        return len(self.in_degrees if self.directed else self.degrees)

    def to_lines(self) -> str:
        if self.directed:
            return "\n".join(f"{i},{o}" for i, o in zip(self.in_degrees, self.out_degrees)) + "\n"
        return "\n".join(str(d) for d in self.degrees) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "DegreeSequence":
        ins, outs, plain = [], [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "," in line:
                a, b = line.split(",")
                ins.append(int(a))
                outs.append(int(b))
            else:
                plain.append(int(line))
        if ins and plain:
            raise ValueError("mixed directed and undirected lines")
        if ins:
            return cls(in_degrees=np.array(ins), out_degrees=np.array(outs))
        return cls(degrees=np.array(plain))


@dataclass(frozen=True)
class Multigraph:
    n: int
    edges: np.ndarray  # (m, 2); row (u, v) is u->v when directed
    directed: bool

    def degree_check(self, ds: DegreeSequence) -> bool:
        if self.directed:
            dout = np.bincount(self.edges[:, 0], minlength=self.n)
            din = np.bincount(self.edges[:, 1], minlength=self.n)
            return bool(
                np.array_equal(dout, ds.out_degrees) and np.array_equal(din, ds.in_degrees)
            )
        deg = np.bincount(self.edges.reshape(-1), minlength=self.n)
        return bool(np.array_equal(deg, ds.degrees))

    def is_simple(self) -> bool:
        if len(self.edges) == 0:
            return True
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            return False
        rows = self.edges if self.directed else np.sort(self.edges, axis=1)
        return len(np.unique(rows, axis=0)) == len(rows)

    def adjacency(self) -> list:
        adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            if not self.directed:
                adj[v].append(u)
        return adj

    def to_edgelist(self) -> str:
        return "\n".join(f"{u} {v}" for u, v in self.edges) + ("\n" if len(self.edges) else "")


def config_model(
    ds: DegreeSequence, seed: int = 0, *, simple: bool = False, max_attempts: int = 1000
) -> Multigraph:
    """Uniform half-edge pairing; `simple=True` retries until no loops/multi-edges."""
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts if simple else 1):
        if ds.directed:
            out_stubs = np.repeat(np.arange(ds.n), ds.out_degrees)
            in_stubs = np.repeat(np.arange(ds.n), ds.in_degrees)
            perm = rng.permutation(len(in_stubs))
            edges = np.column_stack([out_stubs, in_stubs[perm]])
            g = Multigraph(ds.n, edges.astype(np.int64), True)
        else:
            stubs = np.repeat(np.arange(ds.n), ds.degrees)
            perm = rng.permutation(len(stubs))
            paired = stubs[perm].reshape(-1, 2)
            g = Multigraph(ds.n, paired.astype(np.int64), False)
        if not simple or g.is_simple():
            return g
    raise RuntimeError(f"no simple pairing found in {max_attempts} attempts")


@dataclass(frozen=True)
class ExplorationTrace:
    """Generation sizes of a breadth-first exploration, with departure flags."""

    sizes: tuple
    depleted: tuple  # True where the exploration met an already-seen node

    @property
    def total(self) -> int:
        return sum(self.sizes)


def bfs_exploration(g: Multigraph, start: int, max_depth: int) -> ExplorationTrace:
    if not 0 <= start < g.n:
        raise ValueError("start node outside the graph")
    adj = g.adjacency()
    seen = {start}
    frontier = [start]
    sizes = [1]
    depleted = [False]
    for _ in range(max_depth):
        nxt = []
        hit_seen = False
        for u in frontier:
            for v in adj[u]:
                if v in seen:
                    hit_seen = True
                else:
                    seen.add(v)
                    nxt.append(v)
        sizes.append(len(nxt))
        depleted.append(hit_seen)
        frontier = nxt
        if not nxt:
            break
    return ExplorationTrace(tuple(sizes), tuple(depleted))


@dataclass(frozen=True)
class SizeBiasedMeasures:
    """Empirical root law and the size-biased residual-degree law."""

    nu_star: DiscreteMeasure
    nu: DiscreteMeasure
    nu_star_fractions: tuple
    nu_fractions: tuple


def size_biased(ds: DegreeSequence) -> SizeBiasedMeasures:
    """Exact empirical measures of a degree sequence (rational arithmetic)."""
    if ds.directed:
        raise ValueError("size-biased measures are defined for undirected sequences")
    degrees = ds.degrees
    n = len(degrees)
    total = int(degrees.sum())
    if total == 0:
        raise ValueError("size-biased law undefined: all degrees are zero")
    counts: dict[int, int] = {}
    for d in degrees.tolist():
        counts[d] = counts.get(d, 0) + 1
    star_fracs = tuple(sorted((k, Fraction(c, n)) for k, c in counts.items()))
    nu_fracs = tuple(
        sorted((k - 1, Fraction(k * c, total)) for k, c in counts.items() if k >= 1)
    )
    assert sum(f for _, f in star_fracs) == 1
    assert sum(f for _, f in nu_fracs) == 1
    nu_star = DiscreteMeasure(
        np.array([float(k) for k, _ in star_fracs]),
        np.array([float(f) for _, f in star_fracs]),
    )
    nu = DiscreteMeasure(
        np.array([float(k) for k, _ in nu_fracs]),
        np.array([float(f) for _, f in nu_fracs]),
    )
    return SizeBiasedMeasures(nu_star, nu, star_fracs, nu_fracs)


def size_biased_limits(f: DiscreteMeasure) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """(nu_star, nu) implied by a degree law: nu{k} = (k+1) f{k+1} / E[D]."""
    mean = f.mean()
    if mean <= 0:
        raise ValueError("degree law must have positive mean")
    pairs = [
        (k - 1.0, k * p / mean) for k, p in zip(f.atoms, f.masses) if k >= 1 and p > 0
    ]
    return f, DiscreteMeasure.from_pairs(pairs)


def _empirical_integer_measure(values: np.ndarray, weights=None) -> DiscreteMeasure:
    counts = np.bincount(values, weights=weights)
    atoms = np.nonzero(counts)[0]
    masses = counts[atoms] / counts.sum()
    return DiscreteMeasure(atoms.astype(float), masses)


def sizebias_rate_experiment(
    f: DiscreteMeasure,
    eps_moment: float,
    n_grid,
    delta_star: float,
    delta: float,
    reps: int,
    seed: int = 0,
) -> "GraphExperimentOutput":
    """Scaled distances n^d' d1(nu_n*, nu*) and n^d d1(nu_n, nu) over i.i.d. sequences.

    The exponent windows mirror the rate statement: d' < 1/2 and
    d < min(1/2, eps/(2+eps)) where E[D^(2+eps)] is finite.
    """
    if not 0 < delta_star < 0.5:
        raise ValueError("delta_star must lie in (0, 1/2)")
    if not 0 < delta < min(0.5, eps_moment / (2.0 + eps_moment)):
        raise ValueError("delta must lie in (0, min(1/2, eps/(2+eps)))")
    moment = float((np.abs(f.atoms) ** (2.0 + eps_moment)) @ f.masses)
    if not math.isfinite(moment):
        raise ValueError("declared moment is not finite")
    nu_star_lim, nu_lim = size_biased_limits(f)
    out = GraphExperimentOutput("sizebias")
    med_star, med_nu = [], []
    for n in n_grid:
        star_vals, nu_vals = [], []
        for rep in range(reps):
            rng = np.random.default_rng(derive_seed(seed, n, rep))
            degrees = f.sample_np(rng.random(n)).astype(np.int64)
            seq = DegreeSequence(degrees=_even_total(degrees))
            sb = size_biased(seq)
            d_star = d1_integer(sb.nu_star, nu_star_lim)
            d_nu = d1_integer(sb.nu, nu_lim)
            star_vals.append(n**delta_star * d_star)
            nu_vals.append(n**delta * d_nu)
            out.add(statistic="scaled_d1_nu_star", n=n, rep=rep, value=star_vals[-1])
            out.add(statistic="scaled_d1_nu", n=n, rep=rep, value=nu_vals[-1])
        med_star.append(float(np.median(star_vals)))
        med_nu.append(float(np.median(nu_vals)))
        out.add(statistic="scaled_d1_nu_star_median", n=n, value=med_star[-1])
        out.add(statistic="scaled_d1_nu_median", n=n, value=med_nu[-1])
    out.medians["nu_star"] = med_star
    out.medians["nu"] = med_nu
    out.meta["moment"] = moment
    return out


def _even_total(degrees: np.ndarray) -> np.ndarray:
    # parity repair so the sequence is graphical for pairing purposes; the
    # empirical measures shift by at most one count
    if degrees.sum() % 2 != 0:
        degrees = degrees.copy()
        degrees[0] += 1
    return degrees


@dataclass
class GraphExperimentOutput:
    name: str
    rows: list = None
    medians: dict = None
    meta: dict = None

    def __post_init__(self):
        self.rows = []
        self.medians = {}
        self.meta = {}

    def add(self, **kw):
        self.rows.append(ResultRow(experiment=self.name, **kw))


def gw_coupling_experiment(
    f: DiscreteMeasure,
    n_grid,
    schedule,
    reps: int,
    seed: int = 0,
    identity_samples: int = 20_000,
) -> GraphExperimentOutput:
    """Coupled delayed Galton-Watson growth from empirical versus limit laws.

    Per replication an i.i.d. degree sequence defines the empirical root law
    and size-biased offspring law; both trees are driven through shared
    uniforms via the inverse CDFs. Reports the two maxima of the coupled
    convergence statement up to j_n, plus the level-1 identity E|Z_hat(1) - Z(1)| =
    d1(root laws) measured on the first sequence of each grid point.
    """
    nu_star_lim, nu_lim = size_biased_limits(f)
    out = GraphExperimentOutput("gw_coupling")
    m = nu_lim.mean()
    m_star = nu_star_lim.mean()
    med_norm, med_raw = [], []
    for n in n_grid:
        j_n = schedule(n)
        norm_vals, raw_vals = [], []
        for rep in range(reps):
            rng = np.random.default_rng(derive_seed(seed, n, rep, 11))
            degrees = _even_total(f.sample_np(rng.random(n)).astype(np.int64))
            sb = size_biased(DegreeSequence(degrees=degrees))
            m_n = sb.nu.mean()
            m_n_star = sb.nu_star.mean()
            zA, zB = _coupled_counts(nu_lim, nu_star_lim, sb.nu, sb.nu_star, j_n,
                                     derive_seed(seed, n, rep, 12))
            norm_gap = max(
                abs(zB[j] / (m_n_star * m_n ** (j - 1)) - zA[j] / (m_star * m ** (j - 1)))
                for j in range(1, j_n + 1)
            )
            raw_gap = max(abs(zB[j] - zA[j]) / m ** (j - 1) for j in range(1, j_n + 1))
            norm_vals.append(norm_gap)
            raw_vals.append(raw_gap)
            out.add(statistic="max_norm_gap", n=n, rep=rep, level=j_n, value=norm_gap)
            out.add(statistic="max_raw_gap", n=n, rep=rep, level=j_n, value=raw_gap)
            if rep == 0:
                gap_mean, gap_se, d1_star = _level1_identity(
                    sb.nu_star, nu_star_lim, identity_samples, derive_seed(seed, n, 13)
                )
                out.add(statistic="level1_gap", n=n, value=gap_mean, se=gap_se)
                out.add(statistic="level1_d1", n=n, value=d1_star)
        med_norm.append(float(np.median(norm_vals)))
        med_raw.append(float(np.median(raw_vals)))
        out.add(statistic="max_norm_gap_median", n=n, level=j_n, value=med_norm[-1])
        out.add(statistic="max_raw_gap_median", n=n, level=j_n, value=med_raw[-1])
    out.medians["norm"] = med_norm
    out.medians["raw"] = med_raw
    return out


def _coupled_counts(nu_lim, nu_star_lim, nu_n, nu_n_star, depth, seed):
    """Generation sizes of the two quantile-coupled delayed trees."""
    from .coupling import quantile_coupled
    from . import _kernel

    side_a = wbt_table_sampler(
        [(1.0, int(k), 1.0) for k in nu_lim.atoms], nu_lim.masses
    )
    side_b = wbt_table_sampler(
        [(1.0, int(k), 1.0) for k in nu_n.atoms], nu_n.masses
    )
    root_a = root_table_sampler([(1.0, int(k)) for k in nu_star_lim.atoms], nu_star_lim.masses)
    root_b = root_table_sampler([(1.0, int(k)) for k in nu_n_star.atoms], nu_n_star.masses)
    cs = quantile_coupled(side_a, side_b, root_a=root_a, root_b=root_b)
    _, _, zA, _, _, zB = _kernel.run_batch(cs.kernel_spec(), seed, 1, depth)
    return zA[0], zB[0]


def _level1_identity(nu_n_star, nu_star_lim, n_samples, seed):
    rng = np.random.default_rng(seed)
    u = rng.random(n_samples)
    z_n = nu_n_star.sample_np(u)
    z = nu_star_lim.sample_np(u)
    gaps = np.abs(z_n - z)
    return (
        float(gaps.mean()),
        float(gaps.std(ddof=1) / math.sqrt(n_samples)),
        d1_integer(nu_n_star, nu_star_lim),
    )


def exploration_coupling_experiment(
    f: DiscreteMeasure, n: int, depth: int, reps: int, seed: int = 0
) -> GraphExperimentOutput:
    """Fidelity of the graph-exploration-to-branching coupling at desk scale.

    Per replication, a breadth-first exploration of a fresh configuration
    graph and a size-biased branching process are driven by the same stub
    draws; they agree until a drawn stub is unavailable. Reports the
    fraction of replications with equal generation sizes through `depth`,
    restricted to runs whose uncovered half-edge count stays below
    sqrt(L_n) (the toolkit's testable proxy for the coupling regime).
    """
    out = GraphExperimentOutput("exploration")
    equal_all = 0
    equal_within = 0
    within = 0
    for rep in range(reps):
        rng = np.random.default_rng(derive_seed(seed, n, rep, 21))
        degrees = _even_total(f.sample_np(rng.random(n)).astype(np.int64))
        trace_g, trace_gw, uncovered = _coupled_exploration(degrees, depth, rng)
        equal = trace_g == trace_gw
        threshold = math.sqrt(float(degrees.sum()))
        equal_all += equal
        if uncovered <= threshold:
            within += 1
            equal_within += equal
        out.add(statistic="equal", n=n, rep=rep, value=float(equal))
    out.add(statistic="equal_fraction", n=n, value=equal_all / reps)
    out.add(
        statistic="equal_fraction_within_threshold",
        n=n,
        value=(equal_within / within) if within else 1.0,
    )
    out.meta["within_threshold"] = within
    out.medians["equal_fraction"] = [equal_all / reps]
    return out


def _coupled_exploration(degrees: np.ndarray, depth: int, rng) -> tuple:
    """Shared-draw BFS exploration and branching counts, plus uncovered stubs.

    The e-th pairing of a level and the e-th branching child consume the
    same uniform stub proposal; the graph redraws among the remaining free
    stubs only when the proposal is unavailable, which is exactly when the
    two processes may diverge.
    """
    n = len(degrees)
    owner = np.repeat(np.arange(n), degrees)
    total = len(owner)
    if total == 0:
        return (1,), (1,), 0
    stub_start = np.concatenate([[0], np.cumsum(degrees)])
    free = np.ones(total, dtype=bool)
    start = int(rng.integers(0, n))
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    queue = list(range(stub_start[start], stub_start[start + 1]))
    gw_frontier = int(degrees[start])
    sizes_g = [1]
    sizes_gw = [1]
    uncovered = int(degrees[start])
    for _level in range(depth):
        sizes_gw.append(gw_frontier)
        nodes_g = 0
        gw_next = 0
        next_queue = []
        sources = queue
        gi = 0
        max_edges = max(len(sources), gw_frontier)
        for e in range(max_edges):
            proposal = int(rng.integers(0, total))
            if e < gw_frontier:
                gw_next += max(int(degrees[owner[proposal]]) - 1, 0)
            while gi < len(sources) and not free[sources[gi]]:
                gi += 1  # consumed as a partner earlier this level
            if gi < len(sources):
                s = sources[gi]
                gi += 1
                free[s] = False
                if free[proposal] and proposal != s:
                    target = proposal
                else:
                    candidates = np.nonzero(free)[0]
                    if len(candidates) == 0:
                        continue
                    target = int(candidates[rng.integers(0, len(candidates))])
                free[target] = False
                v = int(owner[target])
                if not visited[v]:
                    visited[v] = True
                    nodes_g += 1
                    uncovered += max(int(degrees[v]) - 1, 0)
                    for s2 in range(stub_start[v], stub_start[v + 1]):
                        if s2 != target:
                            next_queue.append(s2)
        sizes_g.append(nodes_g)
        queue = next_queue
        gw_frontier = gw_next
    return tuple(sizes_g), tuple(sizes_gw), uncovered


def pagerank(
    g: Multigraph,
    damping: float,
    personalization: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Affine rank recursion r = c M r + c (dangling mass) p~ + q.

    q is the personalization vector (default (1-c) per node, making ranks
    mean-one on balanced graphs); dangling nodes redistribute their mass
    along the normalized personalization profile.
    """
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    if not g.directed:
        raise ValueError("rank recursion needs a directed graph")
    n = g.n
    q = (
        np.full(n, 1.0 - damping)
        if personalization is None
        else np.asarray(personalization, dtype=float)
    )
    if q.shape != (n,) or np.any(q < 0) or q.sum() <= 0:
        raise ValueError("personalization must be a nonnegative vector with positive mass")
    profile = q / q.sum()
    out_deg = np.bincount(g.edges[:, 0], minlength=n) if len(g.edges) else np.zeros(n, int)
    dangling = out_deg == 0
    if len(g.edges):
        weights = 1.0 / out_deg[g.edges[:, 0]]
        mat = csr_matrix((weights, (g.edges[:, 1], g.edges[:, 0])), shape=(n, n))
    else:
        mat = csr_matrix((n, n))
    r = q.copy()
    for _ in range(max_iter):
        nxt = damping * (mat @ r + r[dangling].sum() * profile) + q
        if np.abs(nxt - r).sum() <= tol:
            return nxt
        r = nxt
    raise RuntimeError(f"rank iteration did not reach tol={tol} in {max_iter} steps")


def balanced_bidegree(
    in_law: DiscreteMeasure, out_law: DiscreteMeasure, n: int, seed: int = 0
) -> DegreeSequence:
    """i.i.d. bi-degrees with the imbalance repaired by unit increments."""
    rng = np.random.default_rng(seed)
    din = in_law.sample_np(rng.random(n)).astype(np.int64)
    dout = out_law.sample_np(rng.random(n)).astype(np.int64)
    diff = int(din.sum() - dout.sum())
    if diff > 0:
        idx = rng.integers(0, n, size=diff)
        np.add.at(dout, idx, 1)
    elif diff < 0:
        idx = rng.integers(0, n, size=-diff)
        np.add.at(din, idx, 1)
    return DegreeSequence(in_degrees=din, out_degrees=dout)


def rank_vs_wbt(
    ds: DegreeSequence,
    damping: float,
    k: int,
    n_samples: int,
    seed: int = 0,
) -> GraphExperimentOutput:
    """Ranks of a directed configuration graph versus the tree construction.

    The tree side draws node vectors from the joint (in, out) empirical law
    biased by out-degree (a node is reached by following one of its
    out-stubs), with weight damping/out-degree and mark 1-damping; the root
    law is the plain empirical in-degree law. Samples of the level-k partial
    sums are compared with sampled graph ranks in d1 and KS, against a
    same-law baseline.
    """
    from scipy.stats import ks_2samp

    if not ds.directed:
        raise ValueError("need a bi-degree sequence")
    out = GraphExperimentOutput("rank_vs_wbt")
    g = config_model(ds, seed=derive_seed(seed, 1))
    ranks = pagerank(g, damping)
    rng = np.random.default_rng(derive_seed(seed, 2))
    rank_sample = ranks[rng.integers(0, ds.n, size=n_samples)]

    total_out = int(ds.out_degrees.sum())
    pair_weights: dict[tuple, float] = {}
    for din, dout in zip(ds.in_degrees.tolist(), ds.out_degrees.tolist()):
        if dout > 0:
            key = (din, dout)
            pair_weights[key] = pair_weights.get(key, 0.0) + dout / total_out
    atoms = [
        (1.0 - damping, din, damping / dout) for (din, dout) in pair_weights
    ]
    probs = list(pair_weights.values())
    node_law = wbt_table_sampler(atoms, probs)
    root_counts: dict[int, float] = {}
    for din in ds.in_degrees.tolist():
        root_counts[din] = root_counts.get(din, 0.0) + 1.0 / ds.n
    root_law = root_table_sampler(
        [(1.0 - damping, din) for din in root_counts], list(root_counts.values())
    )
    w = w_batch(node_law, k, n_samples, root=root_law, seed=derive_seed(seed, 3))
    r_sample = w.sum(axis=1)
    w2 = w_batch(node_law, k, n_samples, root=root_law, seed=derive_seed(seed, 4))
    r_sample2 = w2.sum(axis=1)

    d1 = d1_empirical_1d(EmpiricalMeasure(rank_sample), EmpiricalMeasure(r_sample))
    baseline = d1_empirical_1d(EmpiricalMeasure(r_sample2), EmpiricalMeasure(r_sample))
    ks = float(ks_2samp(rank_sample, r_sample).statistic)
    ks_base = float(ks_2samp(r_sample2, r_sample).statistic)
    out.add(statistic="d1", n=ds.n, level=k, value=d1)
    out.add(statistic="baseline", n=ds.n, level=k, value=baseline)
    out.add(statistic="ks", n=ds.n, level=k, value=ks)
    out.add(statistic="ks_baseline", n=ds.n, level=k, value=ks_base)
    out.add(statistic="rank_mean", n=ds.n, value=float(ranks.mean()))
    out.add(statistic="tree_mean", n=ds.n, value=float(r_sample.mean()))
    out.medians["d1"] = [d1]
    out.medians["baseline"] = [baseline]
    return out
