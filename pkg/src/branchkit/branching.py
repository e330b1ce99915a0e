"""Weighted branching processes and trees, and the linear processes on them.

Two dependence structures are supported. In process form the generic vector
is (Q, N, C_1, C_2, ...): a node's vector carries the edge weights of its
children, siblings may be dependent. In tree form it is (Q, N, C): every
node owns a single weight that multiplies into its own path, and C may
depend on that node's (Q, N).

Scalar growth (`grow`) materializes a full TreeRealization for desk-scale
inspection; the batch statistics used by experiments run through the
compiled/numpy kernels in branchkit._kernel, which consume the same keyed
streams and produce bit-identical level sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernel
from ._kernel.spec import (
    FAM_WBP_PRIMS,
    FAM_WBP_TABLE,
    FAM_WBT_PRIMS,
    FAM_WBT_TABLE,
    ROOT_PRIMS,
    ROOT_TABLE,
    KernelSpec,
    RootProgram,
    SideProgram,
)
from .distributions import Geometric, Primitive, parse_primitive
from .errors import ContractionError, ExplosionCapError
from .rngkeys import KeyedStream
from .measures import DiscreteMeasure

DEFAULT_CAP = 10_000_000


@dataclass(frozen=True)
class NodeIndex:
    """Position in the infinite index tree; the empty path is the root."""

    path: tuple = ()

    def __post_init__(self):
        if any((not isinstance(i, int)) or i < 1 for i in self.path):
            raise ValueError("path entries must be integers >= 1")

    def truncate(self, n: int) -> "NodeIndex":
        if n > len(self.path):
            raise ValueError("cannot truncate beyond the node's level")
        return NodeIndex(self.path[:n])

    def child(self, i: int) -> "NodeIndex":
        return NodeIndex(self.path + (i,))

    @property
    def level(self) -> int:
        return len(self.path)

    def __repr__(self):
        return f"<{','.join(map(str, self.path)) or 'root'}>"


class WBPVector(NamedTuple):
    q: float
    n: int
    weights: tuple


class WBTVector(NamedTuple):
    q: float
    n: int
    c: float


def _check_integer_prim(prim: Primitive, label: str):
    if not prim.is_integer:
        raise ValueError(f"{label} must be integer-valued")
    if prim.min_value < 0:
        raise ValueError(f"{label} must be nonnegative")
    if isinstance(prim, UNBOUNDED_OK):
        return
    if not math.isfinite(prim.max_value):
        raise ValueError(f"{label} must be almost surely finite")


UNBOUNDED_OK = (Geometric,)


class BranchingVectorSampler:
    """Law of the generic branching vector plus its analytic moments.

    Construct through wbp_sampler / wbt_sampler / wbt_table_sampler /
    wbp_table_sampler below.
    """

    def __init__(self, mode, q=None, n=None, c=None, table=None):
        self.mode = mode  # "wbp" | "wbt"
        self.q = q
        self.n = n
        self.c = c
        self.table = table  # (probs, q_atoms, n_atoms, c_atoms | weight_rows)
        if table is None:
            _check_integer_prim(n, "offspring count N")

    # --- analytic moments -------------------------------------------------

    @property
    def is_table(self):
        return self.table is not None

    @property
    def mean_n(self) -> float:
        if self.is_table:
            probs, _, n_atoms, _ = self.table
            return float(probs @ n_atoms)
        return self.n.mean

    @property
    def abs_mean_q(self) -> float:
        if self.is_table:
            probs, q_atoms, _, _ = self.table
            return float(probs @ np.abs(q_atoms))
        return self.q.abs_mean

    @property
    def mean_q(self) -> float:
        if self.is_table:
            probs, q_atoms, _, _ = self.table
            return float(probs @ q_atoms)
        return self.q.mean

    @property
    def abs_mean_c(self) -> float:
        """E|C| of the weight law (tree form), or of one i.i.d. weight (process form)."""
        if self.is_table:
            probs, _, _, third = self.table
            if self.mode == "wbt":
                return float(probs @ np.abs(third))
            raise ValueError("process-form tables have no single weight law")
        return self.c.abs_mean

    @property
    def rho(self) -> float:
        """Mean absolute generation weight: E[sum |C_i|] or E[N|C|]."""
        if self.is_table:
            probs, _, n_atoms, third = self.table
            if self.mode == "wbt":
                return float(probs @ (n_atoms * np.abs(third)))
            return float(sum(p * sum(abs(w) for w in row) for p, row in zip(probs, third)))
        return self.n.mean * self.c.abs_mean

    @property
    def mean_sum_c(self) -> float:
        """Signed E[sum_{i<=N} C_i]; children draw weights independently of N."""
        if self.is_table:
            probs, _, n_atoms, third = self.table
            if self.mode == "wbt":
                return self.mean_n * self.mean_c
            return float(sum(p * sum(row) for p, row in zip(probs, third)))
        return self.n.mean * self.c.mean

    @property
    def mean_c(self) -> float:
        if self.is_table:
            probs, _, _, third = self.table
            if self.mode == "wbt":
                return float(probs @ third)
            raise ValueError("process-form tables have no single weight law")
        return self.c.mean

    @property
    def abs_mean_cq(self) -> float:
        """E|CQ| (tree form only)."""
        if self.mode != "wbt":
            raise ValueError("E|CQ| is a tree-form constant")
        if self.is_table:
            probs, q_atoms, _, c_atoms = self.table
            return float(probs @ np.abs(q_atoms * c_atoms))
        return self.c.abs_mean * self.q.abs_mean

    @property
    def mean_cq(self) -> float:
        if self.mode != "wbt":
            raise ValueError("E[CQ] is a tree-form constant")
        if self.is_table:
            probs, q_atoms, _, c_atoms = self.table
            return float(probs @ (q_atoms * c_atoms))
        return self.c.mean * self.q.mean

    @property
    def mean_cn(self) -> float:
        """Signed E[CN] (tree form)."""
        if self.mode != "wbt":
            raise ValueError("E[CN] is a tree-form constant")
        if self.is_table:
            probs, _, n_atoms, c_atoms = self.table
            return float(probs @ (n_atoms * c_atoms))
        return self.c.mean * self.n.mean

    @property
    def abs_mean_cn(self) -> float:
        """E[|C|N] (tree form); equals rho."""
        return self.rho

    @property
    def nonnegative_weights(self) -> bool:
        if self.is_table:
            _, _, _, third = self.table
            if self.mode == "wbt":
                return bool(np.all(third >= 0))
            return all(all(w >= 0 for w in row) for row in third)
        return self.c.min_value >= 0

    @property
    def max_n(self) -> float:
        if self.is_table:
            _, _, n_atoms, _ = self.table
            return float(np.max(n_atoms))
        return self.n.max_value

    def tail_ge_n(self, i: int) -> float:
        """P(N >= i)."""
        if self.is_table:
            probs, _, n_atoms, _ = self.table
            return float(probs[n_atoms >= i].sum())
        return self.n.tail_ge(i)

    def b_abs_mean(self, i: int) -> float:
        """E|B_i| where B_i is the i-th effective edge weight."""
        if self.is_table:
            probs, _, n_atoms, third = self.table
            if self.mode == "wbt":
                return float(probs @ (np.abs(third) * (n_atoms >= i)))
            return float(
                sum(p * abs(row[i - 1]) for p, row in zip(probs, third) if len(row) >= i)
            )
        return self.c.abs_mean * self.tail_ge_n(i)

    def mean_r(self) -> float:
        """E[R] of the endogenous limit, from taking expectations in the SFPE."""
        if self.mode == "wbp":
            m = self.mean_sum_c
            if abs(m) >= 1:
                raise ContractionError("|E[sum C_i]| must be < 1 for a finite mean")
            return self.mean_q / (1.0 - m)
        # tree form: E[CR] solves its own affine equation first
        mcn = self.mean_cn
        if abs(mcn) >= 1:
            raise ContractionError("|E[CN]| must be < 1 for a finite mean")
        e_cr = self.mean_cq / (1.0 - mcn)
        return self.mean_q + self.mean_n * e_cr

    # --- sampling ----------------------------------------------------------

    def draw(self, stream: KeyedStream):
        """Realize one generic vector from a node's keyed stream."""
        key = stream.key
        s = KeyedStream(key)
        if self.is_table:
            probs, q_atoms, n_atoms, third = self.table
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            idx = int(np.searchsorted(cum, s.uniform_at(0), side="left"))
            idx = min(idx, len(probs) - 1)
            if self.mode == "wbt":
                return WBTVector(float(q_atoms[idx]), int(n_atoms[idx]), float(third[idx]))
            return WBPVector(float(q_atoms[idx]), int(n_atoms[idx]), tuple(third[idx]))
        q = self.q.icdf(s.uniform_at(0))
        n = int(round(self.n.icdf(s.uniform_at(1))))
        if self.mode == "wbt":
            return WBTVector(q, n, self.c.icdf(s.uniform_at(2)))
        weights = tuple(self.c.icdf(s.uniform_at(1 + i)) for i in range(1, n + 1))
        return WBPVector(q, n, weights)

    # --- kernel compilation --------------------------------------------------

    def side_program(self) -> SideProgram:
        if self.is_table:
            probs, q_atoms, n_atoms, third = self.table
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            if self.mode == "wbt":
                return SideProgram(FAM_WBT_TABLE, cum=cum, tq=q_atoms, tn=n_atoms, tc=third)
            lens = [len(row) for row in third]
            woff = np.concatenate([[0], np.cumsum(lens)])[:-1]
            wflat = np.concatenate([np.asarray(row, float) for row in third]) if sum(lens) else np.zeros(0)
            return SideProgram(
                FAM_WBP_TABLE, cum=cum, tq=q_atoms, tn=n_atoms, woff=woff, wflat=wflat
            )
        qc, qp = self.q.kernel_encode()
        nc, npar = self.n.kernel_encode()
        cc, cp = self.c.kernel_encode()
        fam = FAM_WBT_PRIMS if self.mode == "wbt" else FAM_WBP_PRIMS
        return SideProgram(fam, qc, qp, nc, npar, cc, cp)

    def marginal_measures(self) -> dict:
        """Exact finite marginals where available (None entries otherwise)."""
        out = {}
        if self.is_table:
            probs, q_atoms, n_atoms, third = self.table
            out["q"] = DiscreteMeasure.from_pairs(zip(q_atoms, probs))
            out["n"] = DiscreteMeasure.from_pairs(zip(n_atoms, probs))
            if self.mode == "wbt":
                out["c"] = DiscreteMeasure.from_pairs(zip(third, probs))
        else:
            for label, prim in (("q", self.q), ("n", self.n), ("c", self.c)):
                tab = prim.as_table()
                out[label] = (
                    DiscreteMeasure.from_pairs(zip(*tab)) if tab is not None else None
                )
        return out


def wbp_sampler(q, n, weights) -> BranchingVectorSampler:
    """Process-form sampler with i.i.d. child weights."""
    return BranchingVectorSampler(
        "wbp", parse_primitive(q), parse_primitive(n), parse_primitive(weights)
    )


def wbp_table_sampler(atoms, probs) -> BranchingVectorSampler:
    """Process-form sampler from finite atoms (q, n, weight_row)."""
    probs = np.asarray(probs, float)
    if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
        raise ValueError("probs must be a probability vector")
    q_atoms = np.array([float(a[0]) for a in atoms])
    n_atoms = np.array([int(a[1]) for a in atoms], dtype=np.int64)
    rows = [tuple(float(w) for w in a[2]) for a in atoms]
    for n_val, row in zip(n_atoms, rows):
        if len(row) != n_val:
            raise ValueError(f"atom declares n={n_val} but {len(row)} weights")
    return BranchingVectorSampler("wbp", table=(probs, q_atoms, n_atoms, rows))


def wbp_lookup_sampler(q, n, weights_by_n) -> BranchingVectorSampler:
    """Process form with deterministic weight rows selected by the drawn N.

    Requires finite-discrete q and n so the law folds into a finite table.
    """
    qp, np_ = parse_primitive(q), parse_primitive(n)
    q_tab = qp.as_table()
    n_tab = np_.as_table()
    if q_tab is None or n_tab is None or isinstance(qp, Geometric) or isinstance(np_, Geometric):
        raise ValueError("weights_by_n needs finite-discrete q and n")
    atoms, probs = [], []
    for qv, pq in zip(*q_tab):
        for nv, pn in zip(*n_tab):
            nv = int(round(nv))
            if nv not in weights_by_n:
                raise ValueError(f"weights_by_n is missing n={nv}")
            row = weights_by_n[nv]
            if len(row) != nv:
                raise ValueError(f"weights_by_n[{nv}] has {len(row)} entries")
            atoms.append((qv, nv, tuple(row)))
            probs.append(pq * pn)
    return wbp_table_sampler(atoms, probs)


def wbt_sampler(q, n, c) -> BranchingVectorSampler:
    """Tree-form sampler with independent (Q, N, C) components."""
    return BranchingVectorSampler(
        "wbt", parse_primitive(q), parse_primitive(n), parse_primitive(c)
    )


def wbt_table_sampler(atoms, probs) -> BranchingVectorSampler:
    """Tree-form sampler from finite joint atoms (q, n, c); C may depend on (Q, N)."""
    probs = np.asarray(probs, float)
    if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
        raise ValueError("probs must be a probability vector")
    q_atoms = np.array([float(a[0]) for a in atoms])
    n_atoms = np.array([int(a[1]) for a in atoms], dtype=np.int64)
    c_atoms = np.array([float(a[2]) for a in atoms])
    return BranchingVectorSampler("wbt", table=(probs, q_atoms, n_atoms, c_atoms))


class RootSampler:
    """Law of the delayed root vector (Q_root, N_root)."""

    def __init__(self, q=None, n=None, table=None):
        self.q = q
        self.n = n
        self.table = table
        if table is None:
            _check_integer_prim(n, "root offspring count")

    @property
    def mean_n(self):
        if self.table is not None:
            probs, _, n_atoms = self.table
            return float(probs @ n_atoms)
        return self.n.mean

    @property
    def abs_mean_q(self):
        if self.table is not None:
            probs, q_atoms, _ = self.table
            return float(probs @ np.abs(q_atoms))
        return self.q.abs_mean

    def draw(self, stream: KeyedStream):
        s = KeyedStream(stream.key)
        if self.table is not None:
            probs, q_atoms, n_atoms = self.table
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            idx = min(int(np.searchsorted(cum, s.uniform_at(0), side="left")), len(probs) - 1)
            return float(q_atoms[idx]), int(n_atoms[idx])
        return self.q.icdf(s.uniform_at(0)), int(round(self.n.icdf(s.uniform_at(1))))

    def root_program(self) -> RootProgram:
        if self.table is not None:
            probs, q_atoms, n_atoms = self.table
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            return RootProgram(ROOT_TABLE, cum=cum, tq=q_atoms, tn=n_atoms)
        qc, qp = self.q.kernel_encode()
        nc, npar = self.n.kernel_encode()
        return RootProgram(ROOT_PRIMS, qc, qp, nc, npar)


def root_sampler(q, n) -> RootSampler:
    return RootSampler(parse_primitive(q), parse_primitive(n))


def root_table_sampler(atoms, probs) -> RootSampler:
    probs = np.asarray(probs, float)
    q_atoms = np.array([float(a[0]) for a in atoms])
    n_atoms = np.array([int(a[1]) for a in atoms], dtype=np.int64)
    return RootSampler(table=(probs, q_atoms, n_atoms))


@dataclass(frozen=True)
class TreeRealization:
    """One sampled tree: per-node index, path weight, mark, and edge weight."""

    depth: int
    generations: tuple  # tuple of tuples of NodeIndex
    weight: dict  # NodeIndex -> Pi
    mark: dict  # NodeIndex -> Q
    edge: dict  # NodeIndex -> C (absent for the root)
    offspring: dict  # NodeIndex -> N
    node_counts: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "node_counts", tuple(len(g) for g in self.generations))

    @property
    def min_edge_weight(self) -> float:
        return min(self.edge.values(), default=0.0)


def _node_qn(sampler, root, key, at_root):
    """(q, n, wbp_row) drawn at a node, honoring a delayed root."""
    s = KeyedStream(key)
    if at_root and root is not None:
        q, n = root.draw(s)
        return q, n, None
    vec = sampler.draw(s)
    if isinstance(vec, WBPVector):
        return vec.q, vec.n, vec.weights
    return vec.q, vec.n, None


def _own_weight(sampler, child_stream: KeyedStream) -> float:
    """Tree-form: the weight a node draws for itself."""
    if sampler.is_table:
        vec = sampler.draw(child_stream)
        return vec.c
    return sampler.c.icdf(child_stream.uniform_at(2))


def grow(
    sampler: BranchingVectorSampler,
    depth: int,
    *,
    root: RootSampler | None = None,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    replication: int = 0,
) -> TreeRealization:
    """Sample a tree to `depth`, retaining every node (desk-scale path).

    Mirrors the batch kernels draw for draw: growing the same (seed,
    replication) here and there yields identical level sums.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if root is not None and sampler.mode == "wbp" and sampler.is_table:
        raise ValueError("delayed roots are not supported for process-form tables")
    root_node = NodeIndex()
    root_stream = KeyedStream.for_root(seed, replication)
    weight = {root_node: 1.0}
    mark = {}
    edge = {}
    offspring = {}
    generations = [(root_node,)]
    streams = {root_node: root_stream}
    total = 1
    for level in range(depth + 1):
        nodes = generations[level]
        next_gen = []
        for node in nodes:
            key = streams[node].key
            q, n, row = _node_qn(sampler, root, key, node.level == 0)
            mark[node] = q
            offspring[node] = n
            if level == depth:
                continue
            for i in range(1, n + 1):
                child = node.child(i)
                cs = streams[node].child(i)
                if sampler.mode == "wbp":
                    if row is not None:
                        c = row[i - 1]
                    else:
                        c = sampler.c.icdf(KeyedStream(key).uniform_at(1 + i))
                else:
                    c = _own_weight(sampler, cs)
                edge[child] = c
                weight[child] = weight[node] * c
                streams[child] = cs
                next_gen.append(child)
        total += len(next_gen)
        if total > cap:
            raise ExplosionCapError(level + 1, total, cap)
        if level < depth:
            generations.append(tuple(next_gen))
    return TreeRealization(
        depth=depth,
        generations=tuple(generations),
        weight=weight,
        mark=mark,
        edge=edge,
        offspring=offspring,
    )


def w_process(tree: TreeRealization, j: int) -> float:
    """W at level j: sum of Q_i * Pi_i over generation j (0 if extinct)."""
    if j > tree.depth:
        raise ValueError(f"level {j} exceeds tree depth {tree.depth}")
    total = 0.0
    for node in tree.generations[j]:
        total += tree.mark[node] * tree.weight[node]
    return total


def r_process(tree: TreeRealization, k: int) -> float:
    """Partial sum R at level k: sum of W over levels 0..k."""
    if k > tree.depth:
        raise ValueError(f"level {k} exceeds tree depth {tree.depth}")
    return sum(w_process(tree, j) for j in range(k + 1))


def homogeneous_w(tree: TreeRealization, j: int) -> float:
    """Mark-free level sum: W(0) = 1, W(j) = sum of Pi over generation j."""
    if j > tree.depth:
        raise ValueError(f"level {j} exceeds tree depth {tree.depth}")
    if tree.edge and tree.min_edge_weight < 0:
        raise ValueError("homogeneous process requires nonnegative weights")
    if j == 0:
        return 1.0
    total = 0.0
    for node in tree.generations[j]:
        total += tree.weight[node]
    return total


def martingale_normalize(w: float, rho: float, j: int) -> float:
    if rho <= 0:
        raise ValueError("rho must be positive")
    return w / rho**j


class SamplerMoments(NamedTuple):
    rho: float
    abs_mean_q: float
    mean_n: float
    abs_mean_cq: float | None


def moments(sampler: BranchingVectorSampler) -> SamplerMoments:
    """Analytic constants declared by the sampler."""
    return SamplerMoments(
        rho=sampler.rho,
        abs_mean_q=sampler.abs_mean_q,
        mean_n=sampler.mean_n,
        abs_mean_cq=sampler.abs_mean_cq if sampler.mode == "wbt" else None,
    )


def moments_mc(sampler: BranchingVectorSampler, n_samples: int, seed: int = 0):
    """Monte Carlo check of the declared moments; returns (SamplerMoments, SE tuple)."""
    draws = [sampler.draw(KeyedStream.for_root(seed, r)) for r in range(n_samples)]
    if sampler.mode == "wbt":
        rho_s = np.array([v.n * abs(v.c) for v in draws])
        cq_s = np.array([abs(v.c * v.q) for v in draws])
    else:
        rho_s = np.array([sum(abs(w) for w in v.weights) for v in draws])
        cq_s = None
    q_s = np.array([abs(v.q) for v in draws])
    n_s = np.array([v.n for v in draws], dtype=float)

    def est(arr):
        return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))

    rho, rho_se = est(rho_s)
    aq, aq_se = est(q_s)
    mn, mn_se = est(n_s)
    if cq_s is not None:
        cq, cq_se = est(cq_s)
    else:
        cq = cq_se = None
    return SamplerMoments(rho, aq, mn, cq), (rho_se, aq_se, mn_se, cq_se)


def truncation_dimension(
    sampler: BranchingVectorSampler, tol: float = 1e-8
) -> tuple[int, float]:
    """Smallest d with sum_{i>d} E|B_i| <= tol, plus that analytic tail.

    Infinite branching-vector laws live in summable sequence space; fixing
    d makes their finite-dimensional distances computable with an explicit
    additive slack, which callers must report alongside the value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def tail_after(d: int) -> float:
        if not sampler.is_table and isinstance(sampler.n, Geometric):
            g = sampler.n
            start = max(d + 1, g.start)
            head = sum(sampler.b_abs_mean(i) for i in range(d + 1, start))
            q = 1.0 - g.p
            geom = sampler.abs_mean_c * q ** (start - g.start) / g.p if g.p < 1 else 0.0
            return head + geom
        top = int(sampler.max_n)
        return sum(sampler.b_abs_mean(i) for i in range(d + 1, top + 1))

    d = 0
    while tail_after(d) > tol:
        d += 1
        if d > 1_000_000:
            raise RuntimeError("truncation dimension search failed to converge")
    return d, tail_after(d)


def r_truncation_level(
    sampler: BranchingVectorSampler, eps: float, root: RootSampler | None = None
) -> tuple[int, float]:
    """Smallest k whose analytic tail bound on E|R - R^(k)| is <= eps."""
    rho = sampler.rho
    if rho >= 1:
        raise ContractionError(f"contraction required: rho = {rho} >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")

    def tail(k: int) -> float:
        if sampler.mode == "wbp":
            lead = sampler.abs_mean_q * rho if root is None else (
                root.mean_n * sampler.abs_mean_c * sampler.abs_mean_q
            )
        else:
            head = sampler.mean_n if root is None else root.mean_n
            lead = head * sampler.abs_mean_cq
        return lead * rho**k / (1.0 - rho)

    k = 0
    while tail(k) > eps:
        k += 1
        if k > 100_000:
            raise RuntimeError("truncation level search failed to converge")
    return k, tail(k)


def endogenous_r_sample(
    sampler: BranchingVectorSampler,
    eps: float,
    *,
    root: RootSampler | None = None,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    replication: int = 0,
) -> tuple[float, int, float]:
    """One draw of the endogenous fixed point, truncated at analytic accuracy eps.

    Returns (value, level_used, tail_bound).
    """
    values, k, bound = endogenous_r_batch(
        sampler, eps, 1, root=root, cap=cap, seed=seed, rep_start=replication
    )
    return float(values[0]), k, bound


def endogenous_r_batch(
    sampler: BranchingVectorSampler,
    eps: float,
    n_reps: int,
    *,
    root: RootSampler | None = None,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    rep_start: int = 0,
    backend: str | None = None,
):
    """n_reps draws of the truncated endogenous fixed point via the kernel."""
    k, bound = r_truncation_level(sampler, eps, root)
    spec = KernelSpec(
        a=sampler.side_program(),
        root_a=root.root_program() if root is not None else None,
    )
    impl = _kernel.get_backend(backend)
    parts = []
    start = rep_start
    remaining = n_reps
    while remaining > 0:
        size = min(_kernel.DEFAULT_CHUNK, remaining)
        w = impl.run_chunk(spec, seed, start, size, k, cap)[0]
        parts.append(w.sum(axis=1))
        start += size
        remaining -= size
    return np.concatenate(parts), k, bound


def w_batch(
    sampler: BranchingVectorSampler,
    depth: int,
    n_reps: int,
    *,
    root: RootSampler | None = None,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    homogeneous: bool = False,
    backend: str | None = None,
) -> np.ndarray:
    """(n_reps, depth+1) level sums W (or mark-free sums when homogeneous)."""
    if root is not None and sampler.mode == "wbp" and sampler.is_table:
        raise ValueError("delayed roots are not supported for process-form tables")
    if homogeneous and not sampler.nonnegative_weights:
        raise ValueError("homogeneous process requires nonnegative weights")
    spec = KernelSpec(
        a=sampler.side_program(),
        root_a=root.root_program() if root is not None else None,
    )
    w, h, z, *_ = _kernel.run_batch(spec, seed, n_reps, depth, cap, backend=backend)
    if homogeneous:
        h[:, 0] = 1.0
        return h
    return w
