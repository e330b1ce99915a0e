"""Coupled tree growth and certification of the expectation bounds.

A CoupledSampler grows two branching realizations on shared node streams
under a declared joint law of the generic vectors (identity, componentwise
quantile, independent, or an explicit finite pair table; tree form adds a
separate root coupling). `certify` then checks the Monte Carlo level gaps
E|W_hat - W| against the closed-form bounds, with exact coupling constants
whenever the marginals allow exhaustive summation and Monte Carlo estimates
(with propagated standard errors) otherwise.

Convention: side A carries the un-hatted (limit) law, side B the hatted one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from ._kernel.spec import (
    CPL_INDEPENDENT,
    CPL_PAIR_TABLE,
    CPL_SHARED,
    KernelSpec,
    PairProgram,
    RootPairProgram,
)
from .branching import (
    DEFAULT_CAP,
    BranchingVectorSampler,
    NodeIndex,
    RootSampler,
    TreeRealization,
    WBPVector,
    WBTVector,
)
from .distributions import Geometric, comonotone_abs_diff, independent_abs_diff
from .rngkeys import KeyedStream, mix64

_TAIL_EPS = 1e-17
KIND_IDENTITY = "identity"
KIND_QUANTILE = "quantile"
KIND_INDEPENDENT = "independent"
KIND_PAIR = "pair_table"


class CoupledSampler:
    """Joint law of two generic branching vectors plus an optional root coupling."""

    def __init__(
        self,
        mode: str,
        kind: str,
        a: BranchingVectorSampler | None = None,
        b: BranchingVectorSampler | None = None,
        pair=None,  # (probs, atoms_a, atoms_b) for pair-table kind
        root_a: RootSampler | None = None,
        root_b: RootSampler | None = None,
        root_kind: str | None = None,
        root_pair=None,  # (probs, (q,n) atoms_a, (q,n) atoms_b)
    ):
        if mode not in ("wbp", "wbt"):
            raise ValueError("mode must be 'wbp' or 'wbt'")
        if kind not in (KIND_IDENTITY, KIND_QUANTILE, KIND_INDEPENDENT, KIND_PAIR):
            raise ValueError(f"unknown coupling kind {kind!r}")
        self.mode = mode
        self.kind = kind
        self.pair = pair
        self.root_a = root_a
        self.root_b = root_b
        self.root_kind = root_kind or (kind if kind != KIND_PAIR else KIND_QUANTILE)
        self.root_pair = root_pair
        if kind == KIND_PAIR:
            if pair is None:
                raise ValueError("pair-table coupling needs the pair table")
            probs, atoms_a, atoms_b = pair
            self.a = _marginal_from_atoms(mode, probs, atoms_a)
            self.b = _marginal_from_atoms(mode, probs, atoms_b)
        else:
            if a is None or b is None:
                raise ValueError("need both marginal samplers")
            if a.mode != mode or b.mode != mode:
                raise ValueError("marginal samplers must match the coupling mode")
            if kind == KIND_QUANTILE and (a.is_table != b.is_table):
                raise ValueError(
                    "componentwise quantile coupling needs structurally matching sides"
                )
            self.a = a
            self.b = b
        if (root_a is None) != (root_b is None):
            raise ValueError("delayed roots must be declared on both sides")
        if root_pair is not None and root_a is not None:
            raise ValueError("declare either root samplers or a root pair table")
        if mode == "wbp" and self.a.is_table and (root_a is not None or root_pair is not None):
            raise ValueError("delayed roots are not supported for process-form tables")

    @property
    def delayed(self) -> bool:
        return self.root_a is not None or self.root_pair is not None

    # --- kernel compilation -------------------------------------------------

    def kernel_spec(self) -> KernelSpec:
        coupling = {
            KIND_IDENTITY: CPL_SHARED,
            KIND_QUANTILE: CPL_SHARED,
            KIND_INDEPENDENT: CPL_INDEPENDENT,
            KIND_PAIR: CPL_PAIR_TABLE,
        }[self.kind]
        pair_prog = None
        if self.kind == KIND_PAIR:
            pair_prog = _pair_program(self.mode, *self.pair)
        root_cpl = {
            KIND_IDENTITY: CPL_SHARED,
            KIND_QUANTILE: CPL_SHARED,
            KIND_INDEPENDENT: CPL_INDEPENDENT,
            KIND_PAIR: CPL_PAIR_TABLE,
        }[self.root_kind]
        root_pair_prog = None
        if self.root_pair is not None:
            probs, ra, rb = self.root_pair
            cum = np.cumsum(np.asarray(probs, float))
            cum[-1] = 1.0
            root_pair_prog = RootPairProgram(
                cum=cum,
                qa=np.array([a[0] for a in ra], float),
                na=np.array([a[1] for a in ra], np.int64),
                qb=np.array([b[0] for b in rb], float),
                nb=np.array([b[1] for b in rb], np.int64),
            )
        return KernelSpec(
            a=self.a.side_program(),
            coupled=True,
            coupling=coupling,
            b=self.b.side_program() if self.kind != KIND_PAIR else None,
            pair=pair_prog,
            root_a=self.root_a.root_program() if self.root_a else None,
            root_b=self.root_b.root_program() if self.root_b else None,
            root_coupling=root_cpl,
            root_pair=root_pair_prog,
        )

    # --- scalar draws ---------------------------------------------------------

    def draw(self, stream: KeyedStream):
        """One joint draw of the two generic vectors (non-root law)."""
        if self.kind == KIND_PAIR:
            probs, atoms_a, atoms_b = self.pair
            cum = np.cumsum(np.asarray(probs, float))
            cum[-1] = 1.0
            idx = min(int(np.searchsorted(cum, stream.uniform_at(0), "left")), len(probs) - 1)
            return _vector_from_atom(self.mode, atoms_a[idx]), _vector_from_atom(
                self.mode, atoms_b[idx]
            )
        vec_a = self.a.draw(stream)
        if self.kind == KIND_INDEPENDENT:
            vec_b = self.b.draw(stream.independent_twin())
        else:
            vec_b = self.b.draw(stream)
        return vec_a, vec_b

    def draw_root(self, stream: KeyedStream):
        """One joint draw of the root (Q, N) pair under the root coupling."""
        if self.root_pair is not None:
            probs, ra, rb = self.root_pair
            cum = np.cumsum(np.asarray(probs, float))
            cum[-1] = 1.0
            idx = min(int(np.searchsorted(cum, stream.uniform_at(0), "left")), len(probs) - 1)
            return tuple(ra[idx]), tuple(rb[idx])
        if self.root_a is not None:
            qa, na = self.root_a.draw(stream)
            sb = stream.independent_twin() if self.root_kind == KIND_INDEPENDENT else stream
            qb, nb = self.root_b.draw(sb)
            return (qa, na), (qb, nb)
        va, vb = (
            self.draw(stream)
            if self.kind != KIND_INDEPENDENT
            else (self.a.draw(stream), self.b.draw(stream.independent_twin()))
        )
        return (va.q, va.n), (vb.q, vb.n)


def _marginal_from_atoms(mode, probs, atoms) -> BranchingVectorSampler:
    from .branching import wbp_table_sampler, wbt_table_sampler

    merged: dict[tuple, float] = {}
    for p, atom in zip(probs, atoms):
        key = (float(atom[0]), int(atom[1]), tuple(np.atleast_1d(atom[2]).tolist()))
        if mode == "wbt":
            key = (float(atom[0]), int(atom[1]), float(atom[2]))
        merged[key] = merged.get(key, 0.0) + float(p)
    keys = list(merged)
    ps = [merged[k] for k in keys]
    if mode == "wbt":
        return wbt_table_sampler(keys, ps)
    return wbp_table_sampler([(q, n, list(row)) for q, n, row in keys], ps)


def _vector_from_atom(mode, atom):
    if mode == "wbt":
        return WBTVector(float(atom[0]), int(atom[1]), float(atom[2]))
    return WBPVector(float(atom[0]), int(atom[1]), tuple(float(w) for w in atom[2]))


def _pair_program(mode, probs, atoms_a, atoms_b) -> PairProgram:
    cum = np.cumsum(np.asarray(probs, float))
    cum[-1] = 1.0
    qa = np.array([a[0] for a in atoms_a], float)
    na = np.array([a[1] for a in atoms_a], np.int64)
    qb = np.array([b[0] for b in atoms_b], float)
    nb = np.array([b[1] for b in atoms_b], np.int64)
    if mode == "wbt":
        return PairProgram(
            is_wbp=False,
            cum=cum,
            qa=qa,
            na=na,
            qb=qb,
            nb=nb,
            ca=np.array([a[2] for a in atoms_a], float),
            cb=np.array([b[2] for b in atoms_b], float),
        )
    rows_a = [tuple(a[2]) for a in atoms_a]
    rows_b = [tuple(b[2]) for b in atoms_b]
    for n_val, row in zip(na, rows_a):
        if len(row) != n_val:
            raise ValueError("pair atom weight row does not match its n")
    for n_val, row in zip(nb, rows_b):
        if len(row) != n_val:
            raise ValueError("pair atom weight row does not match its n")
    aoff = np.concatenate([[0], np.cumsum([len(r) for r in rows_a])])[:-1].astype(np.int64)
    boff = np.concatenate([[0], np.cumsum([len(r) for r in rows_b])])[:-1].astype(np.int64)
    aflat = np.array([w for r in rows_a for w in r], float)
    bflat = np.array([w for r in rows_b for w in r], float)
    return PairProgram(
        is_wbp=True, cum=cum, qa=qa, na=na, qb=qb, nb=nb,
        aoff=aoff, aflat=aflat, boff=boff, bflat=bflat,
    )


# --- convenience constructors -------------------------------------------------


def identity_coupling(sampler, root=None) -> CoupledSampler:
    return CoupledSampler(
        sampler.mode, KIND_IDENTITY, sampler, sampler, root_a=root, root_b=root
    )


def quantile_coupled(a, b, root_a=None, root_b=None) -> CoupledSampler:
    return CoupledSampler(a.mode, KIND_QUANTILE, a, b, root_a=root_a, root_b=root_b)


def independent_coupled(a, b, root_a=None, root_b=None) -> CoupledSampler:
    return CoupledSampler(a.mode, KIND_INDEPENDENT, a, b, root_a=root_a, root_b=root_b)


def pair_table_coupled(mode, probs, atoms_a, atoms_b, root_pair=None) -> CoupledSampler:
    return CoupledSampler(mode, KIND_PAIR, pair=(probs, atoms_a, atoms_b), root_pair=root_pair)


# --- coupled growth -------------------------------------------------------------


def grow_coupled(
    cs: CoupledSampler,
    depth: int,
    *,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    replication: int = 0,
) -> tuple[TreeRealization, TreeRealization]:
    """Grow both trees on shared node streams, returning full realizations."""
    cs.kernel_spec()  # surface table/row inconsistencies before growing
    root = NodeIndex()
    stream = KeyedStream.for_root(seed, replication)
    # per-node records: (node, stream, pi_a, alive_a, pi_b, alive_b)
    frontier = [(root, stream, 1.0, True, 1.0, True)]
    sides = (
        {"weight": {root: 1.0}, "mark": {}, "edge": {}, "offspring": {}, "gens": [[root]]},
        {"weight": {root: 1.0}, "mark": {}, "edge": {}, "offspring": {}, "gens": [[root]]},
    )
    total = 1
    for level in range(depth + 1):
        next_frontier = []
        for node, s, pi_a, al_a, pi_b, al_b in frontier:
            if node.level == 0 and cs.delayed:
                (qa, na), (qb, nb) = cs.draw_root(s)
                row_a = row_b = None
                vec_a = vec_b = None
            else:
                vec_a, vec_b = cs.draw(s)
                qa, na = vec_a.q, vec_a.n
                qb, nb = vec_b.q, vec_b.n
                row_a = vec_a.weights if isinstance(vec_a, WBPVector) else None
                row_b = vec_b.weights if isinstance(vec_b, WBPVector) else None
            if al_a:
                sides[0]["mark"][node] = qa
                sides[0]["offspring"][node] = na
            if al_b:
                sides[1]["mark"][node] = qb
                sides[1]["offspring"][node] = nb
            if level == depth:
                continue
            n_eff_a = na if al_a else 0
            n_eff_b = nb if al_b else 0
            for i in range(1, max(n_eff_a, n_eff_b) + 1):
                child = node.child(i)
                child_stream = s.child(i)
                ca = cb = None
                c_al_a = i <= n_eff_a
                c_al_b = i <= n_eff_b
                if c_al_a:
                    ca = _edge_weight(cs, "a", s, child_stream, row_a, i)
                    sides[0]["edge"][child] = ca
                    sides[0]["weight"][child] = pi_a * ca
                if c_al_b:
                    cb = _edge_weight(cs, "b", s, child_stream, row_b, i)
                    sides[1]["edge"][child] = cb
                    sides[1]["weight"][child] = pi_b * cb
                next_frontier.append(
                    (child, child_stream, pi_a * ca if c_al_a else 0.0, c_al_a,
                     pi_b * cb if c_al_b else 0.0, c_al_b)
                )
        total += len(next_frontier)
        if total > cap:
            from .errors import ExplosionCapError

            raise ExplosionCapError(level + 1, total, cap)
        if level < depth:
            for side_idx in (0, 1):
                sides[side_idx]["gens"].append(
                    [rec[0] for rec in next_frontier if rec[3 if side_idx == 0 else 5]]
                )
            frontier = next_frontier

    trees = []
    for side in sides:
        alive = set()
        for gen in side["gens"]:
            alive.update(gen)
        trees.append(
            TreeRealization(
                depth=depth,
                generations=tuple(tuple(g) for g in side["gens"]),
                weight={k: v for k, v in side["weight"].items() if k in alive},
                mark={k: v for k, v in side["mark"].items() if k in alive},
                edge={k: v for k, v in side["edge"].items() if k in alive},
                offspring={k: v for k, v in side["offspring"].items() if k in alive},
            )
        )
    return trees[0], trees[1]


def _edge_weight(cs, side, parent_stream, child_stream, row, i):
    """Scalar mirror of the kernels' child-weight rules."""
    if cs.kind == KIND_PAIR:
        probs, atoms_a, atoms_b = cs.pair
        if cs.mode == "wbp":
            atoms = atoms_a if side == "a" else atoms_b
            cum = np.cumsum(np.asarray(probs, float))
            cum[-1] = 1.0
            idx = min(
                int(np.searchsorted(cum, parent_stream.uniform_at(0), "left")), len(probs) - 1
            )
            return float(atoms[idx][2][i - 1])
        cum = np.cumsum(np.asarray(probs, float))
        cum[-1] = 1.0
        idx = min(int(np.searchsorted(cum, child_stream.uniform_at(0), "left")), len(probs) - 1)
        return float((atoms_a if side == "a" else atoms_b)[idx][2])
    sampler = cs.a if side == "a" else cs.b
    salt_node = cs.kind == KIND_INDEPENDENT and side == "b"
    if sampler.mode == "wbp":
        if row is not None:
            return float(row[i - 1])
        dk = parent_stream.independent_twin() if salt_node else parent_stream
        return sampler.c.icdf(dk.uniform_at(1 + i))
    cstream = child_stream.independent_twin() if salt_node else child_stream
    if sampler.is_table:
        vec = sampler.draw(cstream)
        return vec.c
    return sampler.c.icdf(cstream.uniform_at(2))


# --- coupling constants ---------------------------------------------------------


@dataclass(frozen=True)
class CouplingConstants:
    """Constants entering the level-gap bounds; B side carries the hats."""

    mode: str
    rho: float
    rho_hat: float
    abs_mean_q: float
    e: float
    e_se: float = 0.0
    mean_n: float | None = None
    mean_n_hat: float | None = None
    abs_mean_cq: float | None = None
    e_star: float | None = None
    e_star_se: float = 0.0
    exact: bool = True

    def __post_init__(self):
        for name in ("rho", "rho_hat", "abs_mean_q", "e"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        slack = 1e-9 + 3.0 * self.e_se
        if abs(self.rho_hat - self.rho) > self.e + slack:
            raise ValueError(
                f"|rho_hat - rho| = {abs(self.rho_hat - self.rho)} exceeds E = {self.e}; "
                "the declared joint law cannot have these marginals"
            )


def process_gap_bound(cc: CouplingConstants, j: int) -> float:
    """Process-form gap bound: (rho_hat^j + E|Q| sum_t rho^t rho_hat^(j-1-t)) * E."""
    if j < 0:
        raise ValueError("level must be nonnegative")
    geom = sum(cc.rho**t * cc.rho_hat ** (j - 1 - t) for t in range(j))
    return (cc.rho_hat**j + cc.abs_mean_q * geom) * cc.e


def tree_gap_bound(cc: CouplingConstants, j: int, variant: str = "max") -> float:
    """Tree-form gap bound; `variant` picks the root-term constant.

    Two root-term constants are in circulation for this bound: 'statement'
    uses E|Q|, 'proof' uses E|CQ|. Both are computed and certified rather
    than silently picking a side; 'max' takes the larger.
    """
    if j < 0:
        raise ValueError("level must be nonnegative")
    if cc.mode != "wbt":
        raise ValueError("tree-form constants required")
    if variant not in ("statement", "proof", "max"):
        raise ValueError("variant must be statement | proof | max")
    if j == 0:
        return cc.e_star
    if cc.rho == 0.0 and cc.abs_mean_cq > 0.0:
        raise ValueError("rho = 0 with E|CQ| > 0: the ratio constant is undefined")
    ratio = 0.0 if cc.abs_mean_cq == 0.0 else cc.mean_n * cc.abs_mean_cq / cc.rho
    lead = max(cc.mean_n_hat, ratio)
    geom = sum(cc.rho_hat**t * cc.rho ** (j - 1 - t) for t in range(j))
    core = lead * geom * cc.e
    tail_stmt = cc.abs_mean_q * cc.rho_hat ** (j - 1) * cc.e_star
    tail_proof = cc.abs_mean_cq * cc.rho_hat ** (j - 1) * cc.e_star
    if variant == "statement":
        return core + tail_stmt
    if variant == "proof":
        return core + tail_proof
    return core + max(tail_stmt, tail_proof)


def _bound_sensitivity(cc: CouplingConstants, j: int) -> tuple[float, float]:
    """(dBound/dE, dBound/dE*) used to propagate Monte Carlo error on the constants."""
    if cc.mode == "wbp":
        geom = sum(cc.rho**t * cc.rho_hat ** (j - 1 - t) for t in range(j))
        return cc.rho_hat**j + cc.abs_mean_q * geom, 0.0
    if j == 0:
        return 0.0, 1.0
    ratio = 0.0 if cc.abs_mean_cq == 0.0 else cc.mean_n * cc.abs_mean_cq / cc.rho
    lead = max(cc.mean_n_hat, ratio)
    geom = sum(cc.rho_hat**t * cc.rho ** (j - 1 - t) for t in range(j))
    tail_coef = max(cc.abs_mean_q, cc.abs_mean_cq) * cc.rho_hat ** (j - 1)
    return lead * geom, tail_coef


# --- exact constant computation ---------------------------------------------------


def _comonotone_pairs(ax, ap, bx, bp):
    """Atoms of the comonotone coupling of two finite laws: (xa, xb, w) triples."""
    ca = np.cumsum(np.asarray(ap, float))
    cb = np.cumsum(np.asarray(bp, float))
    ca[-1] = cb[-1] = 1.0
    grid = np.union1d(ca, cb)
    out = []
    prev = 0.0
    for g in grid:
        w = g - prev
        if w > 0:
            mid = 0.5 * (prev + g)
            ia = min(int(np.searchsorted(ca, mid, "left")), len(ax) - 1)
            ib = min(int(np.searchsorted(cb, mid, "left")), len(bx) - 1)
            out.append((ax[ia], bx[ib], w))
        prev = g
    return out


def _prims_weight_sum(n_a, n_b, c_a, c_b, kind) -> float | None:
    """sum_i E|B_hat_i - B_i| for primitive sides under the slot coupling."""
    if kind == KIND_QUANTILE:
        d_c = comonotone_abs_diff(c_a, c_b)
    else:
        d_c = independent_abs_diff(c_a, c_b)
    if d_c is None:
        return None
    abs_a, abs_b = c_a.abs_mean, c_b.abs_mean
    total = 0.0
    i = 1
    while True:
        pa, pb = n_a.tail_ge(i), n_b.tail_ge(i)
        if pa < _TAIL_EPS and pb < _TAIL_EPS:
            break
        if kind == KIND_QUANTILE:
            both = min(pa, pb)
        else:
            both = pa * pb
        total += both * d_c + (pa - both) * abs_a + (pb - both) * abs_b
        i += 1
        if i > 10_000_000:
            raise RuntimeError("weight-sum iteration failed to converge")
    return total


def _wbp_vector_rows(sampler):
    """(prob, q, weight-row) atoms of a process-form table sampler."""
    probs, q_atoms, n_atoms, rows = sampler.table
    return list(zip(probs, q_atoms, rows))


def _row_gap(row_a, row_b) -> float:
    la, lb = len(row_a), len(row_b)
    total = 0.0
    for i in range(max(la, lb)):
        wa = row_a[i] if i < la else 0.0
        wb = row_b[i] if i < lb else 0.0
        total += abs(wb - wa)
    return total


def _wbt_atom_gap(qa, na, ca, qb, nb, cb) -> float:
    """|cb qb - ca qa| + sum_i |cb 1(nb>=i) - ca 1(na>=i)| in closed form."""
    return (
        abs(cb * qb - ca * qa)
        + abs(cb - ca) * min(na, nb)
        + abs(cb) * max(nb - na, 0)
        + abs(ca) * max(na - nb, 0)
    )


def _exact_e(cs: CoupledSampler) -> float | None:
    """E under the declared coupling, or None when no exact path applies."""
    if cs.kind == KIND_IDENTITY:
        return 0.0
    a, b = cs.a, cs.b
    if cs.kind == KIND_PAIR:
        probs, atoms_a, atoms_b = cs.pair
        total = 0.0
        for p, at_a, at_b in zip(probs, atoms_a, atoms_b):
            if cs.mode == "wbt":
                total += p * _wbt_atom_gap(at_a[0], at_a[1], at_a[2], at_b[0], at_b[1], at_b[2])
            else:
                total += p * (abs(at_b[0] - at_a[0]) + _row_gap(at_a[2], at_b[2]))
        return total
    if a.is_table != b.is_table:
        return None
    if a.is_table:
        if cs.kind != KIND_QUANTILE and cs.kind != KIND_INDEPENDENT:
            return None
        pa, qa, na, third_a = a.table
        pb, qb, nb, third_b = b.table
        if cs.kind == KIND_QUANTILE:
            idx_pairs = _comonotone_pairs(np.arange(len(pa)), pa, np.arange(len(pb)), pb)
            pairs = [(w, int(ia), int(ib)) for ia, ib, w in idx_pairs]
        else:
            pairs = [
                (wa * wb, ia, ib)
                for ia, wa in enumerate(pa)
                for ib, wb in enumerate(pb)
            ]
        total = 0.0
        for w, ia, ib in pairs:
            if cs.mode == "wbt":
                total += w * _wbt_atom_gap(
                    qa[ia], na[ia], third_a[ia], qb[ib], nb[ib], third_b[ib]
                )
            else:
                total += w * (abs(qb[ib] - qa[ia]) + _row_gap(third_a[ia], third_b[ib]))
        return total
    # primitive sides
    fn = comonotone_abs_diff if cs.kind == KIND_QUANTILE else independent_abs_diff
    d_q = fn(a.q, b.q)
    if d_q is None:
        return None
    if cs.mode == "wbp":
        s = _prims_weight_sum(a.n, b.n, a.c, b.c, cs.kind)
        return None if s is None else d_q + s
    # tree form with independent components: E|CQ - C^Q^| + indicator sum
    d_cq = _exact_cq_gap(a, b, cs.kind)
    if d_cq is None:
        return None
    s = _prims_weight_sum(a.n, b.n, a.c, b.c, cs.kind)
    return None if s is None else d_cq + s


def _exact_cq_gap(a, b, kind) -> float | None:
    """E|C_b Q_b - C_a Q_a| when (Q, C) are independent primitives per side."""
    qt_a, qt_b = a.q.as_table(), b.q.as_table()
    ct_a, ct_b = a.c.as_table(), b.c.as_table()
    if any(t is None for t in (qt_a, qt_b, ct_a, ct_b)):
        return None
    if any(isinstance(p, Geometric) for p in (a.q, b.q, a.c, b.c)):
        return None  # folded tail atoms would bias the product law
    if kind == KIND_QUANTILE:
        q_pairs = _comonotone_pairs(*qt_a, *qt_b)
        c_pairs = _comonotone_pairs(*ct_a, *ct_b)
    else:
        q_pairs = [
            (xa, xb, wa * wb)
            for xa, wa in zip(*qt_a)
            for xb, wb in zip(*qt_b)
        ]
        c_pairs = [
            (xa, xb, wa * wb)
            for xa, wa in zip(*ct_a)
            for xb, wb in zip(*ct_b)
        ]
    total = 0.0
    for qa, qb, wq in q_pairs:
        for ca, cb, wc in c_pairs:
            total += wq * wc * abs(cb * qb - ca * qa)
    return total


def _exact_e_star(cs: CoupledSampler) -> float | None:
    """E* = E|Q_hat - Q| + |N_hat - N| under the root coupling."""
    if cs.root_pair is not None:
        probs, ra, rb = cs.root_pair
        return float(
            sum(
                p * (abs(b[0] - a[0]) + abs(b[1] - a[1]))
                for p, a, b in zip(probs, ra, rb)
            )
        )
    if cs.root_a is not None:
        qa, na_, qb, nb_ = cs.root_a.q, cs.root_a.n, cs.root_b.q, cs.root_b.n
        if cs.root_a.table is not None or cs.root_b.table is not None:
            if cs.root_a.table is None or cs.root_b.table is None:
                return None
            pa, qat, nat = cs.root_a.table
            pb, qbt, nbt = cs.root_b.table
            if cs.root_kind == KIND_QUANTILE or cs.root_kind == KIND_IDENTITY:
                idx_pairs = _comonotone_pairs(np.arange(len(pa)), pa, np.arange(len(pb)), pb)
                return float(
                    sum(
                        w * (abs(qbt[ib] - qat[ia]) + abs(nbt[ib] - nat[ia]))
                        for ia, ib, w in ((int(x), int(y), z) for x, y, z in idx_pairs)
                    )
                )
            return float(
                sum(
                    wa * wb * (abs(qv_b - qv_a) + abs(nv_b - nv_a))
                    for qv_a, nv_a, wa in zip(qat, nat, pa)
                    for qv_b, nv_b, wb in zip(qbt, nbt, pb)
                )
            )
        fn = (
            comonotone_abs_diff
            if cs.root_kind in (KIND_QUANTILE, KIND_IDENTITY)
            else independent_abs_diff
        )
        d_q = fn(qa, qb)
        d_n = fn(na_, nb_)
        if d_q is None or d_n is None:
            return None
        return d_q + d_n
    # undelayed roots: restrict the node coupling to (Q, N)
    if cs.kind == KIND_IDENTITY:
        return 0.0
    if cs.kind == KIND_PAIR:
        probs, atoms_a, atoms_b = cs.pair
        return float(
            sum(
                p * (abs(b[0] - a[0]) + abs(b[1] - a[1]))
                for p, a, b in zip(probs, atoms_a, atoms_b)
            )
        )
    a, b = cs.a, cs.b
    if a.is_table != b.is_table:
        return None
    if a.is_table:
        pa, qat, nat, _ = a.table
        pb, qbt, nbt, _ = b.table
        if cs.kind == KIND_QUANTILE:
            idx_pairs = _comonotone_pairs(np.arange(len(pa)), pa, np.arange(len(pb)), pb)
            return float(
                sum(
                    w * (abs(qbt[int(ib)] - qat[int(ia)]) + abs(nbt[int(ib)] - nat[int(ia)]))
                    for ia, ib, w in idx_pairs
                )
            )
        return float(
            sum(
                wa * wb * (abs(qv_b - qv_a) + abs(nv_b - nv_a))
                for qv_a, nv_a, wa in zip(qat, nat, pa)
                for qv_b, nv_b, wb in zip(qbt, nbt, pb)
            )
        )
    fn = comonotone_abs_diff if cs.kind == KIND_QUANTILE else independent_abs_diff
    d_q = fn(a.q, b.q)
    d_n = fn(a.n, b.n)
    if d_q is None or d_n is None:
        return None
    return d_q + d_n


def _mc_vector_gaps(cs: CoupledSampler, n_samples: int, seed: int):
    """Per-draw E-contributions (and root contributions) by simulation."""
    e_vals = np.empty(n_samples)
    estar_vals = np.empty(n_samples)
    base = mix64(seed ^ 0x5EED5EED5EED5EED)
    for r in range(n_samples):
        stream = KeyedStream.for_root(base, r)
        va, vb = cs.draw(stream)
        if cs.mode == "wbt":
            e_vals[r] = _wbt_atom_gap(va.q, va.n, va.c, vb.q, vb.n, vb.c)
        else:
            e_vals[r] = abs(vb.q - va.q) + _row_gap(va.weights, vb.weights)
        (qa, na), (qb, nb) = cs.draw_root(stream)
        estar_vals[r] = abs(qb - qa) + abs(nb - na)
    return e_vals, estar_vals


def coupling_constants(
    cs: CoupledSampler, n_mc: int = 200_000, seed: int = 0
) -> CouplingConstants:
    """Assemble the bound constants, exactly when possible, else via Monte Carlo."""
    e = _exact_e(cs)
    e_star = _exact_e_star(cs) if cs.mode == "wbt" else None
    exact = e is not None and (cs.mode == "wbp" or e_star is not None)
    e_se = 0.0
    e_star_se = 0.0
    if not exact:
        e_vals, estar_vals = _mc_vector_gaps(cs, n_mc, seed)
        if e is None:
            e = float(e_vals.mean())
            e_se = float(e_vals.std(ddof=1) / math.sqrt(n_mc))
        if cs.mode == "wbt" and e_star is None:
            e_star = float(estar_vals.mean())
            e_star_se = float(estar_vals.std(ddof=1) / math.sqrt(n_mc))
    kwargs = dict(
        mode=cs.mode,
        rho=cs.a.rho,
        rho_hat=cs.b.rho,
        abs_mean_q=cs.a.abs_mean_q,
        e=e,
        e_se=e_se,
        exact=exact,
    )
    if cs.mode == "wbt":
        kwargs.update(
            mean_n=cs.a.mean_n,
            mean_n_hat=cs.b.mean_n,
            abs_mean_cq=cs.a.abs_mean_cq,
            e_star=e_star,
            e_star_se=e_star_se,
        )
    return CouplingConstants(**kwargs)


# --- gap estimation and certification ------------------------------------------


def coupled_w_batch(
    cs: CoupledSampler,
    depth: int,
    n_reps: int,
    *,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    backend: str | None = None,
):
    """(wA, wB) matrices of level sums over coupled replications."""
    spec = cs.kernel_spec()
    wA, _, _, wB, _, _ = _kernel.run_batch(spec, seed, n_reps, depth, cap, backend=backend)
    return wA, wB

def mean_abs_gap_curve(
    cs: CoupledSampler,
    depth: int,
    n_reps: int,
    *,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    backend: str | None = None,
):
    """Mean and SE of |W_hat - W| for every level 0..depth."""
    if n_reps < 2:
        raise ValueError("need at least 2 replications")
    wA, wB = coupled_w_batch(cs, depth, n_reps, cap=cap, seed=seed, backend=backend)
    # reduce over contiguous columns so constant gaps give exactly zero spread
    gaps = np.ascontiguousarray(np.abs(wB - wA).T)
    means = gaps.mean(axis=1)
    ses = gaps.std(axis=1, ddof=1) / math.sqrt(n_reps)
    return means, ses


def mean_abs_gap(
    cs: CoupledSampler,
    j: int,
    n_reps: int,
    *,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    backend: str | None = None,
) -> tuple[float, float]:
    means, ses = mean_abs_gap_curve(cs, j, n_reps, cap=cap, seed=seed, backend=backend)
    return float(means[j]), float(ses[j])


@dataclass(frozen=True)
class CertificationRow:
    j: int
    gap: float
    gap_se: float
    bound: float
    bound_statement: float | None
    bound_proof: float | None
    slack: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "j": self.j,
            "gap": self.gap,
            "gap_se": self.gap_se,
            "bound": self.bound,
            "bound_statement": self.bound_statement,
            "bound_proof": self.bound_proof,
            "slack": self.slack,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class CertificationReport:
    mode: str
    constants: CouplingConstants
    rows: tuple
    n_reps: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_rows(self) -> list[dict]:
        return [r.as_dict() for r in self.rows]

    def __str__(self):
        cc = self.constants
        head = (
            f"{self.mode} certification: rho={cc.rho:.6g} rho_hat={cc.rho_hat:.6g} "
            f"E={cc.e:.6g}" + (f" E*={cc.e_star:.6g}" if cc.e_star is not None else "")
        )
        lines = [head]
        for r in self.rows:
            lines.append(
                f"  j={r.j:2d} gap={r.gap:.6g} (se {r.gap_se:.2g}) "
                f"bound={r.bound:.6g} {'PASS' if r.passed else 'FAIL'}"
            )
        return "\n".join(lines)


def certify(
    cs: CoupledSampler,
    j_max: int,
    n_reps: int,
    *,
    cap: int = DEFAULT_CAP,
    seed: int = 0,
    n_mc_constants: int = 200_000,
    backend: str | None = None,
) -> CertificationReport:
    """Check the level-gap bounds at j = 0..j_max with 3-sigma total slack.

    A genuine violation indicates an implementation bug: the bounds hold for
    every coupling of the declared marginals.
    """
    cc = coupling_constants(cs, n_mc=n_mc_constants, seed=seed + 1)
    means, ses = mean_abs_gap_curve(cs, j_max, n_reps, cap=cap, seed=seed, backend=backend)
    rows = []
    for j in range(j_max + 1):
        if cs.mode == "wbp":
            bound = process_gap_bound(cc, j)
            b_stmt = b_proof = None
        else:
            b_stmt = tree_gap_bound(cc, j, "statement")
            b_proof = tree_gap_bound(cc, j, "proof")
            bound = max(b_stmt, b_proof)
        de, de_star = _bound_sensitivity(cc, j)
        slack = 3.0 * math.sqrt(
            ses[j] ** 2 + (de * cc.e_se) ** 2 + (de_star * cc.e_star_se) ** 2
        ) + 1e-12
        rows.append(
            CertificationRow(
                j=j,
                gap=float(means[j]),
                gap_se=float(ses[j]),
                bound=bound,
                bound_statement=b_stmt,
                bound_proof=b_proof,
                slack=slack,
                passed=bool(means[j] <= bound + slack),
            )
        )
    return CertificationReport(mode=cs.mode, constants=cc, rows=tuple(rows), n_reps=n_reps)
