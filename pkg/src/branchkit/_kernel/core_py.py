"""Numpy growth kernel: batches replications generation by generation.

Per-replication results depend only on (seed, replication index), never on
batch boundaries, and per-generation sums accumulate in breadth-first node
order, matching the compiled backend bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..errors import ExplosionCapError
from ..rngkeys import (
    child_keys_np,
    draw_uniforms_np,
    draw_uniforms_slots_np,
    indep_keys_np,
    root_keys_np,
)
from .spec import (
    CPL_INDEPENDENT,
    CPL_PAIR_TABLE,
    FAM_WBP_PRIMS,
    FAM_WBP_TABLE,
    FAM_WBT_PRIMS,
    FAM_WBT_TABLE,
    ROOT_PRIMS,
    KernelSpec,
)

BACKEND = "py"


def _icdf(code: int, par: np.ndarray, u: np.ndarray) -> np.ndarray:
    if code == 0:
        return np.full(u.shape, par[0])
    if code == 1:
        k = par.size // 2
        idx = np.searchsorted(par[:k], u, side="left")
        np.clip(idx, 0, k - 1, out=idx)
        return par[k:][idx]
    if code == 2:
        return par[0] + u * (par[1] - par[0])
    if code == 3:
        p, start = par[0], par[1]
        if p >= 1.0:
            return np.full(u.shape, start)
        return start + np.floor(np.log1p(-u) / np.log1p(-p))
    raise ValueError(f"unknown primitive code {code}")


def _locate(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cum, u, side="left")
    np.clip(idx, 0, cum.size - 1, out=idx)
    return idx


def _as_int(values: np.ndarray) -> np.ndarray:
    return np.rint(values).astype(np.int64)


def _draw_node(side, dkeys):
    """(q, n, atom_index_or_None) for nodes drawing their vector from `side`."""
    if side.fam in (FAM_WBP_PRIMS, FAM_WBT_PRIMS):
        q = _icdf(side.q_code, side.q_par, draw_uniforms_np(dkeys, 0))
        n = _as_int(_icdf(side.n_code, side.n_par, draw_uniforms_np(dkeys, 1)))
        return q, n, None
    idx = _locate(side.cum, draw_uniforms_np(dkeys, 0))
    return side.tq[idx], side.tn[idx], idx


def _draw_root(root, dkeys):
    if root.kind == ROOT_PRIMS:
        q = _icdf(root.q_code, root.q_par, draw_uniforms_np(dkeys, 0))
        n = _as_int(_icdf(root.n_code, root.n_par, draw_uniforms_np(dkeys, 1)))
        return q, n
    idx = _locate(root.cum, draw_uniforms_np(dkeys, 0))
    return root.tq[idx], root.tn[idx]


def _draw_level(spec: KernelSpec, keys, at_root):
    """Draw (q, n, atom) for both sides of the current generation.

    Returns (qA, nA, atomA, qB, nB, atomB, dkA, dkB) where dkX is the draw
    key each side used (needed for parent-held weight slots).
    """
    coupled = spec.coupled
    if at_root and spec.root_pair is not None:
        rp = spec.root_pair
        pidx = _locate(rp.cum, draw_uniforms_np(keys, 0))
        return rp.qa[pidx], rp.na[pidx], None, rp.qb[pidx], rp.nb[pidx], None, keys, keys
    if at_root and spec.root_a is not None:
        dkA = keys
        qA, nA = _draw_root(spec.root_a, dkA)
        qB = nB = None
        dkB = keys
        if coupled:
            dkB = indep_keys_np(keys) if spec.root_coupling == CPL_INDEPENDENT else keys
            qB, nB = _draw_root(spec.root_b, dkB)
        return qA, nA, None, qB, nB, None, dkA, dkB
    if coupled and spec.coupling == CPL_PAIR_TABLE:
        p = spec.pair
        pidx = _locate(p.cum, draw_uniforms_np(keys, 0))
        return p.qa[pidx], p.na[pidx], pidx, p.qb[pidx], p.nb[pidx], pidx, keys, keys
    qA, nA, atomA = _draw_node(spec.a, keys)
    qB = nB = atomB = None
    dkB = keys
    if coupled:
        dkB = indep_keys_np(keys) if spec.coupling == CPL_INDEPENDENT else keys
        qB, nB, atomB = _draw_node(spec.b, dkB)
    return qA, nA, atomA, qB, nB, atomB, keys, dkB


def _child_weights(spec, side_label, dk, atoms, ckeys, cdk, p_idx, i_idx, alive):
    """Per-child edge weights for one side; dead entries are arbitrary."""
    if spec.coupled and spec.coupling == CPL_PAIR_TABLE:
        pair = spec.pair
        if pair.is_wbp:
            # delayed roots are rejected for WBP pair tables, so parent atoms exist
            off, flat = (pair.aoff, pair.aflat) if side_label == "a" else (pair.boff, pair.bflat)
            safe = np.where(alive, off[atoms[p_idx]] + i_idx - 1, 0)
            return flat[safe]
        # WBT pair: the child's own pair atom carries both weights
        cidx = _locate(pair.cum, draw_uniforms_np(ckeys, 0))
        return (pair.ca if side_label == "a" else pair.cb)[cidx]
    side = spec.a if side_label == "a" else spec.b
    if side.fam == FAM_WBP_PRIMS:
        u = draw_uniforms_slots_np(dk[p_idx], 1 + i_idx)
        return _icdf(side.c_code, side.c_par, u)
    if side.fam == FAM_WBP_TABLE:
        safe = np.where(alive, side.woff[atoms[p_idx]] + i_idx - 1, 0)
        return side.wflat[safe]
    if side.fam == FAM_WBT_PRIMS:
        return _icdf(side.c_code, side.c_par, draw_uniforms_np(cdk, 2))
    if side.fam == FAM_WBT_TABLE:
        cidx = _locate(side.cum, draw_uniforms_np(cdk, 0))
        return side.tc[cidx]
    raise ValueError(f"unknown family {side.fam}")


def run_chunk(spec: KernelSpec, seed: int, rep_start: int, n_reps: int, depth: int, cap: int):
    """Grow `n_reps` (coupled) trees; returns per-(rep, level) statistics.

    Output arrays, each (n_reps, depth+1): wA = sum of Q*Pi over the level,
    hA = sum of Pi, zA = node count; B-side triple is None when uncoupled.
    """
    coupled = spec.coupled
    shape = (n_reps, depth + 1)
    wA = np.zeros(shape)
    hA = np.zeros(shape)
    zA = np.zeros(shape, dtype=np.int64)
    wB = np.zeros(shape) if coupled else None
    hB = np.zeros(shape) if coupled else None
    zB = np.zeros(shape, dtype=np.int64) if coupled else None

    keys = root_keys_np(seed, rep_start, n_reps)
    rep = np.arange(n_reps, dtype=np.int64)
    pi_a = np.ones(n_reps)
    alive_a = np.ones(n_reps, dtype=bool)
    pi_b = np.ones(n_reps) if coupled else None
    alive_b = np.ones(n_reps, dtype=bool) if coupled else None
    budget = np.ones(n_reps, dtype=np.int64)
    if cap < 1:
        raise ValueError("cap must be at least 1")

    for j in range(depth + 1):
        at_root = j == 0
        qA, nA, atomA, qB, nB, atomB, dkA, dkB = _draw_level(spec, keys, at_root)
        ma = alive_a
        wA[:, j] = np.bincount(rep[ma], weights=qA[ma] * pi_a[ma], minlength=n_reps)
        hA[:, j] = np.bincount(rep[ma], weights=pi_a[ma], minlength=n_reps)
        zA[:, j] = np.bincount(rep[ma], minlength=n_reps)
        if coupled:
            mb = alive_b
            wB[:, j] = np.bincount(rep[mb], weights=qB[mb] * pi_b[mb], minlength=n_reps)
            hB[:, j] = np.bincount(rep[mb], weights=pi_b[mb], minlength=n_reps)
            zB[:, j] = np.bincount(rep[mb], minlength=n_reps)
        if j == depth:
            break

        n_eff_a = np.where(alive_a, nA, 0)
        if coupled:
            n_eff_b = np.where(alive_b, nB, 0)
            n_span = np.maximum(n_eff_a, n_eff_b)
        else:
            n_span = n_eff_a
        total = int(n_span.sum())
        if total == 0:
            break
        # enforce the cap before materializing children, so one oversized
        # offspring draw cannot allocate past the budget
        budget = budget + np.bincount(rep, weights=n_span.astype(np.float64), minlength=n_reps).astype(np.int64)
        if np.any(budget > cap):
            r = int(np.argmax(budget > cap))
            raise ExplosionCapError(j + 1, int(budget[r]), cap, rep_start + r)
        p_idx = np.repeat(np.arange(keys.size, dtype=np.int64), n_span)
        starts = np.cumsum(n_span) - n_span
        i_idx = np.arange(total, dtype=np.int64) - np.repeat(starts, n_span) + 1
        ckeys = child_keys_np(keys[p_idx], i_idx)
        crep = rep[p_idx]

        child_alive_a = i_idx <= n_eff_a[p_idx]
        cdkA = ckeys
        cA = _child_weights(spec, "a", dkA, atomA, ckeys, cdkA, p_idx, i_idx, child_alive_a)
        new_pi_a = np.where(child_alive_a, pi_a[p_idx] * cA, 0.0)
        if coupled:
            child_alive_b = i_idx <= n_eff_b[p_idx]
            cdkB = indep_keys_np(ckeys) if spec.coupling == CPL_INDEPENDENT else ckeys
            cB = _child_weights(spec, "b", dkB, atomB, ckeys, cdkB, p_idx, i_idx, child_alive_b)
            new_pi_b = np.where(child_alive_b, pi_b[p_idx] * cB, 0.0)

        rep, keys = crep, ckeys
        pi_a, alive_a = new_pi_a, child_alive_a
        if coupled:
            pi_b, alive_b = new_pi_b, child_alive_b

    return wA, hA, zA, wB, hB, zB
