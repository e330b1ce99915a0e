# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled growth kernel: scalar breadth-first loops per replication.

Interprets the same program encoding as core_py with the same keyed-stream
recipe and the same per-generation accumulation order, so outputs are
bit-identical to the numpy backend.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, log1p, rint
from libc.stdint cimport int64_t, uint64_t

from ..errors import ExplosionCapError
from .spec import CPL_INDEPENDENT, CPL_PAIR_TABLE, ROOT_PRIMS

BACKEND = "cy"

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t DRAW_SALT = 0xD1B54A32D192ED03ULL
cdef uint64_t CHILD_SALT = 0x8CB92BA72F3D8DD7ULL
cdef uint64_t REP_SALT = 0xEB44ACCAB455D165ULL
cdef uint64_t INDEP_SALT = 0x9E6C63D0876A9A47ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = z + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double draw_u(uint64_t key, uint64_t slot) nogil:
    cdef uint64_t out = mix64(key ^ mix64(DRAW_SALT + slot * GAMMA))
    return <double>(out >> 11) * INV_2_53


cdef inline uint64_t child_key(uint64_t key, uint64_t index) nogil:
    return mix64(key ^ mix64(CHILD_SALT + index * GAMMA))


cdef inline uint64_t indep_key(uint64_t key) nogil:
    return mix64(key ^ INDEP_SALT)


cdef inline double prim_icdf(int code, double[::1] par, double u) nogil:
    cdef Py_ssize_t k, lo, hi, mid
    cdef double p, start
    if code == 0:
        return par[0]
    elif code == 1:
        k = par.shape[0] // 2
        lo = 0
        hi = k
        while lo < hi:
            mid = (lo + hi) >> 1
            if par[mid] < u:
                lo = mid + 1
            else:
                hi = mid
        if lo > k - 1:
            lo = k - 1
        return par[k + lo]
    elif code == 2:
        return par[0] + u * (par[1] - par[0])
    else:
        p = par[0]
        start = par[1]
        if p >= 1.0:
            return start
        return start + floor(log1p(-u) / log1p(-p))


cdef inline Py_ssize_t locate(double[::1] cum, double u) nogil:
    cdef Py_ssize_t lo = 0, hi = cum.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] < u:
            lo = mid + 1
        else:
            hi = mid
    if lo > cum.shape[0] - 1:
        lo = cum.shape[0] - 1
    return lo


cdef inline int64_t as_int(double v) nogil:
    return <int64_t>rint(v)


cdef class _Side:
    cdef public int fam
    cdef public int q_code, n_code, c_code
    cdef public double[::1] q_par, n_par, c_par
    cdef public double[::1] cum, tq, tc, wflat
    cdef public int64_t[::1] tn, woff

    def __init__(self, prog):
        self.fam = prog.fam
        self.q_code = prog.q_code
        self.n_code = prog.n_code
        self.c_code = prog.c_code
        self.q_par = prog.q_par
        self.n_par = prog.n_par
        self.c_par = prog.c_par
        self.cum = prog.cum
        self.tq = prog.tq
        self.tn = prog.tn
        self.tc = prog.tc
        self.woff = prog.woff
        self.wflat = prog.wflat


cdef class _Root:
    cdef public int kind
    cdef public int q_code, n_code
    cdef public double[::1] q_par, n_par, cum, tq
    cdef public int64_t[::1] tn

    def __init__(self, prog):
        self.kind = prog.kind
        self.q_code = prog.q_code
        self.n_code = prog.n_code
        self.q_par = prog.q_par
        self.n_par = prog.n_par
        self.cum = prog.cum
        self.tq = prog.tq
        self.tn = prog.tn


cdef class _Pair:
    cdef public bint is_wbp
    cdef public double[::1] cum, qa, qb, ca, cb, aflat, bflat
    cdef public int64_t[::1] na, nb, aoff, boff

    def __init__(self, prog):
        self.is_wbp = prog.is_wbp
        self.cum = prog.cum
        self.qa = prog.qa
        self.na = prog.na
        self.qb = prog.qb
        self.nb = prog.nb
        self.ca = prog.ca
        self.cb = prog.cb
        self.aoff = prog.aoff
        self.aflat = prog.aflat
        self.boff = prog.boff
        self.bflat = prog.bflat


cdef class _RootPair:
    cdef public double[::1] cum, qa, qb
    cdef public int64_t[::1] na, nb

    def __init__(self, prog):
        self.cum = prog.cum
        self.qa = prog.qa
        self.na = prog.na
        self.qb = prog.qb
        self.nb = prog.nb


def run_chunk(spec, seed, rep_start, n_reps, depth, cap):
    """Mirror of core_py.run_chunk; see there for the output contract."""
    cdef bint coupled = spec.coupled
    cdef int coupling = spec.coupling
    cdef int root_coupling = spec.root_coupling
    cdef bint pair_mode = coupled and coupling == CPL_PAIR_TABLE
    cdef _Side A = _Side(spec.a)
    cdef _Side B = _Side(spec.b if spec.b is not None else spec.a)
    cdef bint has_b_prog = spec.b is not None
    cdef bint has_root = spec.root_a is not None
    cdef bint has_root_pair = spec.root_pair is not None
    cdef _Root RA = _Root(spec.root_a) if has_root else None
    cdef _Root RB = _Root(spec.root_b) if (spec.root_b is not None) else (RA if has_root else None)
    cdef _Pair PAIR = _Pair(spec.pair) if spec.pair is not None else None
    cdef _RootPair RPAIR = _RootPair(spec.root_pair) if has_root_pair else None

    if cap < 1:
        raise ValueError("cap must be at least 1")

    cdef cnp.ndarray[cnp.float64_t, ndim=2] wA = np.zeros((n_reps, depth + 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hA = np.zeros((n_reps, depth + 1))
    cdef cnp.ndarray[cnp.int64_t, ndim=2] zA = np.zeros((n_reps, depth + 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] wB_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hB_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=2] zB_arr
    if coupled:
        wB_arr = np.zeros((n_reps, depth + 1))
        hB_arr = np.zeros((n_reps, depth + 1))
        zB_arr = np.zeros((n_reps, depth + 1), dtype=np.int64)
    else:
        wB_arr = np.zeros((0, 0))
        hB_arr = np.zeros((0, 0))
        zB_arr = np.zeros((0, 0), dtype=np.int64)

    cdef double[:, ::1] wAv = wA, hAv = hA
    cdef int64_t[:, ::1] zAv = zA
    cdef double[:, ::1] wBv = wB_arr, hBv = hB_arr
    cdef int64_t[:, ::1] zBv = zB_arr

    # growable per-generation buffers
    cdef Py_ssize_t capacity = 1024
    cur_keys = np.empty(capacity, dtype=np.uint64)
    cur_piA = np.empty(capacity, dtype=np.float64)
    cur_piB = np.empty(capacity, dtype=np.float64)
    cur_alA = np.empty(capacity, dtype=np.uint8)
    cur_alB = np.empty(capacity, dtype=np.uint8)
    nxt_keys = np.empty(capacity, dtype=np.uint64)
    nxt_piA = np.empty(capacity, dtype=np.float64)
    nxt_piB = np.empty(capacity, dtype=np.float64)
    nxt_alA = np.empty(capacity, dtype=np.uint8)
    nxt_alB = np.empty(capacity, dtype=np.uint8)
    scratch_nA = np.empty(capacity, dtype=np.int64)
    scratch_nB = np.empty(capacity, dtype=np.int64)
    scratch_atA = np.empty(capacity, dtype=np.int64)
    scratch_atB = np.empty(capacity, dtype=np.int64)

    cdef uint64_t[::1] keys = cur_keys, nkeys = nxt_keys
    cdef double[::1] piA = cur_piA, piB = cur_piB, npiA = nxt_piA, npiB = nxt_piB
    cdef cnp.uint8_t[::1] alA = cur_alA, alB = cur_alB, nalA = nxt_alA, nalB = nxt_alB
    cdef int64_t[::1] nAv = scratch_nA, nBv = scratch_nB, atAv = scratch_atA, atBv = scratch_atB

    cdef uint64_t seed_mixed = mix64(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef Py_ssize_t rep, size, idx, pos, i, j, span, need
    cdef int64_t budget, nA_eff, nB_eff, n_span
    cdef uint64_t key, dkB, ck, cdk
    cdef double qA, qB, u, c, piv
    cdef int64_t nA, nB, atomA, atomB, cidx
    cdef bint at_root, salt_b
    cdef double accw, acch
    cdef int64_t accz

    for rep in range(n_reps):
        keys[0] = mix64(seed_mixed ^ mix64(REP_SALT + (<uint64_t>(rep_start + rep)) * GAMMA))
        piA[0] = 1.0
        alA[0] = 1
        if coupled:
            piB[0] = 1.0
            alB[0] = 1
        size = 1
        budget = 1
        for j in range(depth + 1):
            at_root = j == 0
            salt_b = coupled and (
                (root_coupling == CPL_INDEPENDENT) if (at_root and (has_root or has_root_pair))
                else (coupling == CPL_INDEPENDENT)
            )
            # pass 1: draw (q, n, atom), accumulate level stats, count children
            n_span = 0
            for idx in range(size):
                key = keys[idx]
                atomA = -1
                atomB = -1
                if at_root and has_root_pair:
                    cidx = locate(RPAIR.cum, draw_u(key, 0))
                    qA = RPAIR.qa[cidx]
                    nA = RPAIR.na[cidx]
                    qB = RPAIR.qb[cidx]
                    nB = RPAIR.nb[cidx]
                elif at_root and has_root:
                    if RA.kind == ROOT_PRIMS:
                        qA = prim_icdf(RA.q_code, RA.q_par, draw_u(key, 0))
                        nA = as_int(prim_icdf(RA.n_code, RA.n_par, draw_u(key, 1)))
                    else:
                        cidx = locate(RA.cum, draw_u(key, 0))
                        qA = RA.tq[cidx]
                        nA = RA.tn[cidx]
                    qB = 0.0
                    nB = 0
                    if coupled:
                        dkB = indep_key(key) if salt_b else key
                        if RB.kind == ROOT_PRIMS:
                            qB = prim_icdf(RB.q_code, RB.q_par, draw_u(dkB, 0))
                            nB = as_int(prim_icdf(RB.n_code, RB.n_par, draw_u(dkB, 1)))
                        else:
                            cidx = locate(RB.cum, draw_u(dkB, 0))
                            qB = RB.tq[cidx]
                            nB = RB.tn[cidx]
                elif pair_mode:
                    cidx = locate(PAIR.cum, draw_u(key, 0))
                    qA = PAIR.qa[cidx]
                    nA = PAIR.na[cidx]
                    qB = PAIR.qb[cidx]
                    nB = PAIR.nb[cidx]
                    atomA = cidx
                    atomB = cidx
                else:
                    if A.fam == 0 or A.fam == 1:
                        qA = prim_icdf(A.q_code, A.q_par, draw_u(key, 0))
                        nA = as_int(prim_icdf(A.n_code, A.n_par, draw_u(key, 1)))
                    else:
                        cidx = locate(A.cum, draw_u(key, 0))
                        qA = A.tq[cidx]
                        nA = A.tn[cidx]
                        atomA = cidx
                    qB = 0.0
                    nB = 0
                    if coupled:
                        dkB = indep_key(key) if salt_b else key
                        if B.fam == 0 or B.fam == 1:
                            qB = prim_icdf(B.q_code, B.q_par, draw_u(dkB, 0))
                            nB = as_int(prim_icdf(B.n_code, B.n_par, draw_u(dkB, 1)))
                        else:
                            cidx = locate(B.cum, draw_u(dkB, 0))
                            qB = B.tq[cidx]
                            nB = B.tn[cidx]
                            atomB = cidx
                if alA[idx]:
                    piv = piA[idx]
                    wAv[rep, j] += qA * piv
                    hAv[rep, j] += piv
                    zAv[rep, j] += 1
                if coupled and alB[idx]:
                    piv = piB[idx]
                    wBv[rep, j] += qB * piv
                    hBv[rep, j] += piv
                    zBv[rep, j] += 1
                nA_eff = nA if alA[idx] else 0
                nB_eff = (nB if alB[idx] else 0) if coupled else 0
                nAv[idx] = nA_eff
                nBv[idx] = nB_eff
                atAv[idx] = atomA
                atBv[idx] = atomB
                if j < depth:
                    span = nA_eff if nA_eff >= nB_eff else nB_eff
                    n_span += span
            if j == depth:
                break
            if n_span == 0:
                break
            budget += n_span
            if budget > cap:
                raise ExplosionCapError(j + 1, int(budget), int(cap), int(rep_start + rep))
            # grow buffers if needed
            if n_span > nkeys.shape[0]:
                need = n_span
                capacity = max(2 * nkeys.shape[0], need)
                nxt_keys = np.empty(capacity, dtype=np.uint64)
                nxt_piA = np.empty(capacity, dtype=np.float64)
                nxt_piB = np.empty(capacity, dtype=np.float64)
                nxt_alA = np.empty(capacity, dtype=np.uint8)
                nxt_alB = np.empty(capacity, dtype=np.uint8)
                nkeys = nxt_keys
                npiA = nxt_piA
                npiB = nxt_piB
                nalA = nxt_alA
                nalB = nxt_alB
            # pass 2: create children
            pos = 0
            for idx in range(size):
                nA_eff = nAv[idx]
                nB_eff = nBv[idx]
                span = nA_eff if nA_eff >= nB_eff else nB_eff
                if span == 0:
                    continue
                key = keys[idx]
                dkB = indep_key(key) if salt_b else key
                atomA = atAv[idx]
                atomB = atBv[idx]
                for i in range(1, span + 1):
                    ck = child_key(key, <uint64_t>i)
                    nkeys[pos] = ck
                    # side A
                    if i <= nA_eff:
                        if pair_mode:
                            if PAIR.is_wbp:
                                c = PAIR.aflat[PAIR.aoff[atomA] + i - 1]
                            else:
                                cidx = locate(PAIR.cum, draw_u(ck, 0))
                                c = PAIR.ca[cidx]
                        elif A.fam == 0:
                            c = prim_icdf(A.c_code, A.c_par, draw_u(key, <uint64_t>(1 + i)))
                        elif A.fam == 3:
                            c = A.wflat[A.woff[atomA] + i - 1]
                        elif A.fam == 1:
                            c = prim_icdf(A.c_code, A.c_par, draw_u(ck, 2))
                        else:
                            cidx = locate(A.cum, draw_u(ck, 0))
                            c = A.tc[cidx]
                        npiA[pos] = piA[idx] * c
                        nalA[pos] = 1
                    else:
                        npiA[pos] = 0.0
                        nalA[pos] = 0
                    # side B
                    if coupled:
                        if i <= nB_eff:
                            if pair_mode:
                                if PAIR.is_wbp:
                                    c = PAIR.bflat[PAIR.boff[atomB] + i - 1]
                                else:
                                    cidx = locate(PAIR.cum, draw_u(ck, 0))
                                    c = PAIR.cb[cidx]
                            elif B.fam == 0:
                                c = prim_icdf(B.c_code, B.c_par, draw_u(dkB, <uint64_t>(1 + i)))
                            elif B.fam == 3:
                                c = B.wflat[B.woff[atomB] + i - 1]
                            elif B.fam == 1:
                                cdk = indep_key(ck) if (coupled and coupling == CPL_INDEPENDENT) else ck
                                c = prim_icdf(B.c_code, B.c_par, draw_u(cdk, 2))
                            else:
                                cdk = indep_key(ck) if (coupled and coupling == CPL_INDEPENDENT) else ck
                                cidx = locate(B.cum, draw_u(cdk, 0))
                                c = B.tc[cidx]
                            npiB[pos] = piB[idx] * c
                            nalB[pos] = 1
                        else:
                            npiB[pos] = 0.0
                            nalB[pos] = 0
                    pos += 1
            # swap generations
            keys, nkeys = nkeys, keys
            piA, npiA = npiA, piA
            alA, nalA = nalA, alA
            if coupled:
                piB, npiB = npiB, piB
                alB, nalB = nalB, alB
            size = n_span
            if size > nAv.shape[0]:
                scratch_nA = np.empty(capacity, dtype=np.int64)
                scratch_nB = np.empty(capacity, dtype=np.int64)
                scratch_atA = np.empty(capacity, dtype=np.int64)
                scratch_atB = np.empty(capacity, dtype=np.int64)
                nAv = scratch_nA
                nBv = scratch_nB
                atAv = scratch_atA
                atBv = scratch_atB

    if coupled:
        return wA, hA, zA, wB_arr, hB_arr, zB_arr
    return wA, hA, zA, None, None, None
