"""Flat program encoding shared by the growth-kernel backends.

Samplers compile to one of four node-vector families; couplings compile to
one of three joint-draw rules. Both backends interpret exactly this
encoding, slot for slot, so their outputs are bit-identical.

Per-node draw slots (counter positions in the node's keyed stream):

    WBP_PRIMS:  0 -> Q, 1 -> N, 1+i -> weight of child i (from the parent)
    WBT_PRIMS:  0 -> Q, 1 -> N, 2 -> the node's own weight
    WBT_TABLE:  0 -> joint (Q, N, C) atom
    WBP_TABLE:  0 -> joint (Q, N, weight-row) atom
    roots:      0 -> Q (or joint atom), 1 -> N

Coupling rules: SHARED reuses the node key on both sides (identity and
componentwise-quantile couplings), INDEPENDENT re-salts the key for the
second side, PAIR_TABLE draws one atom indexing both sides' vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAM_WBP_PRIMS = 0
FAM_WBT_PRIMS = 1
FAM_WBT_TABLE = 2
FAM_WBP_TABLE = 3

ROOT_PRIMS = 0
ROOT_TABLE = 1

CPL_SHARED = 0
CPL_INDEPENDENT = 1
CPL_PAIR_TABLE = 2

_EMPTY_F = np.zeros(0, dtype=np.float64)
_EMPTY_I = np.zeros(0, dtype=np.int64)


def _f(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


@dataclass
class SideProgram:
    fam: int
    q_code: int = 0
    q_par: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    n_code: int = 0
    n_par: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    c_code: int = 0
    c_par: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    cum: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    tq: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    tn: np.ndarray = field(default_factory=lambda: _EMPTY_I)
    tc: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    woff: np.ndarray = field(default_factory=lambda: _EMPTY_I)
    wflat: np.ndarray = field(default_factory=lambda: _EMPTY_F)

    def __post_init__(self):
        self.q_par = _f(self.q_par)
        self.n_par = _f(self.n_par)
        self.c_par = _f(self.c_par)
        self.cum = _f(self.cum)
        self.tq = _f(self.tq)
        self.tn = _i(self.tn)
        self.tc = _f(self.tc)
        self.woff = _i(self.woff)
        self.wflat = _f(self.wflat)


@dataclass
class RootProgram:
    kind: int
    q_code: int = 0
    q_par: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    n_code: int = 0
    n_par: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    cum: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    tq: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    tn: np.ndarray = field(default_factory=lambda: _EMPTY_I)

    def __post_init__(self):
        self.q_par = _f(self.q_par)
        self.n_par = _f(self.n_par)
        self.cum = _f(self.cum)
        self.tq = _f(self.tq)
        self.tn = _i(self.tn)


@dataclass
class PairProgram:
    """Joint finite-discrete coupling table; one atom fixes both sides."""

    is_wbp: bool
    cum: np.ndarray
    qa: np.ndarray
    na: np.ndarray
    qb: np.ndarray
    nb: np.ndarray
    ca: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    cb: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    aoff: np.ndarray = field(default_factory=lambda: _EMPTY_I)
    aflat: np.ndarray = field(default_factory=lambda: _EMPTY_F)
    boff: np.ndarray = field(default_factory=lambda: _EMPTY_I)
    bflat: np.ndarray = field(default_factory=lambda: _EMPTY_F)

    def __post_init__(self):
        self.cum = _f(self.cum)
        self.qa = _f(self.qa)
        self.na = _i(self.na)
        self.qb = _f(self.qb)
        self.nb = _i(self.nb)
        self.ca = _f(self.ca)
        self.cb = _f(self.cb)
        self.aoff = _i(self.aoff)
        self.aflat = _f(self.aflat)
        self.boff = _i(self.boff)
        self.bflat = _f(self.bflat)


@dataclass
class RootPairProgram:
    cum: np.ndarray
    qa: np.ndarray
    na: np.ndarray
    qb: np.ndarray
    nb: np.ndarray

    def __post_init__(self):
        self.cum = _f(self.cum)
        self.qa = _f(self.qa)
        self.na = _i(self.na)
        self.qb = _f(self.qb)
        self.nb = _i(self.nb)


@dataclass
class KernelSpec:
    a: SideProgram
    coupled: bool = False
    coupling: int = CPL_SHARED
    b: SideProgram | None = None
    pair: PairProgram | None = None
    root_a: RootProgram | None = None
    root_b: RootProgram | None = None
    root_coupling: int = CPL_SHARED
    root_pair: RootPairProgram | None = None

    def __post_init__(self):
        if self.coupled:
            if self.coupling == CPL_PAIR_TABLE:
                if self.pair is None:
                    raise ValueError("pair-table coupling needs a PairProgram")
            elif self.b is None:
                raise ValueError("coupled spec needs a second side program")
        if (self.root_a is None) != (self.root_b is None) and self.coupled and self.root_coupling != CPL_PAIR_TABLE:
            raise ValueError("coupled delayed roots need programs on both sides")
