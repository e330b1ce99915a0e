"""Distribution primitives for branching-vector samplers.

Each primitive knows how to invert one uniform into a value (the only
sampling mechanism the toolkit uses, so that coupled draws can share
uniforms), exposes exact moments, and can compile itself into the flat
(code, params) form consumed by the growth kernels.

The pairwise helpers at the bottom compute E|X - Y| exactly for the
comonotone coupling (shared uniform) and for independent draws whenever a
closed form or finite summation exists; callers fall back to Monte Carlo
when they return None.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Kernel primitive codes, shared with branchkit._kernel.
CODE_POINT = 0
CODE_DISCRETE = 1
CODE_UNIFORM = 2
CODE_GEOMETRIC = 3

_TAIL_EPS = 1e-17  # iteration cutoff for geometric-tail summations


class Primitive:
    """Base class; concrete primitives are immutable value objects."""

    is_integer = False

    def icdf(self, u: float) -> float:
        raise NotImplementedError

    def icdf_np(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def abs_mean(self) -> float:
        raise NotImplementedError

    @property
    def min_value(self) -> float:
        raise NotImplementedError

    @property
    def max_value(self) -> float:
        """Supremum of the support; math.inf for unbounded primitives."""
        raise NotImplementedError

    def tail_ge(self, i: int) -> float:
        """P(X >= i); only meaningful for integer-valued primitives."""
        raise NotImplementedError

    def as_table(self, tol: float = 1e-14):
        """Exact finite table (atoms, probs) or None for continuous laws.

        Unbounded integer laws are truncated at tail mass <= tol with the
        residual folded onto the last atom so the table still sums to one.
        """
        return None

    def kernel_encode(self) -> tuple[int, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(Primitive):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("point mass must be finite")

    @property
    def is_integer(self):
        return float(self.value) == round(self.value)

    def icdf(self, u):
        return self.value

    def icdf_np(self, u):
        return np.full(np.shape(u), float(self.value))

    @property
    def mean(self):
        return float(self.value)

    @property
    def abs_mean(self):
        return abs(float(self.value))

    @property
    def min_value(self):
        return float(self.value)

    @property
    def max_value(self):
        return float(self.value)

    def tail_ge(self, i):
        return 1.0 if self.value >= i else 0.0

    def as_table(self, tol=1e-14):
        return np.array([float(self.value)]), np.array([1.0])

    def kernel_encode(self):
        return CODE_POINT, np.array([float(self.value)])


@dataclass(frozen=True)
class FiniteDiscrete(Primitive):
    atoms: np.ndarray
    probs: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.ndim != 1 or atoms.shape != probs.shape or atoms.size == 0:
            raise ValueError("atoms and probs must be matching nonempty 1-D arrays")
        keep = probs > 0.0
        atoms, probs = atoms[keep], probs[keep]
        order = np.argsort(atoms, kind="stable")
        atoms, probs = atoms[order], probs[order]
        if atoms.size == 0:
            raise ValueError("at least one atom needs positive mass")
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be distinct")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cum", cum)

    @property
    def is_integer(self):
        return bool(np.all(self.atoms == np.round(self.atoms)))

    def icdf(self, u):
        idx = int(np.searchsorted(self._cum, u, side="left"))
        if idx >= self.atoms.size:
            idx = self.atoms.size - 1
        return float(self.atoms[idx])

    def icdf_np(self, u):
        idx = np.searchsorted(self._cum, u, side="left")
        np.clip(idx, 0, self.atoms.size - 1, out=idx)
        return self.atoms[idx]

    @property
    def mean(self):
        return float(self.atoms @ self.probs)

    @property
    def abs_mean(self):
        return float(np.abs(self.atoms) @ self.probs)

    @property
    def min_value(self):
        return float(self.atoms[0])

    @property
    def max_value(self):
        return float(self.atoms[-1])

    def tail_ge(self, i):
        return float(self.probs[self.atoms >= i].sum())

    def as_table(self, tol=1e-14):
        return self.atoms.copy(), self.probs.copy()

    def kernel_encode(self):
        return CODE_DISCRETE, np.concatenate([self._cum, self.atoms])


@dataclass(frozen=True)
class UniformInterval(Primitive):
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("need finite lo < hi")

    def icdf(self, u):
        return self.lo + u * (self.hi - self.lo)

    def icdf_np(self, u):
        return self.lo + np.asarray(u) * (self.hi - self.lo)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def abs_mean(self):
        a, b = self.lo, self.hi
        if a >= 0:
            return 0.5 * (a + b)
        if b <= 0:
            return -0.5 * (a + b)
        return (a * a + b * b) / (2.0 * (b - a))

    @property
    def min_value(self):
        return self.lo

    @property
    def max_value(self):
        return self.hi

    def kernel_encode(self):
        return CODE_UNIFORM, np.array([self.lo, self.hi])


@dataclass(frozen=True)
class Geometric(Primitive):
    """Geometric number of trials: P(X = k) = (1-p)^(k-start) * p, k >= start."""

    p: float
    start: int = 0

    is_integer = True

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.start not in (0, 1):
            raise ValueError("start must be 0 or 1")

    def icdf(self, u):
        if self.p == 1.0:
            return float(self.start)
        return self.start + math.floor(math.log1p(-u) / math.log1p(-self.p))

    def icdf_np(self, u):
        if self.p == 1.0:
            return np.full(np.shape(u), float(self.start))
        return self.start + np.floor(np.log1p(-np.asarray(u)) / math.log1p(-self.p))

    @property
    def mean(self):
        return self.start + (1.0 - self.p) / self.p

    @property
    def abs_mean(self):
        return self.mean

    @property
    def min_value(self):
        return float(self.start)

    @property
    def max_value(self):
        return math.inf if self.p < 1.0 else float(self.start)

    def tail_ge(self, i):
        k = max(0, math.ceil(i) - self.start)
        return (1.0 - self.p) ** k

    def as_table(self, tol=1e-14):
        if self.p == 1.0:
            return np.array([float(self.start)]), np.array([1.0])
        q = 1.0 - self.p
        kmax = self.start + max(1, math.ceil(math.log(tol) / math.log(q)))
        ks = np.arange(self.start, kmax + 1, dtype=float)
        probs = self.p * q ** (ks - self.start)
        probs[-1] += q ** (kmax + 1 - self.start)  # fold residual tail
        return ks, probs

    def kernel_encode(self):
        return CODE_GEOMETRIC, np.array([self.p, float(self.start)])


def poisson_truncated(mean: float, kmax: int | None = None) -> FiniteDiscrete:
    """Poisson(mean) conditioned on {0, ..., kmax}.

    kmax defaults to a point where the discarded tail is far below double
    precision, so the conditioning is numerically invisible while the
    returned table's declared moments match its sampling law exactly.
    """
    if mean < 0:
        raise ValueError("mean must be nonnegative")
    if mean == 0:
        return FiniteDiscrete(np.array([0.0]), np.array([1.0]))
    if kmax is None:
        kmax = int(max(30, math.ceil(mean + 12 * math.sqrt(mean) + 12)))
    ks = np.arange(0, kmax + 1)
    logs = ks * math.log(mean) - mean - np.array([math.lgamma(k + 1) for k in ks])
    probs = np.exp(logs)
    probs /= probs.sum()
    return FiniteDiscrete(ks.astype(float), probs)


def parse_primitive(spec) -> Primitive:
    """Build a primitive from its config form.

    Accepted forms: a bare number (point mass), or a one-key mapping:
    {point: v}, {uniform: [lo, hi]}, {geometric: {p: .., start: ..}},
    {poisson: {mean: .., max: ..}}, {discrete: {atoms: [..], probs: [..]}}.
    """
    if isinstance(spec, (int, float)):
        return PointMass(float(spec))
    if isinstance(spec, Primitive):
        return spec
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError(f"cannot parse primitive spec {spec!r}")
    (kind, body), = spec.items()
    if kind == "point":
        return PointMass(float(body))
    if kind == "uniform":
        lo, hi = body
        return UniformInterval(float(lo), float(hi))
    if kind == "geometric":
        if isinstance(body, dict):
            return Geometric(float(body["p"]), int(body.get("start", 0)))
        return Geometric(float(body))
    if kind == "poisson":
        if isinstance(body, dict):
            return poisson_truncated(float(body["mean"]), body.get("max"))
        return poisson_truncated(float(body))
    if kind == "discrete":
        return FiniteDiscrete(np.asarray(body["atoms"], float), np.asarray(body["probs"], float))
    raise ValueError(f"unknown primitive kind {kind!r}")


def _is_integer_pair(a: Primitive, b: Primitive) -> bool:
    return a.is_integer and b.is_integer


def _integer_cdf_abs_area(a: Primitive, b: Primitive) -> float:
    # sum_k |F(k) - G(k)| over the integer grid; iterates until both tails
    # are below _TAIL_EPS, which bounds the truncation error by the leftover
    # tail sums (geometric, hence negligible against every stated tolerance).
    lo = int(min(a.min_value, b.min_value))
    total = 0.0
    k = lo
    while True:
        ta, tb = a.tail_ge(k + 1), b.tail_ge(k + 1)
        total += abs(ta - tb)
        k += 1
        if ta < _TAIL_EPS and tb < _TAIL_EPS:
            break
        if k - lo > 10_000_000:
            raise RuntimeError("integer CDF summation failed to converge")
    return total


def _abs_linear_integral(c0: float, c1: float, u0: float, u1: float) -> float:
    """Integral of |c0 + c1*u| over [u0, u1]."""
    f0, f1 = c0 + c1 * u0, c0 + c1 * u1
    if f0 * f1 >= 0.0:
        return abs(0.5 * (f0 + f1)) * (u1 - u0)
    ustar = -c0 / c1
    return 0.5 * abs(f0) * (ustar - u0) + 0.5 * abs(f1) * (u1 - ustar)


def comonotone_abs_diff(a: Primitive, b: Primitive) -> float | None:
    """E|F_a^{-1}(U) - F_b^{-1}(U)| with one shared uniform.

    This equals the Kantorovich-Rubinstein distance between the two laws.
    Returns None when no exact path is implemented.
    """
    ta, tb = a.as_table(), b.as_table()
    if ta is not None and tb is not None and not (
        isinstance(a, Geometric) or isinstance(b, Geometric)
    ):
        return _discrete_cdf_abs_area(*ta, *tb)
    if _is_integer_pair(a, b):
        return _integer_cdf_abs_area(a, b)
    uni, other = None, None
    if isinstance(a, UniformInterval):
        uni, other = a, b
    elif isinstance(b, UniformInterval):
        uni, other = b, a
    if uni is not None:
        if isinstance(other, UniformInterval):
            d0 = a.lo - b.lo
            d1 = (a.hi - a.lo) - (b.hi - b.lo)
            return _abs_linear_integral(d0, d1, 0.0, 1.0)
        tab = other.as_table()
        if tab is not None and not isinstance(other, Geometric):
            atoms, probs = tab
            cum = np.concatenate([[0.0], np.cumsum(probs)])
            cum[-1] = 1.0
            w = uni.hi - uni.lo
            total = 0.0
            for j in range(atoms.size):
                u0, u1 = cum[j], cum[j + 1]
                if u1 <= u0:
                    continue
                # |uni.lo + w*u - atom| over [u0, u1], sign-symmetric
                total += _abs_linear_integral(uni.lo - atoms[j], w, u0, u1)
            return total
    return None


def _discrete_cdf_abs_area(ax, ap, bx, bp) -> float:
    grid = np.union1d(ax, bx)
    ca = np.concatenate([[0.0], np.cumsum(ap)])
    cb = np.concatenate([[0.0], np.cumsum(bp)])
    fa = ca[np.searchsorted(ax, grid, side="right")]
    fb = cb[np.searchsorted(bx, grid, side="right")]
    gaps = np.diff(grid)
    return float(np.abs(fa[:-1] - fb[:-1]) @ gaps)


def independent_abs_diff(a: Primitive, b: Primitive) -> float | None:
    """E|X - Y| for independent X ~ a, Y ~ b; None when not exact."""
    ta, tb = a.as_table(), b.as_table()
    geo = isinstance(a, Geometric) or isinstance(b, Geometric)
    if ta is not None and tb is not None and not geo:
        ax, ap = ta
        bx, bp = tb
        return float(ap @ np.abs(ax[:, None] - bx[None, :]) @ bp)
    if _is_integer_pair(a, b):
        # E|X-Y| = sum_k F(k)(1-G(k)) + G(k)(1-F(k)) over integers
        lo = int(min(a.min_value, b.min_value))
        total, k = 0.0, lo
        while True:
            sa, sb = a.tail_ge(k + 1), b.tail_ge(k + 1)
            fa, fb = 1.0 - sa, 1.0 - sb
            total += fa * sb + fb * sa
            k += 1
            if sa < _TAIL_EPS and sb < _TAIL_EPS:
                break
            if k - lo > 10_000_000:
                raise RuntimeError("integer summation failed to converge")
        return total
    if isinstance(a, UniformInterval) and isinstance(b, UniformInterval):
        return _indep_uniform_uniform(a, b)
    if isinstance(a, UniformInterval) and tb is not None and not isinstance(b, Geometric):
        return _indep_table_uniform(tb, a)
    if isinstance(b, UniformInterval) and ta is not None and not isinstance(a, Geometric):
        return _indep_table_uniform(ta, b)
    return None


def _indep_table_uniform(table, uni: UniformInterval) -> float:
    atoms, probs = table
    a, b = uni.lo, uni.hi
    mid = 0.5 * (a + b)
    out = 0.0
    for v, p in zip(atoms, probs):
        if v <= a:
            out += p * (mid - v)
        elif v >= b:
            out += p * (v - mid)
        else:
            out += p * ((v - a) ** 2 + (b - v) ** 2) / (2.0 * (b - a))
    return float(out)


def _indep_uniform_uniform(a: UniformInterval, b: UniformInterval) -> float:
    # E|X-Y| = integral of Fa(t)(1-Fb(t)) + Fb(t)(1-Fa(t)) dt; the integrand
    # is piecewise quadratic between interval endpoints, so per-piece Simpson
    # is exact.
    pts = sorted({a.lo, a.hi, b.lo, b.hi})

    def fa(t):
        return min(1.0, max(0.0, (t - a.lo) / (a.hi - a.lo)))

    def fb(t):
        return min(1.0, max(0.0, (t - b.lo) / (b.hi - b.lo)))

    def h(t):
        return fa(t) * (1 - fb(t)) + fb(t) * (1 - fa(t))

    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        m = 0.5 * (lo + hi)
        total += (hi - lo) / 6.0 * (h(lo) + 4.0 * h(m) + h(hi))
    return total
