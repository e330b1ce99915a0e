"""Probability measures and exact Kantorovich-Rubinstein (order-1) distances.

Exact computations only: the 1-D CDF-area formula, the sorted-sample formula
for equal-size clouds, and minimum-cost perfect matching (via scipy's
assignment solver) for small vector clouds under the l1 ground cost. Above
the exact-assignment size limit the caller must subsample; there is no
approximate path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import ExactRegimeExceededError

DEFAULT_N_MAX = 256  # assignment is cubic; this keeps a distance under a second


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported law on the real line."""

    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if atoms.ndim != 1 or atoms.shape != masses.shape or atoms.size == 0:
            raise ValueError("atoms and masses must be matching nonempty 1-D arrays")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {masses.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_pairs(cls, pairs) -> "DiscreteMeasure":
        """Build from (atom, mass) pairs, merging duplicate atoms."""
        agg: dict[float, float] = {}
        for a, m in pairs:
            agg[float(a)] = agg.get(float(a), 0.0) + float(m)
        atoms = np.array(sorted(agg))
        return cls(atoms, np.array([agg[a] for a in atoms]))

    @classmethod
    def point(cls, value: float) -> "DiscreteMeasure":
        return cls(np.array([float(value)]), np.array([1.0]))

    @property
    def cum(self) -> np.ndarray:
        c = np.cumsum(self.masses)
        c[-1] = 1.0
        return c

    def cdf(self, x: float) -> float:
        return float(self.cum[np.searchsorted(self.atoms, x, side="right") - 1]) if x >= self.atoms[0] else 0.0

    def quantile(self, u: float) -> float:
        """Pseudo-inverse: inf{x : F(x) >= u}."""
        if not 0.0 < u <= 1.0:
            raise ValueError("u must be in (0, 1]")
        idx = int(np.searchsorted(self.cum, u, side="left"))
        return float(self.atoms[min(idx, self.atoms.size - 1)])

    def mean(self) -> float:
        return float(self.atoms @ self.masses)

    def abs_mean(self) -> float:
        return float(np.abs(self.atoms) @ self.masses)

    def is_integer(self) -> bool:
        return bool(np.all(self.atoms == np.round(self.atoms)))

    def sample_np(self, uniforms: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cum, uniforms, side="left")
        np.clip(idx, 0, self.atoms.size - 1, out=idx)
        return self.atoms[idx]

    def to_lines(self) -> str:
        return "\n".join(
            f"{repr(float(a))} {repr(float(m))}" for a, m in zip(self.atoms, self.masses)
        ) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "DiscreteMeasure":
        pairs = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, m = line.split()
            pairs.append((float(a), float(m)))
        return cls.from_pairs(pairs)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted cloud of n points in R^d."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("all coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_lines(self) -> str:
        return "\n".join(" ".join(repr(float(v)) for v in row) for row in self.points) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "EmpiricalMeasure":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.split()])
        return cls(np.array(rows))


@dataclass(frozen=True)
class CouplingPlan:
    """Transport plan between two equal-size clouds: (i, j, weight) triples."""

    pairs: tuple
    n_left: int
    n_right: int

    def __post_init__(self):
        w = sum(p[2] for p in self.pairs)
        if abs(w - 1.0) > 1e-9:
            raise ValueError("plan weights must sum to 1")
        left = np.zeros(self.n_left)
        right = np.zeros(self.n_right)
        for i, j, wt in self.pairs:
            left[i] += wt
            right[j] += wt
        if np.max(np.abs(left - 1.0 / self.n_left)) > 1e-9:
            raise ValueError("left marginal mismatch")
        if np.max(np.abs(right - 1.0 / self.n_right)) > 1e-9:
            raise ValueError("right marginal mismatch")


def d1_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact order-1 distance between finitely supported laws: CDF area."""
    grid = np.union1d(mu.atoms, nu.atoms)
    fa = np.concatenate([[0.0], mu.cum])[np.searchsorted(mu.atoms, grid, side="right")]
    fb = np.concatenate([[0.0], nu.cum])[np.searchsorted(nu.atoms, grid, side="right")]
    return float(np.abs(fa[:-1] - fb[:-1]) @ np.diff(grid))


def d1_integer(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """sum_k |F(k) - G(k)| for integer-supported laws; equals d1_discrete."""
    if not (mu.is_integer() and nu.is_integer()):
        raise ValueError("d1_integer needs integer-supported measures")
    lo = int(min(mu.atoms[0], nu.atoms[0]))
    hi = int(max(mu.atoms[-1], nu.atoms[-1]))
    ks = np.arange(lo, hi, dtype=float)  # beyond hi both CDFs are 1
    fa = np.concatenate([[0.0], mu.cum])[np.searchsorted(mu.atoms, ks, side="right")]
    fb = np.concatenate([[0.0], nu.cum])[np.searchsorted(nu.atoms, ks, side="right")]
    return float(np.abs(fa - fb).sum())


def d1_empirical_1d(x: EmpiricalMeasure, y: EmpiricalMeasure) -> float:
    """Mean |x_(i) - y_(i)| over sorted equal-size 1-D samples.

    This is the comonotone (optimal) matching; ties among equal values do
    not affect the sorted arrays, so the result is tie-invariant.
    """
    if x.dim != 1 or y.dim != 1:
        raise ValueError("d1_empirical_1d needs 1-D clouds")
    if x.n != y.n:
        raise ValueError(f"sample counts differ: {x.n} vs {y.n}")
    xs = np.sort(x.points[:, 0], kind="stable")
    ys = np.sort(y.points[:, 0], kind="stable")
    return float(np.mean(np.abs(xs - ys)))


def d1_empirical_l1(
    x: EmpiricalMeasure,
    y: EmpiricalMeasure,
    n_max: int = DEFAULT_N_MAX,
    return_plan: bool = False,
):
    """Exact minimum-cost perfect matching under the l1 ground cost, / n.

    Refuses clouds above n_max instead of silently approximating.
    """
    if x.n != y.n:
        raise ValueError(f"sample counts differ: {x.n} vs {y.n}")
    if x.dim != y.dim:
        raise ValueError(f"dimensions differ: {x.dim} vs {y.dim}")
    if x.n > n_max:
        raise ExactRegimeExceededError(
            f"exact regime exceeded: n={x.n} > n_max={n_max}; subsample first"
        )
    cost = np.abs(x.points[:, None, :] - y.points[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    value = float(cost[rows, cols].sum() / x.n)
    if not return_plan:
        return value
    plan = CouplingPlan(
        tuple((int(i), int(j), 1.0 / x.n) for i, j in zip(rows, cols)), x.n, y.n
    )
    return value, plan


def quantile_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure, u: float) -> tuple[float, float]:
    """(F^{-1}(u), G^{-1}(u)); pushing U(0,1) through this realizes the optimal coupling."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly inside (0, 1)")
    return mu.quantile(u), nu.quantile(u)


class LipschitzTest:
    """A function certified 1-Lipschitz for the l1 ground metric by construction."""

    def __init__(self, fn, label: str):
        self._fn = fn
        self.label = label

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self._fn(pts)


def affine_test(coeffs, offset: float = 0.0) -> LipschitzTest:
    w = np.asarray(coeffs, dtype=float)
    if np.max(np.abs(w)) > 1.0 + 1e-12:
        raise ValueError("affine test needs max |coefficient| <= 1")
    return LipschitzTest(lambda pts: pts @ w + offset, f"affine{tuple(np.round(w, 6))}")


def projection_test(coordinate: int) -> LipschitzTest:
    return LipschitzTest(lambda pts: pts[:, coordinate], f"proj[{coordinate}]")


def l1_distance_test(anchor) -> LipschitzTest:
    p = np.atleast_1d(np.asarray(anchor, dtype=float))
    return LipschitzTest(
        lambda pts: np.abs(pts - p[None, :]).sum(axis=1), f"dist_to{tuple(np.round(p, 6))}"
    )


def duality_lower_bound(x: EmpiricalMeasure, y: EmpiricalMeasure, test_fns) -> float:
    """max over the test family of |mean psi(x) - mean psi(y)|; never exceeds d1."""
    test_fns = list(test_fns)
    if not test_fns:
        raise ValueError("need at least one test function")
    best = 0.0
    for psi in test_fns:
        gap = abs(float(np.mean(psi(x.points)) - np.mean(psi(y.points))))
        best = max(best, gap)
    return best


@dataclass(frozen=True)
class VectorDistance:
    """d1 between truncated vector laws plus the truncation slack carried along."""

    value: float
    tail_bound: float
    dim: int

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound


def d1_discrete_vector(atoms_x, mass_x, atoms_y, mass_y) -> float:
    """Exact d1 between finitely supported laws on R^d under the l1 cost.

    Solves the small transportation LP directly; supports need not match
    and masses need not be uniform.
    """
    ax = np.atleast_2d(np.asarray(atoms_x, dtype=float))
    ay = np.atleast_2d(np.asarray(atoms_y, dtype=float))
    px = np.asarray(mass_x, dtype=float)
    py = np.asarray(mass_y, dtype=float)
    if abs(px.sum() - 1) > 1e-9 or abs(py.sum() - 1) > 1e-9:
        raise ValueError("masses must each sum to 1")
    nx, ny = ax.shape[0], ay.shape[0]
    cost = np.abs(ax[:, None, :] - ay[None, :, :]).sum(axis=2).reshape(-1)
    # marginal constraints; drop one redundant row for numerical stability
    a_eq = []
    b_eq = []
    for i in range(nx):
        row = np.zeros(nx * ny)
        row[i * ny : (i + 1) * ny] = 1.0
        a_eq.append(row)
        b_eq.append(px[i])
    for j in range(ny - 1):
        row = np.zeros(nx * ny)
        row[j::ny] = 1.0
        a_eq.append(row)
        b_eq.append(py[j])
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)
