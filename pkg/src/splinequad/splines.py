"""Univariate B-spline spaces on [0, 1].

Clamped knot vectors, Cox-de Boor evaluation of the basis and its
derivatives (span-local and dense), exact basis integrals and planar
B-spline curves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Partition:
    """Strictly increasing breakpoints ``0 = u_0 < ... < u_ne = 1``."""

    knots: tuple[float, ...]

    def __post_init__(self):
        knots = tuple(float(u) for u in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ValueError("a partition needs at least two knots")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("partition must start at 0 and end at 1")
        if any(b <= a for a, b in zip(knots[:-1], knots[1:])):
            raise ValueError("partition knots must be strictly increasing")

    @classmethod
    def uniform(cls, ne: int) -> "Partition":
        if ne < 1:
            raise ValueError("need at least one element")
        knots = [j / ne for j in range(ne + 1)]
        knots[-1] = 1.0
        return cls(tuple(knots))

    @property
    def ne(self) -> int:
        return len(self.knots) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.knots)

    def is_uniform(self, tol: float = 1e-12) -> bool:
        h = self.lengths
        return bool(np.all(np.abs(h - 1.0 / self.ne) <= tol))


@dataclass(frozen=True)
class SplineSpace:
    """The space of degree-``degree`` splines with C^``continuity`` interior joints.

    Each interior breakpoint enters the clamped knot vector with
    multiplicity ``degree - continuity``.  ``continuity = -1`` gives the
    discontinuous (element-wise polynomial) space.  ``knot_continuity``
    optionally overrides the continuity at individual interior breakpoints
    (used for C^0 block separators).
    """

    degree: int
    continuity: int
    partition: Partition
    knot_continuity: tuple[int, ...] | None = None
    clamped_knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d, k = self.degree, self.continuity
        if d < 0:
            raise ValueError("degree must be non-negative")
        if not -1 <= k < d:
            raise ValueError(f"continuity must satisfy 0 <= k < degree, got k={k}, d={d}")
        interior = self.partition.knots[1:-1]
        if self.knot_continuity is None:
            mults = [d - k] * len(interior)
        else:
            kc = tuple(int(c) for c in self.knot_continuity)
            if len(kc) != len(interior) or any(not -1 <= c < d for c in kc):
                raise ValueError("knot_continuity needs one value in [-1, degree) per interior knot")
            object.__setattr__(self, "knot_continuity", kc)
            mults = [d - c for c in kc]
        xi = [0.0] * (d + 1)
        for uj, mu in zip(interior, mults):
            xi.extend([uj] * mu)
        xi.extend([1.0] * (d + 1))
        arr = np.array(xi)
        arr.setflags(write=False)
        object.__setattr__(self, "clamped_knots", arr)

    @property
    def multiplicity(self) -> int:
        return self.degree - self.continuity

    @property
    def ne(self) -> int:
        return self.partition.ne

    @property
    def dimension(self) -> int:
        return len(self.clamped_knots) - self.degree - 1

    @cached_property
    def _span_lookup(self) -> np.ndarray:
        # last index of each breakpoint's block of repeated knots
        xi = self.clamped_knots
        ends = np.searchsorted(xi, np.asarray(self.partition.knots[:-1]), side="right") - 1
        return ends


def make_space(degree: int, continuity: int, partition: Partition) -> SplineSpace:
    if continuity < 0 or continuity >= degree:
        raise ValueError(f"continuity must satisfy 0 <= k < degree, got k={continuity}, d={degree}")
    return SplineSpace(degree, continuity, partition)


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("evaluation points must lie in [0, 1]")
    return x


def find_spans(space: SplineSpace, x) -> np.ndarray:
    """Knot-span indices ``i`` with ``xi_i <= x < xi_{i+1}``; x = 1 joins the last span."""
    x = _check_domain(x)
    elem = np.searchsorted(np.asarray(space.partition.knots), x, side="right") - 1
    elem = np.clip(elem, 0, space.ne - 1)
    return space._span_lookup[elem]


def find_span(space: SplineSpace, x: float) -> int:
    return int(find_spans(space, np.array([x]))[0])


def local_basis_derivatives(space: SplineSpace, x, max_order: int = 0):
    """Span-local basis values and derivatives at an array of points.

    Returns ``(spans, ders)`` where ``ders[r, m, a]`` is the r-th derivative of
    basis ``spans[m] - degree + a`` at ``x[m]``.  Vectorised form of the
    classical all-derivatives algorithm (Piegl & Tiller A2.3).
    """
    p = space.degree
    if max_order < 0 or max_order > p:
        raise ValueError("derivative order must satisfy 0 <= order <= degree")
    x = np.atleast_1d(_check_domain(x))
    spans = find_spans(space, x)
    xi = space.clamped_knots
    npts = x.shape[0]

    ndu = np.zeros((p + 1, p + 1, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    for j in range(1, p + 1):
        left[j] = x - xi[spans + 1 - j]
        right[j] = xi[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            # lower triangle stores knot differences
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((max_order + 1, npts, p + 1))
    for j in range(p + 1):
        ders[0, :, j] = ndu[j, p]
    if max_order == 0:
        return spans, ders

    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, max_order + 1):
            dval = np.zeros(npts)
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                dval = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                dval = dval + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                dval = dval + a[s2, k] * ndu[r, pk]
            ders[k, :, r] = dval
            s1, s2 = s2, s1

    fac = p
    for k in range(1, max_order + 1):
        ders[k] *= fac
        fac *= p - k
    return spans, ders


def basis_matrix(space: SplineSpace, x, order: int = 0) -> np.ndarray:
    """Dense ``(len(x), dimension)`` matrix of the ``order``-th basis derivative."""
    spans, ders = local_basis_derivatives(space, x, order)
    p = space.degree
    out = np.zeros((spans.shape[0], space.dimension))
    cols = spans[:, None] - p + np.arange(p + 1)[None, :]
    np.put_along_axis(out, cols, ders[order], axis=1)
    return out


def eval_basis(space: SplineSpace, x: float) -> np.ndarray:
    """All ``dimension`` basis values at a single point."""
    return basis_matrix(space, np.array([x]))[0]


def eval_basis_derivatives(space: SplineSpace, x: float, max_order: int) -> np.ndarray:
    """Rows ``0..max_order`` of dense basis derivatives at ``x``."""
    spans, ders = local_basis_derivatives(space, np.array([x]), max_order)
    p = space.degree
    out = np.zeros((max_order + 1, space.dimension))
    s = int(spans[0])
    out[:, s - p : s + 1] = ders[:, 0, :]
    return out


def basis_integrals(space: SplineSpace) -> np.ndarray:
    """Exact integrals ``(xi_{i+d+1} - xi_i) / (d + 1)`` of every basis function."""
    xi = space.clamped_knots
    d = space.degree
    n1 = space.dimension
    return (xi[d + 1 : d + 1 + n1] - xi[:n1]) / (d + 1)


def basis_integral(space: SplineSpace, i: int) -> float:
    if not 0 <= i < space.dimension:
        raise IndexError(f"basis index {i} out of range for dimension {space.dimension}")
    return float(basis_integrals(space)[i])


@dataclass(frozen=True)
class BSplineCurve:
    degree: int
    clamped_knots: tuple[float, ...]
    control_points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        xi = np.asarray(self.clamped_knots, dtype=float)
        p = self.degree
        if np.any(xi[:p + 1] != 0.0) or np.any(xi[-p - 1:] != 1.0):
            raise ValueError("curve knot vector must be clamped on [0, 1]")
        if len(self.control_points) != len(xi) - p - 1:
            raise ValueError("number of control points must equal the space dimension")

    @cached_property
    def space(self) -> SplineSpace:
        # recover partition and (uniform) continuity from the clamped knot vector
        p = self.degree
        xi = np.asarray(self.clamped_knots, dtype=float)
        interior = xi[p + 1 : len(xi) - p - 1]
        breaks, counts = np.unique(interior, return_counts=True)
        if len(counts) and np.any(counts != counts[0]):
            raise ValueError("curve knot vector must have equal interior multiplicities")
        mu = int(counts[0]) if len(counts) else 1
        partition = Partition((0.0, *breaks.tolist(), 1.0))
        return SplineSpace(p, p - mu, partition)


class SingularParameterizationError(ValueError):
    """Raised when a curve has a vanishing tangent."""


def eval_curve(curve: BSplineCurve, x: float) -> tuple[np.ndarray, float, float]:
    """Point, Jacobian ``|C'|`` and planar curvature ``|C' x C''| / |C'|^3`` at ``x``."""
    space = curve.space
    order = min(2, space.degree)
    ders = eval_basis_derivatives(space, x, order)
    P = np.asarray(curve.control_points, dtype=float)
    c0 = ders[0] @ P
    c1 = ders[1] @ P
    c2 = ders[2] @ P if order >= 2 else np.zeros(2)
    jac = float(np.hypot(c1[0], c1[1]))
    if jac == 0.0:
        raise SingularParameterizationError(f"zero Jacobian at x={x}")
    cross = c1[0] * c2[1] - c1[1] * c2[0]
    return c0, jac, abs(float(cross)) / jac**3
