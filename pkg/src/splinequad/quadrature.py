"""Quadrature rules on [0, 1]: Gauss-Legendre, element-wise Gauss, point counts and exactness checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .splines import Partition, SplineSpace, basis_integrals, basis_matrix


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.array(self.points, dtype=float).ravel()
        w = np.array(self.weights, dtype=float).ravel()
        if x.shape != w.shape:
            raise ValueError("points and weights must have equal length")
        if x.shape[0] == 0:
            raise ValueError("a rule needs at least one point")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def sorted(self) -> "QuadratureRule":
        order = np.argsort(self.points, kind="stable")
        return QuadratureRule(self.points[order], self.weights[order])

    def validate(self, tol: float = 1e-12) -> None:
        x = self.points
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(self.weights))):
            raise ValueError("rule has non-finite entries")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("rule points must lie in [0, 1]")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("rule points must be strictly increasing")
        if abs(math.fsum(self.weights) - 1.0) > tol:
            raise ValueError("rule weights must sum to one")


@dataclass(frozen=True)
class ExactnessReport:
    max_abs_error: float
    max_rel_error: float
    worst_basis_index: int
    per_basis_errors: np.ndarray

    def passed(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def optimal_point_count(d: int, k: int, ne: int) -> int:
    """Minimal number of points exact on S_k^d over ``ne`` elements: ceil((d + l + 1) / 2)."""
    if not 0 <= k < d or ne < 1:
        raise ValueError(f"invalid space (d={d}, k={k}, ne={ne})")
    interior = (ne - 1) * (d - k)
    return -(-(d + interior + 1) // 2)


def _legendre_and_derivative(n: int, t: np.ndarray):
    p0 = np.ones_like(t)
    p1 = t.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * t * p1 - (j - 1) * p0) / j
    # P_n' from the three-term identity; t is never +-1 at the roots
    dp = n * (t * p1 - p0) / (t * t - 1.0)
    return p1, dp


def gauss_legendre(n: int, tol: float = 1e-15) -> QuadratureRule:
    """``n``-point Gauss-Legendre rule on [0, 1], nodes by Newton iteration on P_n."""
    if n < 1:
        raise ValueError("need at least one Gauss point")
    if n == 1:
        return QuadratureRule([0.5], [1.0])
    i = np.arange(1, n + 1)
    t = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, t)
        dt = p / dp
        t = t - dt
        if np.max(np.abs(dt)) <= tol:
            break
    _, dp = _legendre_and_derivative(n, t)
    w = 2.0 / ((1.0 - t * t) * dp * dp)
    t = t[::-1]
    w = w[::-1]
    # enforce exact mirror symmetry about the midpoint
    t = 0.5 * (t - t[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(0.5 * (t + 1.0), 0.5 * w)


def ewg_rule(points_per_element: int, partition: Partition) -> QuadratureRule:
    """Gauss-Legendre rule with ``points_per_element`` nodes copied into every element."""
    if points_per_element < 1:
        raise ValueError("need at least one point per element")
    ref = gauss_legendre(points_per_element)
    u = np.asarray(partition.knots)
    h = np.diff(u)
    x = (u[:-1, None] + h[:, None] * ref.points[None, :]).ravel()
    w = (h[:, None] * ref.weights[None, :]).ravel()
    return QuadratureRule(x, w)


def apply(rule: QuadratureRule, f: Callable) -> float:
    """Sum of ``f(x_i) * w_i``; ``f`` may be vectorised or scalar."""
    try:
        vals = np.asarray(f(rule.points), dtype=float)
        if vals.shape != rule.points.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([f(x) for x in rule.points], dtype=float)
    return math.fsum(vals * rule.weights)


def rule_integrals(rule: QuadratureRule, space: SplineSpace) -> np.ndarray:
    """Quadrature value of every basis function, with compensated summation."""
    B = basis_matrix(space, rule.points)
    terms = B * rule.weights[:, None]
    return np.array([math.fsum(col) for col in terms.T])


def verify_exactness(rule: QuadratureRule, space: SplineSpace) -> ExactnessReport:
    exact = basis_integrals(space)
    err = np.abs(exact - rule_integrals(rule, space))
    rel = err / exact
    worst = int(np.argmax(rel))
    return ExactnessReport(float(err.max()), float(rel.max()), worst, err)


@dataclass(frozen=True)
class Savings:
    ewg_count: int
    optimal_count: int
    savings: float

    @property
    def percent(self) -> float:
        return round(100.0 * self.savings, 1)


def savings_report(p: int, ne: int, dim: int = 1) -> Savings:
    """Point counts for stiffness/mass assembly: (p+1)-point EWG vs optimal rule on S_{p-2}^{2p}."""
    if p < 2:
        raise ValueError("savings need p >= 2 so that the integrand continuity p-2 is valid")
    if dim not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if ne < 1:
        raise ValueError("need at least one element")
    ewg = ((p + 1) * ne) ** dim
    opt = optimal_point_count(2 * p, p - 2, ne) ** dim
    return Savings(ewg, opt, 1.0 - opt / ewg)


# ---- rule files ---------------------------------------------------------


def rule_to_dict(rule: QuadratureRule, space: SplineSpace, max_rel_error: float, **extra) -> dict:
    data = {
        "degree": space.degree,
        "continuity": space.continuity,
        "elements": space.ne,
        "partition": list(space.partition.knots),
        "points": [float(x) for x in rule.points],
        "weights": [float(w) for w in rule.weights],
        "max_rel_error": float(max_rel_error),
    }
    data.update(extra)
    return data


def rule_from_dict(data: dict) -> tuple[QuadratureRule, SplineSpace]:
    try:
        partition = Partition(tuple(data["partition"]))
        space = SplineSpace(int(data["degree"]), int(data["continuity"]), partition)
        rule = QuadratureRule(data["points"], data["weights"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed rule data: {exc}") from exc
    if space.ne != int(data.get("elements", space.ne)):
        raise ValueError("'elements' does not match the partition length")
    return rule, space


def write_rule(path, rule: QuadratureRule, space: SplineSpace, max_rel_error: float, **extra) -> None:
    # json emits shortest round-trip reprs, so values read back bitwise
    Path(path).write_text(json.dumps(rule_to_dict(rule, space, max_rel_error, **extra), indent=1) + "\n")


def read_rule(path) -> tuple[QuadratureRule, SplineSpace, dict]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("rule file must hold a JSON object")
    rule, space = rule_from_dict(data)
    return rule, space, data
