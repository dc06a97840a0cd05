"""Dual-norm integration error of a quadrature rule over a spline space.

For a rule (X, W) and basis {v_i} with Gram matrix M, the worst-case error
over unit-L2 splines is ``L = sqrt(r^T M^{-1} r)`` where ``r`` holds the
signed per-basis residuals ``I(v_i) - sum_m v_i(x_m) w_m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .quadrature import QuadratureRule, ewg_rule
from .splines import SplineSpace, basis_integrals, basis_matrix, local_basis_derivatives


@dataclass(frozen=True)
class LossContext:
    space: SplineSpace
    exact_integrals: np.ndarray
    gram: np.ndarray
    gram_factor: tuple

    def solve(self, r: np.ndarray) -> np.ndarray:
        return cho_solve(self.gram_factor, r)


@dataclass(frozen=True)
class LossGradient:
    d_points: np.ndarray
    d_weights: np.ndarray


def gram_matrix(space: SplineSpace) -> np.ndarray:
    """Exact L2 Gram matrix, integrated element-wise with d+1 Gauss points."""
    rule = ewg_rule(space.degree + 1, space.partition)
    B = basis_matrix(space, rule.points)
    G = (B * rule.weights[:, None]).T @ B
    return 0.5 * (G + G.T)


def build_context(space: SplineSpace) -> LossContext:
    G = gram_matrix(space)
    try:
        factor = cho_factor(G, lower=True)
    except LinAlgError as exc:
        raise LinAlgError(f"Gram matrix of {space} is not positive definite") from exc
    exact = basis_integrals(space)
    exact.setflags(write=False)
    G.setflags(write=False)
    return LossContext(space, exact, G, factor)


def _compensated_colsum(terms: np.ndarray) -> np.ndarray:
    # Neumaier summation down the rows, vectorised over columns
    total = np.zeros(terms.shape[1])
    comp = np.zeros(terms.shape[1])
    for row in terms:
        t = total + row
        big = np.abs(total) >= np.abs(row)
        comp += np.where(big, (total - t) + row, (row - t) + total)
        total = t
    return total + comp


def _residuals_from(ctx: LossContext, values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # the exact integral enters as the first summand so it is compensated too
    terms = np.vstack([ctx.exact_integrals[None, :], -values * weights[:, None]])
    return _compensated_colsum(terms)


def residuals(ctx: LossContext, rule: QuadratureRule) -> np.ndarray:
    """Signed residuals ``I(v_i) - sum_m v_i(x_m) w_m``."""
    B = basis_matrix(ctx.space, rule.points)
    return _residuals_from(ctx, B, rule.weights)


def loss_squared(ctx: LossContext, rule: QuadratureRule) -> float:
    r = residuals(ctx, rule)
    return float(max(r @ ctx.solve(r), 0.0))


def loss_value(ctx: LossContext, rule: QuadratureRule) -> float:
    return float(np.sqrt(loss_squared(ctx, rule)))


def loss_and_gradient(ctx: LossContext, points: np.ndarray, weights: np.ndarray):
    """``(L^2, dL^2/dx, dL^2/dw)`` for raw point/weight arrays.

    Used by the optimiser; basis values and first derivatives are
    evaluated span-locally in one pass.
    """
    space = ctx.space
    p = space.degree
    spans, ders = local_basis_derivatives(space, points, min(1, p))
    if p == 0:
        ders = np.concatenate([ders, np.zeros_like(ders)])
    n1 = space.dimension
    q = points.shape[0]
    cols = spans[:, None] - p + np.arange(p + 1)[None, :]
    B = np.zeros((q, n1))
    np.put_along_axis(B, cols, ders[0], axis=1)
    r = _residuals_from(ctx, B, weights)
    s = ctx.solve(r)
    l2 = float(r @ s)
    s_local = s[cols]
    d_w = -2.0 * np.sum(ders[0] * s_local, axis=1)
    d_x = -2.0 * weights * np.sum(ders[1] * s_local, axis=1)
    return max(l2, 0.0), d_x, d_w


def loss_gradient(ctx: LossContext, rule: QuadratureRule, squared: bool | None = None) -> LossGradient:
    """Gradient of L, or of L^2 when ``squared`` (the default once L < 1e-8)."""
    l2, d_x, d_w = loss_and_gradient(ctx, rule.points, rule.weights)
    if squared is None:
        squared = np.sqrt(l2) < 1e-8
    if not squared:
        scale = 0.5 / np.sqrt(l2)
        d_x, d_w = d_x * scale, d_w * scale
    return LossGradient(d_x, d_w)
