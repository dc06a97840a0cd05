"""1D Laplace eigenproblem and curved-beam geometry built on spline quadrature.

Stiffness and mass matrices are assembled with any quadrature rule, the
Dirichlet problem is reduced by dropping the boundary coefficients and
the generalised eigenproblem is solved by Cholesky reduction plus a
parallel-ordered cyclic Jacobi iteration.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .quadrature import QuadratureRule, ewg_rule
from .splines import BSplineCurve, Partition, SplineSpace, local_basis_derivatives

# Unevenly spaced 20-element partition of the non-uniform Laplace study.
NONUNIFORM_KNOTS = (
    0.000, 0.009, 0.035, 0.056, 0.104, 0.231, 0.282, 0.345, 0.379, 0.512,
    0.558, 0.577, 0.613, 0.649, 0.719, 0.771, 0.914, 0.927, 0.948, 0.981, 1.000,
)

TSCHIRNHAUSEN_CONTROL_POINTS = (
    (0.0000, 0.0000),
    (0.0122, 0.1137),
    (0.2121, 0.2065),
    (0.4196, 0.1945),
    (0.6208, 0.1385),
    (0.8099, 0.0519),
    (0.9000, 0.0000),
)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SystemMatrices:
    stiffness: np.ndarray
    mass: np.ndarray

    @property
    def dof_count(self) -> int:
        return self.stiffness.shape[0]


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    exact: np.ndarray
    errors: np.ndarray
    normalized_modes: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mode_index", "normalized_mode", "lambda_h", "lambda_exact", "ev_err"])
            for i, (s, lh, le, e) in enumerate(
                zip(self.normalized_modes, self.eigenvalues, self.exact, self.errors), start=1
            ):
                writer.writerow([i, repr(float(s)), repr(float(lh)), repr(float(le)), repr(float(e))])


def read_spectrum_csv(path) -> SpectrumReport:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    col = lambda name: np.array([float(r[name]) for r in rows])
    return SpectrumReport(col("lambda_h"), col("lambda_exact"), col("ev_err"), col("normalized_mode"))


# ---- assembly ---------------------------------------------------------------


def assemble(space: SplineSpace, rule: QuadratureRule) -> SystemMatrices:
    """Stiffness and mass matrices by quadrature with ``rule``."""
    x = rule.points
    if x.size == 0 or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("rule points must lie in the spline domain [0, 1]")
    p = space.degree
    spans, ders = local_basis_derivatives(space, x, 1)
    n1 = space.dimension
    K = np.zeros((n1, n1))
    M = np.zeros((n1, n1))
    w = rule.weights
    for a in range(p + 1):
        for b in range(p + 1):
            rows = spans - p + a
            cols = spans - p + b
            np.add.at(K, (rows, cols), w * ders[1, :, a] * ders[1, :, b])
            np.add.at(M, (rows, cols), w * ders[0, :, a] * ders[0, :, b])
    return SystemMatrices(0.5 * (K + K.T), 0.5 * (M + M.T))


def dirichlet_reduce(matrices: SystemMatrices) -> SystemMatrices:
    """Drop the first and last coefficient (the clamped boundary values)."""
    if matrices.dof_count < 3:
        raise ValueError("need at least three degrees of freedom to impose both boundary conditions")
    inner = slice(1, -1)
    return SystemMatrices(matrices.stiffness[inner, inner], matrices.mass[inner, inner])


# ---- eigen solver -----------------------------------------------------------


def _round_robin(n: int):
    """Disjoint index pairs covering every (i, j) once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([a for a, _ in pairs], dtype=int), np.array([b for _, b in pairs], dtype=int)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def jacobi_eigh(A: np.ndarray, max_sweeps: int = 60):
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Rotations of one tournament round act on disjoint index pairs and are
    applied together.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    tiny = np.finfo(float).eps
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            app, aqq, apq = A[p, p], A[q, q], A[p, q]
            active = np.abs(apq) > tiny * np.sqrt(np.abs(app * aqq))
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            app, aqq, apq = app[active], aqq[active], apq[active]
            tau = (aqq - app) / (2.0 * apq)
            t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rp, rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * rp - s[:, None] * rq
            A[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = cp * c - cq * s
            A[:, q] = cp * s + cq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            vp, vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = vp * c - vq * s
            V[:, q] = vp * s + vq * c
        if not rotated:
            break
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    lam = A.diagonal().copy()
    order = np.argsort(lam)
    return lam[order], V[:, order]


def generalized_eigs(K: np.ndarray, M: np.ndarray, vectors: bool = False, refine: bool = True):
    """All eigenvalues of ``K u = lam M u``, ascending.

    M = L L^T reduces the pencil to the standard problem
    ``L^{-1} K L^{-T}``, which is diagonalised by Jacobi rotations.  With
    ``refine`` each eigenvalue is replaced by the Rayleigh quotient of its
    eigenvector, which restores relative accuracy of the low modes.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("mass matrix is not positive definite") from exc
    Y = solve_triangular(L, K, lower=True)
    C = solve_triangular(L, Y.T, lower=True)
    C = 0.5 * (C + C.T)
    lam, Z = jacobi_eigh(C)
    if refine or vectors:
        U = solve_triangular(L.T, Z, lower=False)
    if refine:
        lam = np.einsum("ij,ij->j", U, K @ U) / np.einsum("ij,ij->j", U, M @ U)
        order = np.argsort(lam)
        lam, U = lam[order], U[:, order]
    if not vectors:
        return lam
    return lam, U


def eigen_residuals(K: np.ndarray, M: np.ndarray, lam: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Relative residuals ``|K u - lam M u| / |K u|`` per pair."""
    KU = K @ U
    R = KU - (M @ U) * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(KU, axis=0)


def ev_errors(approx, exact=None, normalization: int | None = None) -> SpectrumReport:
    """Relative eigenvalue errors against the Laplace eigenvalues (i pi)^2."""
    approx = np.asarray(approx, dtype=float)
    idx = np.arange(1, approx.shape[0] + 1)
    if exact is None:
        exact = (idx * math.pi) ** 2
    exact = np.asarray(exact, dtype=float)
    N = normalization or approx.shape[0]
    return SpectrumReport(approx, exact, (approx - exact) / exact, idx / N)


# ---- macroelements ------------------------------------------------------------


@dataclass(frozen=True)
class RigaLayout:
    space: SplineSpace
    blocks: list[SplineSpace]
    block_bounds: list[tuple[float, float]]
    separators: tuple[float, ...]

    @property
    def iga_dimension(self) -> int:
        return SplineSpace(self.space.degree, self.space.continuity, self.space.partition).dimension


def riga_partition(ne: int, block_size: int, p: int, c: int | None = None) -> RigaLayout:
    """Uniform mesh split into blocks of ``block_size`` elements joined with C^0 continuity."""
    if block_size < 1 or ne % block_size:
        raise ValueError(f"block size {block_size} must divide ne={ne}")
    c = p - 1 if c is None else c
    partition = Partition.uniform(ne)
    nblocks = ne // block_size
    sep_idx = {b * block_size for b in range(1, nblocks)}
    knot_cont = tuple(0 if j in sep_idx else c for j in range(1, ne))
    space = SplineSpace(p, c, partition, knot_cont if sep_idx else None)
    u = partition.knots
    bounds = [(u[b * block_size], u[(b + 1) * block_size]) for b in range(nblocks)]
    block = SplineSpace(p, c, Partition.uniform(block_size))
    separators = tuple(u[j] for j in sorted(sep_idx))
    return RigaLayout(space, [block] * nblocks, bounds, separators)


def map_rule(rule: QuadratureRule, a: float, b: float) -> QuadratureRule:
    return QuadratureRule(a + (b - a) * rule.points, (b - a) * rule.weights)


def riga_rule(layout: RigaLayout, block_rule: QuadratureRule) -> QuadratureRule:
    """The block rule copied into every macroelement."""
    parts = [map_rule(block_rule, a, b) for a, b in layout.block_bounds]
    x = np.concatenate([r.points for r in parts])
    w = np.concatenate([r.weights for r in parts])
    return QuadratureRule(np.clip(x, 0.0, 1.0), w)


# ---- the Laplace study ------------------------------------------------------


def integrand_space(p: int, partition: Partition) -> tuple[int, int]:
    """(d, k) of the space holding all stiffness and mass integrands for C^{p-1} degree-p splines."""
    return 2 * p, p - 2


def laplace_spectrum(space: SplineSpace, rule: QuadratureRule, normalization: int | None = None,
                     check_residuals: bool = False) -> SpectrumReport:
    reduced = dirichlet_reduce(assemble(space, rule))
    if check_residuals:
        lam, U = generalized_eigs(reduced.stiffness, reduced.mass, vectors=True)
        res = eigen_residuals(reduced.stiffness, reduced.mass, lam, U)
        if np.max(res) > 1e-10:
            raise RuntimeError(f"eigen residual {np.max(res):.3g} above 1e-10")
    else:
        lam = generalized_eigs(reduced.stiffness, reduced.mass)
    return ev_errors(lam, normalization=normalization)


def laplace_study(p: int, ne: int | None = None, partition: Partition | None = None,
                  rule_source: str = "ewg", rules=None, config=None) -> SpectrumReport:
    """Space -> rule -> assembly -> Dirichlet reduction -> eigenvalues -> errors.

    ``rule_source`` is ``"ewg"``, ``"optimal"`` or ``"riga:<block>"``.
    ``rules`` is an optional store with ``get(d, k, partition)`` returning a
    cached optimal rule; missing rules are discovered.
    """
    from .discovery import discover_nonuniform, discover_uniform

    if partition is None:
        if ne is None:
            raise ValueError("give the number of elements or a partition")
        partition = Partition.uniform(ne)
    ne = partition.ne
    if p < 2:
        raise ValueError("the optimal-rule integrand space needs p >= 2")
    d, k = integrand_space(p, partition)

    def optimal_rule(part: Partition) -> QuadratureRule:
        cached = rules.get(d, k, part) if rules is not None else None
        if cached is not None:
            return cached
        if part.is_uniform():
            known = rules.known_chain(d, k, part.ne) if rules is not None else None
            result = discover_uniform(d, k, part.ne, config, known)
        else:
            base = optimal_rule(Partition.uniform(part.ne))
            result = discover_nonuniform(d, k, part, config, uniform_rule=base)
        if not result.converged:
            raise RuntimeError(f"no optimal rule found for S_{k}^{d} on {part.ne} elements "
                               f"(rel err {result.max_rel_error:.3g})")
        if rules is not None:
            rules.put(result)
        return result.rule

    space = SplineSpace(p, p - 1, partition)
    if rule_source == "ewg":
        return laplace_spectrum(space, ewg_rule(p + 1, partition))
    if rule_source == "optimal":
        return laplace_spectrum(space, optimal_rule(partition))
    if rule_source.startswith("riga:"):
        block = int(rule_source.split(":", 1)[1])
        if not partition.is_uniform():
            raise ValueError("macroelement blocks need a uniform partition")
        layout = riga_partition(ne, block, p)
        rule = riga_rule(layout, optimal_rule(Partition.uniform(block)))
        return laplace_spectrum(layout.space, rule, normalization=layout.iga_dimension - 2)
    raise ValueError(f"unknown rule source {rule_source!r}")


# ---- geometry -------------------------------------------------------------------


def tschirnhausen_curve() -> BSplineCurve:
    """Quadratic B-spline fit of the Tschirnhausen beam midline (7 control points)."""
    knots = (0.0, 0.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0)
    return BSplineCurve(2, knots, TSCHIRNHAUSEN_CONTROL_POINTS)
