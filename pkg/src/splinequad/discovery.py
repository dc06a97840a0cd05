"""Gradient-descent search for optimal quadrature rules.

Rules are parameterised by their free points and weights (mirror symmetry
on uniform partitions, one weight eliminated by the unit-sum constraint),
warm-started from the rule of a simpler space and refined with Yogi.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .loss import LossContext, build_context, loss_and_gradient
from .quadrature import QuadratureRule, optimal_point_count, verify_exactness
from .splines import Partition, SplineSpace

log = logging.getLogger(__name__)

SYMMETRIC = "uniform-symmetric"
FULL = "non-uniform-full"


class SearchAborted(RuntimeError):
    """Non-finite gradient during optimisation."""


@dataclass
class SearchConfig:
    lr_constant: float = 1e-2
    lr_log_base: float = 10.0
    stop_threshold: float = 1e-25
    max_epochs: int = 10_000
    exactness_tol: float = 1e-12
    check_every: int = 10
    stop_on_exactness: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-3
    initial_accumulator: float = 1e-6
    box_margin: float = 1e-9
    objective: str = "squared"
    max_degree: int = 8
    max_elements: int = 12

    @classmethod
    def from_mapping(cls, data: dict) -> "SearchConfig":
        known = cls.__dataclass_fields__
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        for key, value in data.items():
            setattr(cfg, key, type(getattr(cfg, key))(value))
        return cfg


@dataclass
class FreeParams:
    free_points: np.ndarray
    free_weights: np.ndarray
    mode: str = SYMMETRIC

    def __post_init__(self):
        self.free_points = np.asarray(self.free_points, dtype=float).ravel()
        self.free_weights = np.asarray(self.free_weights, dtype=float).ravel()
        if self.mode not in (SYMMETRIC, FULL):
            raise ValueError(f"unknown parameter mode {self.mode!r}")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.free_points, self.free_weights])

    def with_flat(self, theta: np.ndarray) -> "FreeParams":
        nx = self.free_points.shape[0]
        return FreeParams(theta[:nx].copy(), theta[nx:].copy(), self.mode)


def free_counts(q: int, mode: str = SYMMETRIC) -> tuple[int, int]:
    if mode == SYMMETRIC:
        return q // 2, (q + 1) // 2 - 1
    return q, q - 1


@dataclass
class OptimizerState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    epoch: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-3

    @classmethod
    def fresh(cls, size: int, learning_rate: float, initial_accumulator: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-3) -> "OptimizerState":
        return cls(np.zeros(size), np.full(size, initial_accumulator), 0, learning_rate,
                   beta1, beta2, eps)


@dataclass
class SearchResult:
    rule: QuadratureRule
    final_loss: float
    epochs: int
    converged: bool
    max_rel_error: float
    initial_loss: float = math.nan
    space: SplineSpace | None = field(default=None, repr=False)


# ---- parameterisations ----------------------------------------------------


def expand_symmetric(params: FreeParams, q: int) -> QuadratureRule:
    """Mirror the left half about 0.5; the eliminated weight restores sum(W) = 1."""
    x, w = _expand_symmetric_arrays(params.free_points, params.free_weights, q)
    return QuadratureRule(x, w)


def _expand_symmetric_arrays(fx: np.ndarray, fw: np.ndarray, q: int):
    nx, nw = free_counts(q, SYMMETRIC)
    if fx.shape[0] != nx or fw.shape[0] != nw:
        raise ValueError(f"q={q} needs {nx} free points and {nw} free weights")
    if q % 2:
        x = np.concatenate([fx, [0.5], 1.0 - fx[::-1]])
        center = 1.0 - 2.0 * math.fsum(fw)
        w = np.concatenate([fw, [center], fw[::-1]])
    else:
        last = 0.5 - math.fsum(fw)
        half = np.concatenate([fw, [last]])
        x = np.concatenate([fx, 1.0 - fx[::-1]])
        w = np.concatenate([half, half[::-1]])
    return x, w


def _reduce_symmetric_gradient(gx: np.ndarray, gw: np.ndarray, q: int) -> np.ndarray:
    nx, nw = free_counts(q, SYMMETRIC)
    mirror = q - 1 - np.arange(nx)
    g_points = gx[:nx] - gx[mirror]
    idx = np.arange(nw)
    pair = gw[idx] + gw[q - 1 - idx]
    if q % 2:
        g_weights = pair - 2.0 * gw[q // 2]
    else:
        g_weights = pair - (gw[q // 2 - 1] + gw[q // 2])
    return np.concatenate([g_points, g_weights])


def expand_full(params: FreeParams) -> QuadratureRule:
    x, w = _expand_full_arrays(params.free_points, params.free_weights)
    return QuadratureRule(x, w)


def _expand_full_arrays(fx: np.ndarray, fw: np.ndarray):
    if fw.shape[0] != fx.shape[0] - 1:
        raise ValueError("full mode needs one weight fewer than points")
    return fx.copy(), np.concatenate([fw, [1.0 - math.fsum(fw)]])


def _reduce_full_gradient(gx: np.ndarray, gw: np.ndarray) -> np.ndarray:
    return np.concatenate([gx, gw[:-1] - gw[-1]])


def expand(params: FreeParams, q: int) -> QuadratureRule:
    if params.mode == SYMMETRIC:
        return expand_symmetric(params, q)
    return expand_full(params)


def params_from_rule(rule: QuadratureRule, mode: str = SYMMETRIC) -> FreeParams:
    rule = rule.sorted()
    nx, nw = free_counts(rule.count, mode)
    return FreeParams(rule.points[:nx].copy(), rule.weights[:nw].copy(), mode)


# ---- initialisations ------------------------------------------------------


def init_base_case(q: int) -> FreeParams:
    """Interior-uniform points in (0, 0.5), all weights 1/q."""
    if q < 1:
        raise ValueError("q must be positive")
    nx, nw = free_counts(q)
    return FreeParams(0.5 * np.arange(1, nx + 1) / (nx + 1), np.full(nw, 1.0 / q))


def init_zero_continuity(q: int) -> FreeParams:
    """Points at the cell midpoints (2i - 1) / (2q), all weights 1/q."""
    if q < 1:
        raise ValueError("q must be positive")
    nx, nw = free_counts(q)
    return FreeParams((2.0 * np.arange(1, nx + 1) - 1.0) / (2.0 * q), np.full(nw, 1.0 / q))


def init_uniform_dp(prev: QuadratureRule | None, q: int, ne: int) -> FreeParams:
    """Scale the left part of the ``ne - 1`` element rule by ``(ne - 1) / ne``."""
    if prev is None:
        return init_base_case(q)
    nx, nw = free_counts(q)
    prev = prev.sorted()
    if prev.count < nx:
        raise ValueError(f"previous rule has {prev.count} points, need at least {nx}")
    scale = (ne - 1) / ne
    return FreeParams(prev.points[:nx] * scale, prev.weights[:nw] * scale)


def init_nonuniform(uniform_rule: QuadratureRule, uniform_partition: Partition,
                    target_partition: Partition) -> FreeParams:
    """Map each point of a uniform-partition rule into the matching target element."""
    if uniform_partition.ne != target_partition.ne:
        raise ValueError("partitions must have the same number of elements")
    ut = np.asarray(uniform_partition.knots)
    u = np.asarray(target_partition.knots)
    rule = uniform_rule.sorted()
    elem = np.clip(np.searchsorted(ut, rule.points, side="right") - 1, 0, ut.shape[0] - 2)
    scale = (u[elem + 1] - u[elem]) / (ut[elem + 1] - ut[elem])
    x = (rule.points - ut[elem]) * scale + u[elem]
    w = rule.weights * scale
    # rescaled weights need not sum to one; the eliminated weight absorbs the gap
    return FreeParams(x, w[:-1], FULL)


# ---- optimiser -------------------------------------------------------------


def learning_rate(q: int, constant: float = 1e-2, log_base: float = 10.0) -> float:
    """``constant / (q * log(q))``; decreasing in q for q >= 2."""
    if q < 2:
        raise ValueError("learning rate is defined for q >= 2")
    return constant / (q * math.log(q, log_base))


def yogi_step(state: OptimizerState, params: np.ndarray, grad: np.ndarray):
    """One Yogi update; returns the new state and parameters."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or grad.shape != state.first_moment.shape:
        raise ValueError("gradient, parameters and optimiser state must have equal size")
    if not np.all(np.isfinite(grad)):
        raise SearchAborted(f"non-finite gradient at epoch {state.epoch}")
    b1, b2 = state.beta1, state.beta2
    g2 = grad * grad
    m = b1 * state.first_moment + (1.0 - b1) * grad
    v = state.second_moment - (1.0 - b2) * np.sign(state.second_moment - g2) * g2
    t = state.epoch + 1
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, first_moment=m, second_moment=v, epoch=t), new


# ---- search ----------------------------------------------------------------


class _Objective:
    """L^2 and its gradient as functions of the flattened free parameters."""

    def __init__(self, ctx: LossContext, q: int, mode: str, nx: int, squared: bool = True):
        self.ctx, self.q, self.mode, self.nx = ctx, q, mode, nx
        self.squared = squared

    def arrays(self, theta: np.ndarray):
        fx, fw = theta[: self.nx], theta[self.nx :]
        if self.mode == SYMMETRIC:
            return _expand_symmetric_arrays(fx, fw, self.q)
        return _expand_full_arrays(fx, fw)

    def __call__(self, theta: np.ndarray):
        x, w = self.arrays(theta)
        l2, gx, gw = loss_and_gradient(self.ctx, x, w)
        if self.mode == SYMMETRIC:
            g = _reduce_symmetric_gradient(gx, gw, self.q)
        else:
            g = _reduce_full_gradient(gx, gw)
        if not self.squared and l2 > 0.0:
            g = g / (2.0 * math.sqrt(l2))
        return l2, g


def _project(theta: np.ndarray, nx: int, mode: str, margin: float):
    """Clip points into the box in place; returns the sorting permutation if order broke."""
    hi = 0.5 - margin if mode == SYMMETRIC else 1.0 - margin
    pts = np.clip(theta[:nx], margin, hi)
    theta[:nx] = pts
    if np.all(np.diff(pts) > 0.0):
        return None
    return np.argsort(pts, kind="stable")


def search(space: SplineSpace, init: FreeParams, config: SearchConfig | None = None,
           ctx: LossContext | None = None, trace: list | None = None) -> SearchResult:
    """Minimise L^2 from ``init`` with Yogi; convergence is decided by exactness.

    If ``trace`` is given, the loss L after every epoch is appended to it.
    """
    config = config or SearchConfig()
    q = optimal_point_count(space.degree, space.continuity, space.ne)
    nx, nw = free_counts(q, init.mode)
    if init.free_points.shape[0] != nx or init.free_weights.shape[0] != nw:
        raise ValueError(f"initial parameters do not match q={q} ({init.mode})")
    ctx = ctx or build_context(space)
    objective = _Objective(ctx, q, init.mode, nx, config.objective == "squared")
    theta = init.flat()
    _project(theta, nx, init.mode, config.box_margin)

    l2, grad = objective(theta)
    initial_loss = math.sqrt(l2)
    epoch = 0
    if q > 1 and theta.size:
        state = OptimizerState.fresh(theta.size, learning_rate(q, config.lr_constant, config.lr_log_base),
                                     config.initial_accumulator, config.beta1, config.beta2,
                                     config.eps)
        best_l2, best_theta = l2, theta.copy()
        exact_stop = False
        while epoch < config.max_epochs and math.sqrt(l2) >= config.stop_threshold:
            if config.stop_on_exactness and epoch % config.check_every == 0 and epoch > 0:
                if math.sqrt(l2) < 1e-8 and _exact(objective, theta, space, config):
                    exact_stop = True
                    break
            state, theta = yogi_step(state, theta, grad)
            epoch = state.epoch
            perm = _project(theta, nx, init.mode, config.box_margin)
            if perm is not None:
                x, w = objective.arrays(theta)
                theta = params_from_rule(QuadratureRule(x, w), init.mode).flat()
                state = replace(state, first_moment=np.zeros_like(theta),
                                second_moment=np.full_like(theta, config.initial_accumulator))
            l2, grad = objective(theta)
            if trace is not None:
                trace.append(math.sqrt(l2))
            if l2 < best_l2:
                best_l2, best_theta = l2, theta.copy()
        if not exact_stop and l2 > best_l2:
            theta, l2 = best_theta, best_l2

    x, w = objective.arrays(theta)
    rule = QuadratureRule(x, w).sorted()
    report = verify_exactness(rule, space)
    converged = (report.max_rel_error <= config.exactness_tol and bool(np.all(rule.weights > 0))
                 and bool(np.all(np.diff(rule.points) > 0)))
    return SearchResult(rule, math.sqrt(l2), epoch, converged, report.max_rel_error,
                        initial_loss, space)


def _exact(objective: _Objective, theta: np.ndarray, space: SplineSpace, config: SearchConfig) -> bool:
    x, w = objective.arrays(theta)
    if np.any(w <= 0.0):
        return False
    return verify_exactness(QuadratureRule(x, w).sorted(), space).max_rel_error <= config.exactness_tol


# ---- chains and sweeps ----------------------------------------------------


def chain_init(d: int, k: int, ne: int, prev: QuadratureRule | None) -> FreeParams:
    """k = 0 spaces use the midpoint-cell start; others scale the ``ne - 1`` rule."""
    q = optimal_point_count(d, k, ne)
    if k == 0:
        return init_zero_continuity(q)
    return init_uniform_dp(prev, q, ne)


def uniform_chain(d: int, k: int, ne_max: int, config: SearchConfig | None = None,
                  known: dict[int, QuadratureRule] | None = None,
                  ne_min: int = 2) -> Iterator[tuple[int, SearchResult | None]]:
    """Yield ``(ne, result)`` for ne = ne_min..ne_max on uniform partitions.

    ``known`` maps ne to already converged rules which are reused instead of
    searched again (result ``None``).  After a failed link the remaining ne
    are yielded with a non-converged placeholder and no search.
    """
    config = config or SearchConfig()
    known = known or {}
    prev = None
    broken = False
    for ne in range(ne_min, ne_max + 1):
        if ne in known:
            prev = known[ne]
            yield ne, None
            continue
        space = SplineSpace(d, k, Partition.uniform(ne))
        if broken:
            yield ne, _skipped(space)
            continue
        if k > 0 and prev is None and ne > ne_min:
            raise RuntimeError("uniform chain lost its predecessor")
        result = search(space, chain_init(d, k, ne, prev), config)
        if not result.converged:
            log.warning("chain (d=%d, k=%d) failed at ne=%d: rel err %.3g after %d epochs",
                        d, k, ne, result.max_rel_error, result.epochs)
            broken = k > 0
        prev = result.rule
        yield ne, result


def _skipped(space: SplineSpace) -> SearchResult:
    q = optimal_point_count(space.degree, space.continuity, space.ne)
    empty = QuadratureRule(np.full(q, np.nan), np.full(q, np.nan))
    return SearchResult(empty, math.nan, 0, False, math.nan, math.nan, space)


def discover_uniform(d: int, k: int, ne: int, config: SearchConfig | None = None,
                     known: dict[int, QuadratureRule] | None = None) -> SearchResult:
    """Optimal rule for S_k^d on ``ne`` uniform elements, running the DP chain as needed."""
    config = config or SearchConfig()
    known = dict(known or {})
    if ne in known:
        space = SplineSpace(d, k, Partition.uniform(ne))
        rule = known[ne]
        report = verify_exactness(rule, space)
        return SearchResult(rule, math.nan, 0, report.passed(config.exactness_tol),
                            report.max_rel_error, math.nan, space)
    if ne == 1 or k == 0:
        space = SplineSpace(d, k, Partition.uniform(ne))
        q = optimal_point_count(d, k, ne)
        init = init_zero_continuity(q) if k == 0 else init_base_case(q)
        return search(space, init, config)
    below = [n for n in known if n < ne]
    result = None
    for _, result in uniform_chain(d, k, ne, config, known, ne_min=max(below, default=2)):
        pass
    return result


def discover_nonuniform(d: int, k: int, partition: Partition, config: SearchConfig | None = None,
                        uniform_rule: QuadratureRule | None = None) -> SearchResult:
    """Single-shot search on a non-uniform partition, started from the uniform rule."""
    config = config or SearchConfig()
    ne = partition.ne
    uniform = Partition.uniform(ne)
    if uniform_rule is None:
        base = discover_uniform(d, k, ne, config)
        if not base.converged:
            raise RuntimeError(f"no uniform rule for (d={d}, k={k}, ne={ne}) to start from")
        uniform_rule = base.rule
    init = init_nonuniform(uniform_rule, uniform, partition)
    return search(SplineSpace(d, k, partition), init, config)


def sweep_cases(d_max: int, ne_max: int, d_min: int = 2, ne_min: int = 2):
    """The (d, k) chains and their ne ranges of a uniform sweep."""
    if d_max < d_min or ne_max < ne_min:
        return []
    return [(d, k, list(range(ne_min, ne_max + 1))) for d in range(d_min, d_max + 1) for k in range(d)]


def sweep_uniform(d_max: int, ne_max: int, config: SearchConfig | None = None,
                  d_min: int = 2) -> dict[tuple[int, int, int], SearchResult]:
    """All chains of a uniform sweep, run sequentially in (d, k) order."""
    config = config or SearchConfig()
    table = {}
    for d, k, nes in sweep_cases(d_max, ne_max, d_min):
        for ne, result in uniform_chain(d, k, nes[-1], config):
            table[(d, k, ne)] = result
    return table
