"""Relative entropy of resource: D_F(rho) = inf over sigma in F of D(rho||sigma).

Away-step Frank-Wolfe over the free set.  Iterates are blended with a small
weight of the model's anchor state (I/d, or the hull barycenter) so the
gradient stays finite; the blended point is itself free, so the objective
at every iterate is an honest upper bound, and the blending cost is folded
into the lower bound.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from core.entropy import relative_entropy, support_leak
from core.errors import LayoutError, OracleError, SupportViolationError
from core.free_sets import ConvexHull, FreeSetModel, FullySeparable, OracleConfig, PPTStates, sample_free_state
from core.operators import SUPPORT_RTOL, DensityOperator, HermitianOperator, frechet_log, trace_distance

logger = logging.getLogger(__name__)

STEP_MIN = 1e-9
STALL_TOL = 1e-15


@dataclass(frozen=True)
class SolverConfig:
    """Frank-Wolfe settings.

    ``gap_tol`` bounds the bracket width in nats.  When rho itself is free,
    Pinsker puts the returned optimiser within trace distance
    ``sqrt(2 * gap_tol)`` of rho, so independent runs agree to twice that.
    """

    max_iter: int = 500
    gap_tol: float = 1e-3
    line_search_evals: int = 60
    oracle: OracleConfig = field(default_factory=OracleConfig)
    support_tol: float = SUPPORT_RTOL
    blend: float = 1e-6
    init_samples: int = 4
    ppt_floor: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.gap_tol <= 0:
            raise ValueError("stopping gap must be positive")
        if self.max_iter < 1 or self.line_search_evals < 1 or self.init_samples < 1:
            raise ValueError("iteration counts must be positive")
        if not 0 < self.blend < 1:
            raise ValueError("blend weight must lie in (0, 1)")


@dataclass
class SolverResult:
    """Distance estimate with its bracket ``[lower, upper]``.

    ``value`` is the upper end, attained by ``sigma_star``; ``fw_gap`` is the
    bracket width.  ``certified`` is False when the lower end relies on a
    heuristic oracle; ``certified_floor`` then holds a PPT lower bound if one
    was requested.
    """

    value: float
    sigma_star: DensityOperator
    fw_gap: float
    iterations: int
    bracket: tuple[float, float]
    blend_bias: float = 0.0
    certified: bool = True
    certified_floor: float | None = None
    history: list[float] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    oracle_flags: int = 0
    converged: bool = True

    @property
    def lower(self) -> float:
        return self.bracket[0]

    @property
    def upper(self) -> float:
        return self.bracket[1]

    @property
    def certified_lower(self) -> float:
        """Best lower bound that does not depend on a heuristic oracle."""
        if self.certified or self.certified_floor is None:
            return self.lower
        return self.certified_floor

    @property
    def lower_is_certified(self) -> bool:
        return self.certified or self.certified_floor is not None


def relent_gradient(rho, sigma, tol: float = SUPPORT_RTOL) -> HermitianOperator:
    """Gradient of sigma -> D(rho||sigma): I - Dlog_sigma(rho)."""
    leak = support_leak(rho, sigma, tol)
    if leak > tol * max(1.0, rho.trace):
        raise SupportViolationError(f"state leaks {leak:.3e} outside the support; gradient undefined")
    derivative = frechet_log(sigma, rho, support_tol=tol)
    return HermitianOperator(np.eye(rho.dim) - derivative.matrix, rho.layout)


class _ActiveSet:
    """Vertices with convex weights; the iterate is their weighted sum."""

    def __init__(self, vertices, weights):
        self.vertices = [v.matrix for v in vertices]
        self.weights = list(weights)

    @property
    def point(self) -> np.ndarray:
        return sum(w * v for w, v in zip(self.weights, self.vertices))

    def add(self, vertex: np.ndarray, weight: float):
        self.weights = [w * (1 - weight) for w in self.weights]
        for i, v in enumerate(self.vertices):
            if np.max(np.abs(v - vertex)) < 1e-12:
                self.weights[i] += weight
                return
        self.vertices.append(vertex)
        self.weights.append(weight)

    def shift_away(self, i: int, gamma: float, drop: bool):
        self.weights = [w * (1 + gamma) for w in self.weights]
        self.weights[i] -= gamma
        if drop or self.weights[i] < 1e-14:
            del self.weights[i], self.vertices[i]
        total = sum(self.weights)
        self.weights = [w / total for w in self.weights]


def _initial_active_set(model: FreeSetModel, cfg: SolverConfig) -> _ActiveSet:
    if isinstance(model, ConvexHull):
        n = len(model.states)
        return _ActiveSet(model.states, [1.0 / n] * n)
    rng = np.random.default_rng(cfg.seed)
    samples = [sample_free_state(model, rng) for _ in range(cfg.init_samples)]
    return _ActiveSet(samples, [1.0 / len(samples)] * len(samples))


def _result(value, sigma, lower, iterations, **kw) -> SolverResult:
    lower = min(lower, value)
    width = 0.0 if lower == value else value - lower
    return SolverResult(value=value, sigma_star=sigma, fw_gap=width, iterations=iterations,
                        bracket=(lower, value), **kw)


def free_distance(rho: DensityOperator, model: FreeSetModel, cfg: SolverConfig | None = None) -> SolverResult:
    cfg = cfg or SolverConfig()
    if rho.layout.dims != model.layout.dims:
        raise LayoutError(f"state layout {rho.layout} does not match model layout {model.layout}")
    tol = cfg.support_tol

    if isinstance(model, ConvexHull):
        if len(model.states) == 1:
            omega = model.states[0]
            value = relative_entropy(rho, omega, tol)
            return _result(value, omega, value, 0)
        barycenter = model.anchor()
        if math.isinf(relative_entropy(rho, barycenter, tol)):
            logger.info("State leaks out of the support of every hull element; distance is +inf")
            return _result(math.inf, barycenter, math.inf, 0, diagnostics=["support outside the hull"])

    beta = cfg.blend
    anchor = model.anchor().matrix
    bias = -math.log1p(-beta)

    def blended(tau: np.ndarray) -> DensityOperator:
        return DensityOperator((1 - beta) * tau + beta * anchor, model.layout)

    def objective(tau: np.ndarray) -> float:
        return relative_entropy(rho, blended(tau), tol)

    active = _initial_active_set(model, cfg)
    tau = active.point
    upper = objective(tau)
    best_lower = -math.inf
    history, diagnostics = [], []
    oracle_flags = 0
    warm = None
    last = None
    converged = False
    iteration = 0

    for iteration in range(1, cfg.max_iter + 1):
        sigma = blended(tau)
        upper = relative_entropy(rho, sigma, tol)
        history.append(upper)
        grad = relent_gradient(rho, sigma, tol)
        last = model.oracle(grad, cfg.oracle, warm)
        warm = last.warm
        if not last.converged:
            oracle_flags += 1

        lin_tau = grad.inner(tau)
        vertex_values = [grad.inner(v) for v in active.vertices]
        lin_lower = last.lower if last.lower is not None else last.value
        lin_lower = min(lin_lower, min(vertex_values))
        gap = (1 - beta) * (lin_tau - lin_lower)
        if gap < -1e-10:
            diagnostics.append(f"iteration {iteration}: negative gap {gap:.3e}")
        best_lower = max(best_lower, upper - max(gap, 0.0))
        logger.debug(f"Frank-Wolfe iteration {iteration}: upper={upper:.8f}, gap={gap:.3e}")
        if upper - best_lower <= cfg.gap_tol:
            converged = True
            break

        fw_gain = lin_tau - last.value
        away = int(np.argmax(vertex_values))
        away_gain = vertex_values[away] - lin_tau
        if fw_gain >= away_gain or len(active.vertices) == 1:
            vertex = last.vertex.matrix

            def along(lam):
                return objective((1 - lam) * vertex + lam * tau)

            found = minimize_scalar(along, bounds=(STEP_MIN, 1 - STEP_MIN), method="bounded",
                                    options={"maxiter": cfg.line_search_evals, "xatol": 1e-12})
            if found.fun >= upper - STALL_TOL:
                diagnostics.append(f"iteration {iteration}: line search stalled")
                logger.info(f"Frank-Wolfe stalled at iteration {iteration} with gap {gap:.3e}")
                break
            active.add(vertex, 1 - float(found.x))
        else:
            w = active.weights[away]
            gamma_max = w / (1 - w)
            direction = tau - active.vertices[away]

            def along(gamma):
                return objective(tau + gamma * direction)

            found = minimize_scalar(along, bounds=(0.0, gamma_max), method="bounded",
                                    options={"maxiter": cfg.line_search_evals, "xatol": 1e-12})
            gamma, value = float(found.x), float(found.fun)
            at_max = along(gamma_max)
            drop = at_max <= value
            if drop:
                gamma, value = gamma_max, at_max
            if value >= upper - STALL_TOL:
                diagnostics.append(f"iteration {iteration}: away step stalled")
                break
            active.shift_away(away, gamma, drop)
        tau = active.point

    sigma = blended(tau)
    upper = relative_entropy(rho, sigma, tol)
    if not converged and last is not None and not last.converged:
        bracket = (max(best_lower - bias, 0.0), upper)
        raise OracleError(f"oracle did not converge; solver stopped after {iteration} iterations",
                          residual=last.residual, bracket=bracket)
    if not converged:
        diagnostics.append(f"stopping gap not reached after {iteration} iterations")
        logger.warning(f"Solver stopped without closing the gap: bracket width {upper - best_lower:.3e}")

    lower = max(best_lower - bias, 0.0)
    floor = None
    if cfg.ppt_floor and isinstance(model, FullySeparable) and model.layout.parties >= 2:
        floor_cfg = replace(cfg, ppt_floor=False)
        try:
            floor = free_distance(rho, PPTStates(model.layout), floor_cfg).lower
        except OracleError as exc:
            # dual bounds from an unfinished splitting run are still valid
            floor = exc.bracket[0]
            diagnostics.append(f"PPT floor taken from an unconverged run (residual {exc.residual:.3e})")
        logger.info(f"PPT floor for separable distance: {floor:.6f}")

    certified = model.certified and oracle_flags == 0
    logger.info(f"Free distance to {model.describe()}: [{lower:.6f}, {upper:.6f}] after {iteration} iterations")
    return _result(upper, sigma, lower, iteration, blend_bias=bias, certified=certified, certified_floor=floor,
                   history=history, diagnostics=diagnostics, oracle_flags=oracle_flags, converged=converged)


def optimizer_spread(results) -> float:
    """Largest pairwise trace distance between the optimal states of several runs."""
    states = [r.sigma_star for r in results]
    return max((trace_distance(a, b) for i, a in enumerate(states) for b in states[i + 1:]), default=0.0)
