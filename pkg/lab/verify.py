"""Randomised identity suites for the entropy and solver primitives."""
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.entropy import (
    data_processing_excess,
    expansion_residual,
    fiden_residual,
    homogeneity_residual,
    joint_convexity_excess,
    relative_entropy,
    rescaling_residual,
)
from core.operators import DensityOperator, HermitianOperator, PositiveOperator, SystemLayout
from core.random_states import random_channel, random_density
from core.solver import relent_gradient

logger = logging.getLogger(__name__)

BIPARTITE_LAYOUTS = (SystemLayout((2, 2)), SystemLayout((2, 3)))
SCALING_CONSTANTS = (0.1, 1.0, 7.0)
RESCALING_CONSTANT = 3.0
FD_STEP = 1e-5


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: int
    total: int
    worst: float

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def __str__(self):
        return f"{self.name}: {self.passed}/{self.total}"


def _run(name: str, count: int, trial: Callable[[int, np.random.Generator], tuple[bool, float]],
         rng: np.random.Generator) -> SuiteResult:
    passed, worst = 0, 0.0
    for i in range(count):
        ok, residual = trial(i, rng)
        passed += int(ok)
        if math.isfinite(residual):
            worst = max(worst, residual)
        if not ok:
            logger.warning(f"{name} trial {i} failed with residual {residual:.3e}")
    logger.info(f"Suite {name}: {passed}/{count} passed, worst residual {worst:.3e}")
    return SuiteResult(name, passed, count, worst)


def _layout(i: int) -> SystemLayout:
    return BIPARTITE_LAYOUTS[i % len(BIPARTITE_LAYOUTS)]


def _fiden(i, rng):
    layout = _layout(i)
    rho = random_density(layout, rng)
    rank = 1 if i % 10 == 9 else None
    omega_a = random_density(layout.sub([0]), rng, rank=rank)
    omega_b = random_density(layout.sub([1]), rng)
    check = fiden_residual(rho, omega_a, omega_b)
    return check.holds, check.residual


def _expansion(i, rng):
    layout = _layout(i)
    rho = random_density(layout, rng)
    sigma = random_density(layout, rng, rank=layout.total - 1 if i % 10 == 9 else None)
    check = expansion_residual(rho, sigma)
    return check.holds, check.residual


def _scaling(i, rng):
    layout = _layout(i)
    rho, sigma = random_density(layout, rng), random_density(layout, rng)
    checks = [homogeneity_residual(rho, sigma, c) for c in SCALING_CONSTANTS]
    checks.append(rescaling_residual(rho, sigma, RESCALING_CONSTANT))
    worst = max(c.residual for c in checks)
    return all(c.verdict == "finite" and c.residual <= 1e-9 for c in checks), worst


def _data_processing(i, rng):
    layout = _layout(i)
    rho, sigma = random_density(layout, rng), random_density(layout, rng)
    kraus = random_channel(layout.total, 2 + i % 3, rng)
    excess = data_processing_excess(rho, sigma, kraus)
    return excess <= 1e-8, max(excess, 0.0)


def _joint_convexity(i, rng):
    layout = _layout(i)
    weights = rng.dirichlet(np.ones(3))
    rhos = [random_density(layout, rng) for _ in range(3)]
    sigmas = [random_density(layout, rng) for _ in range(3)]
    excess = joint_convexity_excess(weights, rhos, sigmas)
    return excess <= 1e-9, max(excess, 0.0)


def _nonnegativity(i, rng):
    layout = _layout(i)
    value = relative_entropy(random_density(layout, rng), random_density(layout, rng))
    return value >= -1e-9, max(-value, 0.0)


def _gradient(i, rng):
    """Directional derivative of sigma -> D(rho||sigma) against central differences."""
    layout = _layout(i)
    d = layout.total
    rho = random_density(layout, rng)
    sigma = DensityOperator(0.5 * random_density(layout, rng).matrix + 0.5 * np.eye(d) / d, layout)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    x = (x + x.conj().T) / 2
    x /= np.linalg.norm(x)
    plus = relative_entropy(rho, PositiveOperator(sigma.matrix + FD_STEP * x))
    minus = relative_entropy(rho, PositiveOperator(sigma.matrix - FD_STEP * x))
    numeric = (plus - minus) / (2 * FD_STEP)
    analytic = relent_gradient(rho, sigma).inner(HermitianOperator(x))
    error = abs(numeric - analytic) / max(1.0, abs(numeric))
    return error <= 1e-6, error


SUITES = {
    "f-iden": _fiden,
    "re-exp": _expansion,
    "scaling": _scaling,
    "data-processing": _data_processing,
    "joint-convexity": _joint_convexity,
    "nonnegativity": _nonnegativity,
    "gradient": _gradient,
}


def verify_all(count: int = 200, seed: int = 0, suites=None) -> list[SuiteResult]:
    """Run each named suite on ``count`` random instances; each suite gets its own seeded stream."""
    names = list(suites or SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites: {unknown}")
    return [_run(name, count, SUITES[name], np.random.default_rng([seed, k])) for k, name in enumerate(names)]
