"""Linear minimisation over PPT states by ADMM.

Solves ``min Tr(G X)`` over states X with ``X^Gamma = Z``, ``Z >= 0`` where
Gamma is the partial transpose on one side of a bipartite cut.  Each
iteration projects onto the state simplex and onto the PSD cone; the dual
variable gives a certified lower bound

    lambda_min(G - P(-Lambda)^Gamma) <= min Tr(G X),

valid for any PSD multiplier.  The primal iterate is made exactly PPT by
mixing in I/d, so the reported value is attained by a member of the set.
"""
import logging
from dataclasses import dataclass

import numpy as np

from core.errors import LayoutError
from core.free_sets import OracleConfig, OracleResult
from core.operators import (
    DensityOperator,
    HermitianOperator,
    SystemLayout,
    partial_transpose_array,
    project_density_array,
    project_psd_array,
)

logger = logging.getLogger(__name__)

GAP_CHECK_EVERY = 10


@dataclass(frozen=True)
class PPTWarmStart:
    """ADMM iterates carried from one oracle call to the next."""

    x: np.ndarray
    z: np.ndarray
    dual: np.ndarray


def _dual_bound(g: np.ndarray, dual: np.ndarray, transpose) -> float:
    multiplier = project_psd_array(-dual)
    shifted = g - transpose(multiplier)
    return float(np.linalg.eigvalsh((shifted + shifted.conj().T) / 2)[0])


def _feasible(x: np.ndarray, transpose, d: int) -> np.ndarray:
    mu = float(np.linalg.eigvalsh(transpose(x))[0])
    if mu >= 0:
        return x
    t = -mu / (1.0 / d - mu)
    return (1 - t) * x + t * np.eye(d) / d


def ppt_linear_minimum(g, layout: SystemLayout, transposed, cfg: OracleConfig,
                       warm: PPTWarmStart | None = None) -> OracleResult:
    g = g.matrix if isinstance(g, HermitianOperator) else np.asarray(g, dtype=complex)
    d = layout.total
    if g.shape != (d, d):
        raise LayoutError(f"operator of shape {g.shape} does not fit layout {layout}")

    def transpose(m):
        return partial_transpose_array(m, transposed, layout.dims)

    scale = float(np.linalg.norm(g, 2))
    penalty = max(scale, 1e-8)
    if warm is not None and warm.x.shape == (d, d):
        x, z, dual = warm.x, warm.z, warm.dual
    else:
        x = np.eye(d, dtype=complex) / d
        z = transpose(x)
        dual = np.zeros((d, d), dtype=complex)

    upper, lower = np.inf, -np.inf
    best_x = _feasible(x, transpose, d)
    converged = False
    iteration = 0
    for iteration in range(1, cfg.ppt_max_iter + 1):
        x = project_density_array(transpose(z - dual / penalty) - g / penalty)
        xg = transpose(x)
        z = project_psd_array(xg + dual / penalty)
        dual = dual + penalty * (xg - z)
        if iteration % GAP_CHECK_EVERY and iteration != cfg.ppt_max_iter:
            continue
        candidate = _feasible(x, transpose, d)
        value = float(np.real(np.sum(g.conj() * candidate)))
        if value < upper:
            upper, best_x = value, candidate
        lower = max(lower, _dual_bound(g, dual, transpose))
        if upper - lower <= cfg.ppt_gap_tol * max(1.0, scale):
            converged = True
            break

    residual = upper - lower
    if converged:
        logger.debug(f"PPT oracle converged in {iteration} iterations: value={upper:.8f}, gap={residual:.2e}")
    else:
        logger.warning(f"PPT oracle hit {cfg.ppt_max_iter} iterations with gap {residual:.2e}")
    vertex = DensityOperator(best_x, layout)
    return OracleResult(vertex, upper, lower=lower, converged=converged, residual=residual,
                        warm=PPTWarmStart(x, z, dual))
