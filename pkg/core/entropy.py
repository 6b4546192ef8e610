"""Entropic functionals on positive operators, with extended values.

All quantities are in nats.  ``math.inf`` is an ordinary return value: the
relative entropy of an operator whose support leaks out of the second
argument's support is +inf, never an exception.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.errors import LayoutError
from core.operators import (
    SUPPORT_RTOL,
    Partition,
    PositiveOperator,
    apply_kraus,
    eta,
    log_on_support,
    partial_trace,
    permute_systems,
    tensor,
)

logger = logging.getLogger(__name__)

MI_DISCREPANCY_WARN = 1e-8


def _positive(op) -> PositiveOperator:
    return op if isinstance(op, PositiveOperator) else PositiveOperator(op)


def format_nats(value: float) -> str:
    """Six decimals, or the literal ``inf``."""
    if math.isinf(value):
        return "inf"
    if abs(value) < 5e-7:
        value = 0.0
    return f"{value:.6f}"


def von_neumann_entropy(rho) -> float:
    """Homogeneous extension Tr eta(rho) - eta(Tr rho); zero at the zero operator."""
    rho = _positive(rho)
    vals = rho.eigenvalues
    total = float(np.sum(vals))
    return float(np.sum(eta(vals)) - eta(np.array([total]))[0])


def support_leak(rho, sigma, tol: float = SUPPORT_RTOL) -> float:
    """Tr rho (I - P_sigma): weight of ``rho`` outside the support of ``sigma``."""
    vals, vecs = sigma.spectrum
    lam_max = float(vals[-1])
    if lam_max <= 0:
        return rho.trace
    u = vecs[:, vals > tol * lam_max]
    inside = float(np.real(np.trace(u.conj().T @ rho.matrix @ u)))
    return max(rho.trace - inside, 0.0)


def _leaks(rho, sigma, tol) -> bool:
    return support_leak(rho, sigma, tol) > tol * max(1.0, rho.trace)


def _trace_rho_log_sigma(rho, sigma, tol) -> float:
    vals, vecs = sigma.spectrum
    logs = log_on_support(vals, tol * float(vals[-1]))
    rotated = vecs.conj().T @ rho.matrix @ vecs
    return float(np.real(np.sum(np.diag(rotated) * logs)))


def cross_entropy(rho, sigma, tol: float = SUPPORT_RTOL) -> float:
    """Tr rho (-ln sigma), +inf when supp rho is not inside supp sigma."""
    rho, sigma = _positive(rho), _positive(sigma)
    if rho.trace <= 0:
        return 0.0
    if _leaks(rho, sigma, tol):
        return math.inf
    return -_trace_rho_log_sigma(rho, sigma, tol)


def relative_entropy(rho, sigma, tol: float = SUPPORT_RTOL) -> float:
    """Lindblad relative entropy D(rho||sigma) of two positive operators.

    Tr rho ln rho - Tr rho ln sigma + Tr sigma - Tr rho, with D(0||sigma) = Tr sigma
    and +inf when rho leaks more than ``tol`` of its weight outside supp sigma.
    For states the trace terms cancel and this is Umegaki's divergence.
    """
    rho, sigma = _positive(rho), _positive(sigma)
    if rho.dim != sigma.dim:
        raise LayoutError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    if rho.trace <= 0:
        return sigma.trace
    if _leaks(rho, sigma, tol):
        return math.inf
    rho_vals = rho.eigenvalues
    rho_log_rho = float(np.sum(rho_vals * log_on_support(rho_vals)))
    value = rho_log_rho - _trace_rho_log_sigma(rho, sigma, tol) + sigma.trace - rho.trace
    return float(value)


def relative_entropy_expansion(rho, sigma, tol: float = SUPPORT_RTOL) -> float:
    """Tr rho(-ln sigma) - S(rho) - eta(Tr rho) + Tr sigma - Tr rho."""
    rho, sigma = _positive(rho), _positive(sigma)
    cross = cross_entropy(rho, sigma, tol)
    if math.isinf(cross):
        return math.inf
    tr = rho.trace
    return cross - von_neumann_entropy(rho) - float(eta(np.array([tr]))[0]) + sigma.trace - tr


@dataclass(frozen=True)
class MutualInformationReport:
    via_divergence: float
    via_entropies: float
    discrepancy: float
    partition: Partition


def _partition_for(rho, partition: Partition | None) -> Partition:
    partition = partition if partition is not None else Partition.finest(rho.layout.parties)
    partition.validate_for(rho.layout)
    if len(partition.blocks) < 2:
        raise LayoutError("mutual information needs at least two subsystems")
    return partition


def marginals(rho, partition: Partition) -> list[PositiveOperator]:
    return [partial_trace(rho, block) for block in partition.blocks]


def mutual_information_report(rho, partition: Partition | None = None) -> MutualInformationReport:
    """I(A1:...:Am) both as D(rho || x_k rho_Ak) and as sum_k S(rho_Ak) - S(rho)."""
    rho = _positive(rho)
    partition = _partition_for(rho, partition)
    parts = marginals(rho, partition)
    reordered = permute_systems(rho, partition.order)
    product = tensor(*parts)
    via_divergence = relative_entropy(reordered, product)
    via_entropies = sum(von_neumann_entropy(p) for p in parts) - von_neumann_entropy(rho)
    discrepancy = abs(via_divergence - via_entropies)
    if discrepancy > MI_DISCREPANCY_WARN:
        logger.warning(f"Mutual information cross-check off by {discrepancy:.3e} for partition {partition}")
    return MutualInformationReport(via_divergence, via_entropies, discrepancy, partition)


def mutual_information(rho, partition: Partition | None = None) -> float:
    return mutual_information_report(rho, partition).via_divergence


@dataclass(frozen=True)
class IdentityCheck:
    """Outcome of an exact identity check: ``verdict`` is finite, both-infinite or mismatch."""

    residual: float
    verdict: str

    @property
    def holds(self) -> bool:
        return self.verdict == "both-infinite" or (self.verdict == "finite" and self.residual <= 1e-8)


def compare_extended(lhs: float, rhs: float) -> IdentityCheck:
    lhs_inf, rhs_inf = math.isinf(lhs), math.isinf(rhs)
    if lhs_inf and rhs_inf:
        return IdentityCheck(0.0, "both-infinite")
    if lhs_inf or rhs_inf:
        return IdentityCheck(math.inf, "mismatch")
    return IdentityCheck(abs(lhs - rhs), "finite")


def fiden_residual(rho, omega_a, omega_b, tol: float = SUPPORT_RTOL) -> IdentityCheck:
    """D(rho||wA x wB) against D(rho_A||wA) + D(rho_B||wB) + I(A:B)rho for a bipartite rho."""
    rho = _positive(rho)
    if rho.layout.parties != 2:
        raise LayoutError(f"expected a bipartite layout, got {rho.layout}")
    omega_a, omega_b = _positive(omega_a), _positive(omega_b)
    if (omega_a.dim, omega_b.dim) != rho.layout.dims:
        raise LayoutError(f"reference dims {(omega_a.dim, omega_b.dim)} do not match {rho.layout}")
    lhs = relative_entropy(rho, tensor(omega_a, omega_b), tol)
    rho_a, rho_b = partial_trace(rho, [0]), partial_trace(rho, [1])
    rhs = relative_entropy(rho_a, omega_a, tol) + relative_entropy(rho_b, omega_b, tol) + mutual_information(rho)
    return compare_extended(lhs, rhs)


def expansion_residual(rho, sigma, tol: float = SUPPORT_RTOL) -> IdentityCheck:
    return compare_extended(relative_entropy(rho, sigma, tol), relative_entropy_expansion(rho, sigma, tol))


def homogeneity_residual(rho, sigma, c: float, tol: float = SUPPORT_RTOL) -> IdentityCheck:
    """D(c rho || c sigma) against c D(rho||sigma)."""
    rho, sigma = _positive(rho), _positive(sigma)
    return compare_extended(relative_entropy(rho * c, sigma * c, tol), c * relative_entropy(rho, sigma, tol))


def rescaling_residual(rho, sigma, c: float, tol: float = SUPPORT_RTOL) -> IdentityCheck:
    """D(rho || c sigma) against D(rho||sigma) - Tr rho ln c + (c - 1) Tr sigma."""
    rho, sigma = _positive(rho), _positive(sigma)
    base = relative_entropy(rho, sigma, tol)
    return compare_extended(relative_entropy(rho, sigma * c, tol),
                            base - rho.trace * math.log(c) + (c - 1.0) * sigma.trace)


def joint_convexity_excess(weights: Sequence[float], rhos: Sequence, sigmas: Sequence,
                           tol: float = SUPPORT_RTOL) -> float:
    """D(sum p rho_i || sum p sigma_i) - sum p D(rho_i||sigma_i); non-positive up to round-off."""
    weights = np.asarray(weights, dtype=float)
    mix_rho = sum(w * r.matrix for w, r in zip(weights, rhos))
    mix_sigma = sum(w * s.matrix for w, s in zip(weights, sigmas))
    rhs = sum(w * relative_entropy(r, s, tol) for w, r, s in zip(weights, rhos, sigmas))
    if math.isinf(rhs):
        return -math.inf
    return relative_entropy(PositiveOperator(mix_rho), PositiveOperator(mix_sigma), tol) - rhs


def data_processing_excess(rho, sigma, kraus: Sequence[np.ndarray], tol: float = SUPPORT_RTOL) -> float:
    """D(Phi rho || Phi sigma) - D(rho||sigma) for the channel given by ``kraus``."""
    before = relative_entropy(rho, sigma, tol)
    if math.isinf(before):
        return -math.inf
    after = relative_entropy(apply_kraus(_positive(rho), kraus), apply_kraus(_positive(sigma), kraus), tol)
    return after - before