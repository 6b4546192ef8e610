"""Converging state sequences built to satisfy (or deliberately miss) continuity premises.

A sequence is a finite prefix rho_1..rho_N plus its limit rho_0.  Each
generator records its family tag and parameters so the harness can decide
which sufficient condition for continuity applies.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from core.errors import LayoutError, SequenceError
from core.free_sets import FreeSetModel, FullySeparable, PPTStates, is_ppt
from core.operators import (
    DensityOperator,
    PositiveOperator,
    SystemLayout,
    apply_kraus,
    pure_state,
    trace_distance,
)
from core.random_states import as_generator, bell_state

logger = logging.getLogger(__name__)

MONOTONE_ATOL = 1e-12
DOMINATION_ATOL = 1e-12
KRAUS_ATOL = 1e-10
DEGENERATE_TRACE = 1e-12
MAX_HALVINGS = 60
LSC_AMBIENT_CAP = 4


def _first_monotone_index(distances: Sequence[float]) -> int:
    """Smallest 0-based index from which ``distances`` never increases."""
    start = len(distances) - 1
    while start > 0 and distances[start - 1] >= distances[start] - MONOTONE_ATOL:
        start -= 1
    return max(start, 0)


@dataclass(frozen=True, eq=False)
class StateSequence:
    """rho_1..rho_N with limit rho_0 on one layout.

    ``burn_in`` is the 0-based prefix index after which ||rho_n - rho_0||_1
    is non-increasing; it is computed when not given and checked when given.
    """

    states: tuple[DensityOperator, ...]
    limit: DensityOperator
    family: str
    params: dict = field(default_factory=dict)
    burn_in: int | None = None
    parents: tuple[StateSequence, ...] = ()
    operations: tuple[KrausOperation, ...] = ()
    dominating: Any = None
    normalizers: tuple[float, ...] = ()

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise SequenceError("a sequence needs at least one state")
        dims = self.limit.layout.dims
        for n, s in enumerate(states, start=1):
            if s.layout.dims != dims:
                raise LayoutError(f"state {n} has layout {s.layout}, limit has {self.limit.layout}")
        object.__setattr__(self, "states", states)
        distances = self.trace_distances()
        monotone_from = _first_monotone_index(distances)
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", monotone_from)
        elif self.burn_in < monotone_from:
            raise SequenceError(f"trace distance increases after declared burn-in {self.burn_in}")

    @property
    def layout(self) -> SystemLayout:
        return self.limit.layout

    def __len__(self):
        return len(self.states)

    def trace_distances(self) -> list[float]:
        return [trace_distance(s, self.limit) for s in self.states]

    def with_limit_first(self) -> list[tuple[int, DensityOperator]]:
        """(n, rho_n) pairs, limit included as n = 0."""
        return [(0, self.limit)] + list(enumerate(self.states, start=1))


@dataclass(frozen=True, eq=False)
class KrausOperation:
    """Completely positive, trace non-increasing map given by Kraus operators.

    ``local`` marks maps built factor by factor; those send separable,
    pi-separable and PPT states into the cone of the same set.
    """

    kraus: tuple[np.ndarray, ...]
    input_layout: SystemLayout
    output_layout: SystemLayout
    local: bool = False
    label: str = ""

    def __post_init__(self):
        kraus = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not kraus:
            raise SequenceError("a quantum operation needs at least one Kraus operator")
        shape = (self.output_layout.total, self.input_layout.total)
        for k in kraus:
            if k.shape != shape:
                raise LayoutError(f"Kraus operator of shape {k.shape}, expected {shape}")
        object.__setattr__(self, "kraus", kraus)
        top = float(np.linalg.eigvalsh(self.effect)[-1])
        if top > 1 + KRAUS_ATOL:
            raise SequenceError(f"operation is not trace non-increasing: largest effect eigenvalue {top:.12f}")

    @property
    def effect(self) -> np.ndarray:
        """sum_k K^dagger K."""
        return sum(k.conj().T @ k for k in self.kraus)

    @classmethod
    def from_local(cls, factors: Sequence[Sequence[np.ndarray]], input_layout: SystemLayout,
                   label: str = "") -> KrausOperation:
        """Tensor product of per-factor Kraus families."""
        if len(factors) != input_layout.parties:
            raise LayoutError(f"{len(factors)} factor maps for a {input_layout.parties}-party layout")
        kraus = [np.ones((1, 1), dtype=complex)]
        out_dims = []
        for family in factors:
            family = [np.asarray(k, dtype=complex) for k in family]
            out_dims.append(family[0].shape[0])
            kraus = [np.kron(a, b) for a in kraus for b in family]
        return cls(tuple(kraus), input_layout, SystemLayout(tuple(out_dims)), local=True, label=label)

    def apply(self, rho) -> PositiveOperator:
        return apply_kraus(rho, self.kraus, self.output_layout)


def identity_operation(layout: SystemLayout) -> KrausOperation:
    return KrausOperation.from_local([[np.eye(d)] for d in layout.dims], layout, label="identity")


def local_unitary_operation(unitaries: Sequence[np.ndarray], layout: SystemLayout) -> KrausOperation:
    return KrausOperation.from_local([[u] for u in unitaries], layout, label="local-unitary")


def local_projection(projector: np.ndarray, factor: int, layout: SystemLayout) -> KrausOperation:
    """K on ``factor`` and the identity elsewhere; a single trace-decreasing Kraus operator."""
    layout.check_indices([factor])
    factors = [[np.eye(d)] for d in layout.dims]
    factors[factor] = [np.asarray(projector, dtype=complex)]
    return KrausOperation.from_local(factors, layout, label=f"projection@{factor + 1}")


def rotation_schedule(layout: SystemLayout, length: int, seed=0, angle: float = 0.5) -> list[KrausOperation]:
    """Local unitaries exp(-i t_n H_k) per factor with t_n = angle / n, converging to the identity."""
    rng = as_generator(seed)
    generators = []
    for d in layout.dims:
        h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = (h + h.conj().T) / 2
        generators.append(np.linalg.eigh(h))
    ops = []
    for n in range(1, length + 1):
        t = angle / n
        unitaries = [(vecs * np.exp(-1j * t * vals)) @ vecs.conj().T for vals, vecs in generators]
        ops.append(local_unitary_operation(unitaries, layout))
    return ops


def gen_constant(rho: DensityOperator, length: int = 12) -> StateSequence:
    return StateSequence(tuple([rho] * length), rho, "constant", {"length": length})


def _random_traceless(d: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    a = (a + a.conj().T) / 2
    a -= np.trace(a) / d * np.eye(d)
    norm = float(np.sum(np.abs(np.linalg.eigvalsh(a))))
    return a / norm if norm > 0 else a


def _dominated_by(sigma: np.ndarray, rho: np.ndarray, c: float) -> bool:
    gap = sigma - c * rho
    return float(np.linalg.eigvalsh((gap + gap.conj().T) / 2)[0]) >= -DOMINATION_ATOL


def gen_dominated(sigma, c: float, length: int = 12, seed=0, delta: float = 0.1) -> StateSequence:
    """rho_n = sigma_n + Delta_n with c rho_n <= sigma_n for every n.

    ``sigma`` is a fixed state or a converging StateSequence.  Delta_n is a
    random traceless perturbation of trace norm at most delta / n, halved
    until both positivity and domination hold.
    """
    if not 0 < c <= 1:
        raise SequenceError(f"domination constant must lie in (0, 1], got {c}")
    rng = as_generator(seed)
    if isinstance(sigma, StateSequence):
        if len(sigma) != length:
            raise SequenceError(f"dominating sequence has {len(sigma)} states, expected {length}")
        anchors, limit = list(sigma.states), sigma.limit
        clause = "dominated-by-converging-sequence"
    else:
        anchors, limit = [sigma] * length, sigma
        clause = "dominated-by-fixed-state"
    layout = limit.layout
    d = layout.total

    states = []
    previous = math.inf
    for n, anchor in enumerate(anchors, start=1):
        base = anchor.matrix
        step = _random_traceless(d, rng) * min(delta / n, previous)
        for _ in range(MAX_HALVINGS):
            candidate = base + step
            if float(np.linalg.eigvalsh(candidate)[0]) >= 0 and _dominated_by(base, candidate, c):
                break
            step = step / 2
        else:
            step = np.zeros_like(base)
            if not _dominated_by(base, base, c):
                raise SequenceError(f"state {n} cannot be dominated with c={c}")
        previous = float(np.sum(np.abs(np.linalg.eigvalsh(step))))
        states.append(DensityOperator(base + step, layout))
    logger.debug(f"Generated dominated sequence: c={c}, delta={delta}, length={length}")
    return StateSequence(tuple(states), limit, "dominated",
                         {"c": c, "delta": delta, "seed": seed, "clause": clause}, dominating=sigma)


def gen_mixture(seq_a: StateSequence, seq_b: StateSequence, weights: Sequence[float],
                limit_weight: float) -> StateSequence:
    """rho_n = p_n A_n + (1 - p_n) B_n with limit p_0 A_0 + (1 - p_0) B_0."""
    if len(seq_a) != len(seq_b) or len(weights) != len(seq_a):
        raise SequenceError(f"length mismatch: {len(seq_a)}, {len(seq_b)} states and {len(weights)} weights")
    if seq_a.layout.dims != seq_b.layout.dims:
        raise LayoutError(f"cannot mix sequences on {seq_a.layout} and {seq_b.layout}")
    weights = [float(p) for p in weights]
    if any(not 0 <= p <= 1 for p in weights + [limit_weight]):
        raise SequenceError("mixture weights must lie in [0, 1]")

    def mix(p, a, b):
        return DensityOperator(p * a.matrix + (1 - p) * b.matrix, a.layout)

    states = tuple(mix(p, a, b) for p, a, b in zip(weights, seq_a.states, seq_b.states))
    limit = mix(limit_weight, seq_a.limit, seq_b.limit)
    return StateSequence(states, limit, "mixture", {"weights": weights, "limit_weight": limit_weight},
                         parents=(seq_a, seq_b))


def _cone_preserved(model: FreeSetModel, op: KrausOperation, rng, samples: int) -> bool:
    if op.local:
        return True
    if isinstance(model, PPTStates):
        cuts = [model.transposed]
    elif isinstance(model, FullySeparable):
        cuts = [(k,) for k in range(op.output_layout.parties)]
    else:
        raise SequenceError(f"cannot check cone preservation of a non-local operation for {model.describe()}")
    for _ in range(samples):
        out = op.apply(model.sample(rng))
        if out.trace < DEGENERATE_TRACE:
            continue
        state = DensityOperator.normalized(out.matrix, op.output_layout)
        if not all(is_ppt(state, cut) for cut in cuts):
            return False
    return True


def gen_pushforward(seq: StateSequence, operations: Sequence[KrausOperation], limit_operation: KrausOperation,
                    model: FreeSetModel | None = None, samples: int = 8, seed=0) -> StateSequence:
    """Normalised images c_n^{-1} Phi_n(rho_n), with c_n = Tr Phi_n(rho_n) recorded."""
    if len(operations) != len(seq):
        raise SequenceError(f"{len(operations)} operations for {len(seq)} states")
    out_dims = limit_operation.output_layout.dims
    for op in list(operations) + [limit_operation]:
        if op.input_layout.dims != seq.layout.dims:
            raise LayoutError(f"operation input {op.input_layout} does not match {seq.layout}")
        if op.output_layout.dims != out_dims:
            raise LayoutError("operations must share one output layout")
    rng = as_generator(seed)
    if model is not None:
        for n, op in enumerate(list(operations) + [limit_operation], start=1):
            if not _cone_preserved(model, op, rng, samples):
                raise SequenceError(f"operation {n} maps free states outside the free cone of {model.describe()}")

    def push(op, rho, n):
        image = op.apply(rho)
        c = image.trace
        if c < DEGENERATE_TRACE:
            raise SequenceError(f"operation {n} is degenerate on its state: trace {c:.3e}")
        return DensityOperator.normalized(image.matrix, op.output_layout), c

    pushed = [push(op, rho, n) for n, (op, rho) in enumerate(zip(operations, seq.states), start=1)]
    limit, c0 = push(limit_operation, seq.limit, 0)
    return StateSequence(tuple(s for s, _ in pushed), limit, "pushforward",
                         {"labels": [op.label for op in operations], "limit_normalizer": c0},
                         parents=(seq,), operations=tuple(operations) + (limit_operation,),
                         normalizers=tuple(c for _, c in pushed))


def lsc_gap_weights(dims: Sequence[int], scale: float = 0.5) -> list[float]:
    """eps_n = min(1, scale / ln d_n)."""
    return [min(1.0, scale / math.log(d)) for d in dims]


def _embed(op: np.ndarray, d: int, ambient: int) -> np.ndarray:
    """Embed an operator on C^d x C^d into C^D x C^D on the first d levels of each factor."""
    t = np.zeros((ambient, ambient, ambient, ambient), dtype=complex)
    t[:d, :d, :d, :d] = op.reshape(d, d, d, d)
    return t.reshape(ambient * ambient, ambient * ambient)


def gen_lsc_gap(dims: Sequence[int], weights: Sequence[float] | None = None,
                ambient: int | None = None) -> StateSequence:
    """(1 - eps_n)|00><00| + eps_n Phi+_{d_n}, embedded in a fixed D x D layout; limit |00><00|."""
    dims = [int(d) for d in dims]
    if any(d < 2 for d in dims) or any(a > b for a, b in zip(dims, dims[1:])):
        raise SequenceError(f"dimension schedule must be non-decreasing and at least 2: {dims}")
    ambient = ambient or max(dims)
    if max(dims) > ambient:
        raise LayoutError(f"schedule reaches dimension {max(dims)} beyond ambient {ambient}")
    if ambient > LSC_AMBIENT_CAP:
        raise LayoutError(f"ambient dimension capped at {LSC_AMBIENT_CAP} per factor")
    weights = lsc_gap_weights(dims) if weights is None else [float(e) for e in weights]
    if len(weights) != len(dims):
        raise SequenceError("one weight per dimension is required")
    layout = SystemLayout((ambient, ambient))
    zero = np.zeros(ambient * ambient)
    zero[0] = 1.0
    base = pure_state(zero, layout).matrix
    states = tuple(DensityOperator((1 - e) * base + e * _embed(bell_state(d).matrix, d, ambient), layout)
                   for d, e in zip(dims, weights))
    return StateSequence(states, DensityOperator(base, layout), "lsc-gap", {"dims": dims, "weights": weights})
