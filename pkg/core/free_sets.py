"""Convex free-set models and their linear-minimisation oracles.

A model knows its layout, how to sample one of its members and how to
(approximately) minimise ``Tr(G sigma)`` over its members.  Separable-type
models search over product pure states by alternating smallest-eigenvector
updates; PPT states are handled by the splitting solver in ``core.ppt``;
finite hulls are exact.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from core.errors import LayoutError, SamplingError
from core.operators import (
    PSD_RTOL,
    DensityOperator,
    HermitianOperator,
    Partition,
    PartitionSet,
    SystemLayout,
    maximally_mixed,
    partial_transpose,
    permute_systems,
    pure_state,
)
from core.random_states import as_generator, random_density, random_vector

logger = logging.getLogger(__name__)

PPT_SAMPLING_CAP = 10000


@dataclass(frozen=True)
class OracleConfig:
    """Knobs shared by every oracle.

    ``restarts``/``sweeps``/``tol`` drive the product-state search, the
    ``ppt_*`` fields the PPT splitting solver.
    """

    restarts: int = 32
    sweeps: int = 200
    seed: int = 0
    tol: float = 1e-12
    ppt_max_iter: int = 5000
    ppt_gap_tol: float = 1e-7
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.sweeps < 1 or self.ppt_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        if self.tol <= 0 or self.ppt_gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class GroupedLayout(SystemLayout):
    """Coarse-grained layout: factor j joins the subsystems of block j.

    ``order`` is the factor permutation that brings the parent layout into
    block order, so operators can be moved between the two views.
    """

    parent: SystemLayout | None = None
    order: tuple[int, ...] = ()

    def to_grouped(self, op) -> HermitianOperator:
        moved = permute_systems(op, self.order, self.parent)
        return moved.relabel(SystemLayout(self.dims))

    def from_grouped(self, op) -> HermitianOperator:
        permuted = SystemLayout(tuple(self.parent.dims[i] for i in self.order))
        inverse = list(np.argsort(self.order))
        return permute_systems(op.relabel(permuted), inverse)


def group_layout(layout: SystemLayout, partition: Partition) -> GroupedLayout:
    partition.validate_for(layout)
    dims = tuple(int(np.prod([layout.dims[i] for i in block])) for block in partition.blocks)
    return GroupedLayout(dims, parent=layout, order=partition.order)


@dataclass(frozen=True)
class ProductPureState:
    """One unit vector per factor of ``layout``."""

    vectors: tuple[np.ndarray, ...]
    layout: SystemLayout

    @property
    def vector(self) -> np.ndarray:
        out = np.ones(1, dtype=complex)
        for v in self.vectors:
            out = np.kron(out, v)
        return out

    def density(self) -> DensityOperator:
        return pure_state(self.vector, SystemLayout(self.layout.dims))


@dataclass(frozen=True)
class ProductSearch:
    state: ProductPureState
    value: float
    running_best: tuple[float, ...]
    restart: int


def _contract(tensor_g: np.ndarray, vectors: Sequence[np.ndarray], k: int) -> np.ndarray:
    """<x_{j != k} v_j| G |x_{j != k} v_j> as an operator on factor k."""
    m = len(vectors)
    operands = [tensor_g, list(range(2 * m))]
    for j, v in enumerate(vectors):
        if j != k:
            operands += [v.conj(), [j], v, [m + j]]
    operands.append([k, m + k])
    return np.einsum(*operands, optimize=True)


def _search_once(g: np.ndarray, dims: tuple[int, ...], cfg: OracleConfig, restart: int):
    rng = np.random.default_rng([cfg.seed, restart])
    vectors = [random_vector(d, rng) for d in dims]
    tensor_g = g.reshape(dims * 2)
    value = np.inf
    for sweep in range(cfg.sweeps):
        previous = value
        for k in range(len(dims)):
            local = _contract(tensor_g, vectors, k)
            vals, vecs = np.linalg.eigh((local + local.conj().T) / 2)
            vectors[k] = vecs[:, 0]
            value = float(vals[0])
        if previous - value <= cfg.tol * max(1.0, abs(value)):
            break
    return value, vectors


def closest_product_state(g, layout: SystemLayout, cfg: OracleConfig | None = None) -> ProductSearch:
    """Approximately minimise <psi|G|psi> over product vectors on ``layout``.

    Every restart seeds its own generator from ``(cfg.seed, restart)``; the
    winner is the smallest value, lowest restart index on ties, so the result
    does not depend on ``cfg.workers``.
    """
    cfg = cfg or OracleConfig()
    g = g.matrix if isinstance(g, HermitianOperator) else np.asarray(g, dtype=complex)
    if g.shape != (layout.total, layout.total):
        raise LayoutError(f"operator of shape {g.shape} does not fit layout {layout}")
    if layout.parties == 1:
        vals, vecs = np.linalg.eigh(g)
        state = ProductPureState((vecs[:, 0],), layout)
        return ProductSearch(state, float(vals[0]), (float(vals[0]),), 0)

    restarts = range(cfg.restarts)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(lambda r: _search_once(g, layout.dims, cfg, r), restarts))
    else:
        outcomes = [_search_once(g, layout.dims, cfg, r) for r in restarts]

    running, best_r = [], 0
    for r, (value, _) in enumerate(outcomes):
        if value < outcomes[best_r][0]:
            best_r = r
        running.append(outcomes[best_r][0])
    value, vectors = outcomes[best_r]
    logger.debug(f"Product search on {layout}: best value {value:.6e} from restart {best_r} of {cfg.restarts}")
    return ProductSearch(ProductPureState(tuple(vectors), layout), value, tuple(running), best_r)


@dataclass(frozen=True)
class OracleResult:
    """Oracle output: ``vertex`` minimises Tr(G sigma) up to the oracle's accuracy.

    ``lower`` is a certified lower bound on the minimum when the oracle can
    provide one; ``residual`` is the subsolver's last primal-dual gap.
    """

    vertex: DensityOperator
    value: float
    lower: float | None = None
    converged: bool = True
    residual: float | None = None
    warm: Any = None
    index: int | None = None


class FreeSetModel(ABC):
    """A closed convex set of states on a fixed layout."""

    certified = False

    def __init__(self, layout: SystemLayout):
        self.layout = layout

    @abstractmethod
    def oracle(self, g, cfg: OracleConfig, warm=None) -> OracleResult:
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> DensityOperator:
        ...

    def anchor(self) -> DensityOperator:
        """Faithful-as-possible member used to blend iterates away from the boundary."""
        return maximally_mixed(self.layout)

    def describe(self) -> str:
        return type(self).__name__.lower()

    def check_layout(self, op) -> None:
        if op.layout.dims != self.layout.dims:
            raise LayoutError(f"operator layout {op.layout} does not match model layout {self.layout}")

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


class PiSeparable(FreeSetModel):
    """Convex hull of product pure states across the blocks of any partition in ``partitions``."""

    def __init__(self, layout: SystemLayout, partitions: PartitionSet):
        super().__init__(layout)
        for partition in partitions:
            partition.validate_for(layout)
        self.partitions = partitions
        self.grouped = [group_layout(layout, p) for p in partitions]

    def describe(self) -> str:
        return f"pi:{self.partitions}"

    def oracle(self, g, cfg: OracleConfig, warm=None) -> OracleResult:
        g = g if isinstance(g, HermitianOperator) else HermitianOperator(g, self.layout)
        best = None
        for grouped in self.grouped:
            found = closest_product_state(grouped.to_grouped(g.relabel(self.layout)), grouped, cfg)
            if best is None or found.value < best[0].value:
                best = (found, grouped)
        found, grouped = best
        vertex = grouped.from_grouped(found.state.density())
        return OracleResult(DensityOperator(vertex.matrix, self.layout), found.value)

    def sample(self, rng: np.random.Generator) -> DensityOperator:
        """Dirichlet mixture of up to ``d`` random product pure states."""
        terms = int(rng.integers(1, self.layout.total + 1))
        weights = rng.dirichlet(np.ones(terms))
        mix = np.zeros((self.layout.total, self.layout.total), dtype=complex)
        for w in weights:
            grouped = self.grouped[int(rng.integers(len(self.grouped)))]
            state = ProductPureState(tuple(random_vector(d, rng) for d in grouped.dims), grouped)
            mix += w * grouped.from_grouped(state.density()).matrix
        return DensityOperator.normalized(mix, self.layout)


class FullySeparable(PiSeparable):
    def __init__(self, layout: SystemLayout):
        super().__init__(layout, PartitionSet((Partition.finest(layout.parties),)))

    def describe(self) -> str:
        return "separable"


class PPTStates(FreeSetModel):
    """States whose partial transpose on ``transposed`` is positive.

    ``transposed`` is one side of a bipartite cut (0-based factor indices);
    it defaults to every factor but the first.
    """

    certified = True

    def __init__(self, layout: SystemLayout, transposed: Sequence[int] | None = None):
        super().__init__(layout)
        if layout.parties < 2:
            raise LayoutError("PPT states need at least two factors")
        transposed = tuple(range(1, layout.parties)) if transposed is None else layout.check_indices(transposed)
        if not transposed or len(transposed) == layout.parties:
            raise LayoutError(f"transposed block {transposed} is not one side of a bipartite cut")
        self.transposed = transposed

    def describe(self) -> str:
        return "ppt:" + ",".join(str(i + 1) for i in self.transposed)

    def oracle(self, g, cfg: OracleConfig, warm=None) -> OracleResult:
        from core.ppt import ppt_linear_minimum

        return ppt_linear_minimum(g, self.layout, self.transposed, cfg, warm)

    def contains(self, rho, tol: float = PSD_RTOL) -> bool:
        return is_ppt(rho, self.transposed, tol)

    def sample(self, rng: np.random.Generator) -> DensityOperator:
        """Random state mixed toward I/d by a uniform amount, kept if PPT."""
        mixed = maximally_mixed(self.layout).matrix
        for _ in range(PPT_SAMPLING_CAP):
            t = rng.random()
            candidate = (1 - t) * random_density(self.layout, rng).matrix + t * mixed
            candidate = DensityOperator(candidate, self.layout)
            if self.contains(candidate):
                return candidate
        raise SamplingError(f"no PPT sample accepted in {PPT_SAMPLING_CAP} draws on {self.layout}")


class ConvexHull(FreeSetModel):
    """Convex hull of finitely many states; the oracle is an exact argmin over vertices."""

    certified = True

    def __init__(self, states: Sequence[DensityOperator], labels: Sequence[str] | None = None):
        if not states:
            raise LayoutError("a convex hull needs at least one state")
        layout = states[0].layout
        for s in states:
            if s.layout.dims != layout.dims:
                raise LayoutError(f"hull states mix layouts {layout} and {s.layout}")
        super().__init__(layout)
        self.states = tuple(states)
        self.labels = tuple(labels) if labels else tuple(f"state{i + 1}" for i in range(len(states)))

    def describe(self) -> str:
        return f"hull:{len(self.states)}"

    def anchor(self) -> DensityOperator:
        """Barycenter of the vertices; its support contains every member's support."""
        return DensityOperator(sum(s.matrix for s in self.states) / len(self.states), self.layout)

    def oracle(self, g, cfg: OracleConfig, warm=None) -> OracleResult:
        g = g if isinstance(g, HermitianOperator) else HermitianOperator(g, self.layout)
        values = [g.inner(s) for s in self.states]
        i = int(np.argmin(values))
        return OracleResult(self.states[i], values[i], lower=values[i], index=i)

    def sample(self, rng: np.random.Generator) -> DensityOperator:
        if len(self.states) == 1:
            return self.states[0]
        weights = rng.dirichlet(np.ones(len(self.states)))
        return DensityOperator(sum(w * s.matrix for w, s in zip(weights, self.states)), self.layout)


def lmo(g, model: FreeSetModel, cfg: OracleConfig | None = None, warm=None) -> OracleResult:
    return model.oracle(g, cfg or OracleConfig(), warm)


def sample_free_state(model: FreeSetModel, seed=None) -> DensityOperator:
    return model.sample(as_generator(seed))


def is_ppt(rho, subsystems: Sequence[int] | None = None, tol: float = PSD_RTOL) -> bool:
    """Peres test: minimum eigenvalue of the partial transpose above ``-tol * ||rho||``."""
    layout = rho.layout
    subsystems = tuple(range(1, layout.parties)) if subsystems is None else subsystems
    pt = partial_transpose(rho, subsystems)
    vals = pt.eigenvalues
    return bool(vals[0] >= -tol * max(1.0, float(np.max(np.abs(vals)))))

