"""Dense complex-matrix substrate.

Hermitian, positive and density operators on a multipartite layout, spectral
calculus, the Frechet derivative of the logarithm and the tensor /
partial-trace / partial-transpose algebra.  All logarithms are natural.

Subsystem indices are 0-based throughout the Python API; the 1-based
``{{1,2},{3}}`` notation is only used for parsing and printing partitions.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from core.errors import (
    LayoutError,
    NotHermitianError,
    NotPositiveError,
    OperatorError,
    SupportViolationError,
    TraceError,
)

logger = logging.getLogger(__name__)

HERMITIAN_ATOL = 1e-8
PSD_RTOL = 1e-10
TRACE_ATOL = 1e-10
DEGENERACY_RTOL = 1e-9
SUPPORT_RTOL = 1e-10


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor-factor dimensions ``[d1, ..., dm]``."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise LayoutError("a layout needs at least one factor")
        if any(d < 1 for d in dims):
            raise LayoutError(f"factor dimensions must be positive, got {list(dims)}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def parse(cls, text: str) -> SystemLayout:
        """Parse the ``2x2x3`` notation used by the command line."""
        try:
            return cls(tuple(int(part) for part in text.lower().split("x")))
        except ValueError as exc:
            raise LayoutError(f"cannot parse dimensions {text!r}") from exc

    @property
    def parties(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def check_indices(self, indices: Iterable[int]) -> tuple[int, ...]:
        checked = tuple(sorted(set(int(i) for i in indices)))
        for i in checked:
            if not 0 <= i < self.parties:
                raise LayoutError(f"subsystem index {i} out of range for {self}")
        return checked

    def sub(self, keep: Iterable[int]) -> SystemLayout:
        keep = self.check_indices(keep)
        if not keep:
            return SystemLayout((1,))
        return SystemLayout(tuple(self.dims[i] for i in keep))

    def __str__(self):
        return "x".join(str(d) for d in self.dims)


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of subsystem indices; must cover the layout it is used with."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = [tuple(sorted(set(int(i) for i in block))) for block in self.blocks]
        if not blocks or any(not block for block in blocks):
            raise LayoutError("partition blocks must be non-empty")
        flat = [i for block in blocks for i in block]
        if len(flat) != len(set(flat)):
            raise LayoutError(f"partition blocks overlap: {blocks}")
        object.__setattr__(self, "blocks", tuple(sorted(blocks)))

    @classmethod
    def finest(cls, parties: int) -> Partition:
        return cls(tuple((i,) for i in range(parties)))

    @classmethod
    def parse(cls, text: str) -> Partition:
        """Parse ``{{1,2},{3}}`` (1-based subsystem labels)."""
        body = text.strip()
        if not (body.startswith("{") and body.endswith("}")):
            raise LayoutError(f"cannot parse partition {text!r}")
        groups = re.findall(r"\{([^{}]*)\}", body[1:-1])
        if not groups:
            raise LayoutError(f"cannot parse partition {text!r}")
        try:
            blocks = [tuple(int(x) - 1 for x in group.split(",") if x.strip()) for group in groups]
        except ValueError as exc:
            raise LayoutError(f"cannot parse partition {text!r}") from exc
        return cls(tuple(blocks))

    def validate_for(self, layout: SystemLayout) -> Partition:
        covered = sorted(i for block in self.blocks for i in block)
        if covered != list(range(layout.parties)):
            raise LayoutError(f"partition {self} does not cover the {layout.parties} factors of {layout}")
        return self

    @property
    def order(self) -> tuple[int, ...]:
        return tuple(i for block in self.blocks for i in block)

    def __str__(self):
        inner = ",".join("{" + ",".join(str(i + 1) for i in block) + "}" for block in self.blocks)
        return "{" + inner + "}"


@dataclass(frozen=True)
class PartitionSet:
    partitions: tuple[Partition, ...]

    def __post_init__(self):
        partitions = tuple(self.partitions)
        if not partitions:
            raise LayoutError("a partition set must be non-empty")
        object.__setattr__(self, "partitions", partitions)

    @classmethod
    def parse(cls, text: str) -> PartitionSet:
        """Parse ``{{1,2},{3}}|{{1},{2,3}}``."""
        return cls(tuple(Partition.parse(part) for part in text.split("|")))

    def __iter__(self):
        return iter(self.partitions)

    def __len__(self):
        return len(self.partitions)

    def __str__(self):
        return "|".join(str(p) for p in self.partitions)


def _layout_for(dim: int, layout: SystemLayout | None) -> SystemLayout:
    layout = layout if layout is not None else SystemLayout((dim,))
    if layout.total != dim:
        raise LayoutError(f"layout {layout} does not match operator dimension {dim}")
    return layout


class HermitianOperator:
    """Immutable Hermitian matrix.

    Small asymmetries are symmetrised away; anything beyond ``HERMITIAN_ATOL``
    (relative to the largest entry) is rejected.
    """

    def __init__(self, matrix, layout: SystemLayout | None = None):
        mat = np.array(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise OperatorError(f"expected a non-empty square matrix, got shape {mat.shape}")
        scale = max(1.0, float(np.max(np.abs(mat))))
        asym = np.abs(mat - mat.conj().T)
        if float(np.max(asym)) > HERMITIAN_ATOL * scale:
            row, col = np.unravel_index(int(np.argmax(asym)), asym.shape)
            raise NotHermitianError(f"matrix is not Hermitian at entry ({row}, {col})")
        mat = (mat + mat.conj().T) / 2
        mat.setflags(write=False)
        self.matrix = mat
        self.layout = _layout_for(mat.shape[0], layout)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and the matching eigenvectors (columns)."""
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[0]

    def inner(self, other) -> float:
        """Hilbert-Schmidt pairing Re Tr(A B) of two Hermitian operators."""
        other = other.matrix if isinstance(other, HermitianOperator) else np.asarray(other)
        return float(np.real(np.sum(self.matrix.conj() * other)))

    def relabel(self, layout: SystemLayout):
        """Same matrix viewed on another factorisation of the same dimension."""
        return type(self)._wrap(self.matrix, layout)

    @classmethod
    def _wrap(cls, matrix, layout):
        return cls(matrix, layout)

    def __add__(self, other):
        return HermitianOperator(self.matrix + _matrix_of(other), self.layout)

    def __sub__(self, other):
        return HermitianOperator(self.matrix - _matrix_of(other), self.layout)

    def __mul__(self, scalar):
        return HermitianOperator(self.matrix * float(scalar), self.layout)

    __rmul__ = __mul__

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, layout={self.layout})"


class PositiveOperator(HermitianOperator):
    """Positive semidefinite operator.

    Eigenvalues in ``[-PSD_RTOL * norm, 0)`` are clipped to zero; anything more
    negative is rejected.
    """

    def __init__(self, matrix, layout: SystemLayout | None = None):
        super().__init__(matrix, layout)
        vals, vecs = np.linalg.eigh(self.matrix)
        norm = float(np.max(np.abs(vals)))
        if vals[0] < -PSD_RTOL * norm:
            raise NotPositiveError(f"operator has eigenvalue {vals[0]:.3e} below zero")
        if vals[0] < 0:
            vals = np.clip(vals, 0.0, None)
            mat = (vecs * vals) @ vecs.conj().T
            mat = (mat + mat.conj().T) / 2
            mat.setflags(write=False)
            self.matrix = mat
        self.__dict__["spectrum"] = (np.clip(vals, 0.0, None), vecs)

    def __mul__(self, scalar):
        if float(scalar) >= 0:
            return PositiveOperator(self.matrix * float(scalar), self.layout)
        return super().__mul__(scalar)

    __rmul__ = __mul__


class DensityOperator(PositiveOperator):
    """Unit-trace positive operator on a fixed layout."""

    def __init__(self, matrix, layout: SystemLayout | None = None):
        super().__init__(matrix, layout)
        if abs(self.trace - 1.0) > TRACE_ATOL:
            raise TraceError(f"state has trace {self.trace:.12f}, expected 1")

    @classmethod
    def normalized(cls, matrix, layout: SystemLayout | None = None) -> DensityOperator:
        mat = np.asarray(matrix, dtype=complex)
        tr = float(np.real(np.trace(mat)))
        if tr <= 0:
            raise TraceError("cannot normalise an operator with non-positive trace")
        return cls(mat / tr, layout)


def _matrix_of(op) -> np.ndarray:
    return op.matrix if isinstance(op, HermitianOperator) else np.asarray(op, dtype=complex)


def _as_hermitian(op, layout: SystemLayout | None = None) -> HermitianOperator:
    if isinstance(op, HermitianOperator):
        return op
    return HermitianOperator(op, layout)


def _rewrap(template: HermitianOperator, matrix: np.ndarray, layout: SystemLayout) -> HermitianOperator:
    """Wrap ``matrix`` in the most specific operator type ``template`` guarantees."""
    if isinstance(template, DensityOperator):
        return DensityOperator(matrix, layout)
    if isinstance(template, PositiveOperator):
        return PositiveOperator(matrix, layout)
    return HermitianOperator(matrix, layout)


def eta(x) -> np.ndarray:
    """-x ln x with eta(0) = 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = -x[pos] * np.log(x[pos])
    return out


def log_on_support(x, cutoff: float = 0.0) -> np.ndarray:
    """Natural log of the entries above ``cutoff``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > cutoff
    out[pos] = np.log(x[pos])
    return out


def spectral_apply(h, f: Callable[[np.ndarray], np.ndarray]) -> HermitianOperator:
    """U f(Lambda) U^dagger for the eigendecomposition of ``h``."""
    h = _as_hermitian(h)
    vals, vecs = h.spectrum
    fvals = np.asarray(f(vals), dtype=float)
    return HermitianOperator((vecs * fvals) @ vecs.conj().T, h.layout)


def frechet_log(sigma, x, tol: float = DEGENERACY_RTOL, support_tol: float = SUPPORT_RTOL) -> HermitianOperator:
    """Frechet derivative of ``ln`` at ``sigma`` in direction ``x``.

    Daleckii-Krein form on the support of ``sigma``: the divided difference
    (ln a - ln b) / (a - b) off the diagonal, and the limit kernel evaluated at
    the pair midpoint, 2 / (a + b), when |a - b| < tol * lambda_max.
    """
    sigma = sigma if isinstance(sigma, PositiveOperator) else PositiveOperator(sigma)
    x = _as_hermitian(x, sigma.layout)
    if x.dim != sigma.dim:
        raise LayoutError(f"direction has dimension {x.dim}, expected {sigma.dim}")
    vals, vecs = sigma.spectrum
    lam_max = float(vals[-1])
    if lam_max <= 0:
        raise SupportViolationError("the zero operator has empty support")
    support = vals > support_tol * lam_max
    xt = vecs.conj().T @ x.matrix @ vecs
    outside = ~np.outer(support, support)
    if np.any(outside):
        leak = float(np.max(np.abs(xt[outside])))
        if leak > support_tol * max(1.0, float(np.max(np.abs(xt)))):
            raise SupportViolationError(f"direction has weight {leak:.3e} outside the support")
    s = vals[support]
    logs = np.log(s)
    diff = s[:, None] - s[None, :]
    degenerate = np.abs(diff) < tol * lam_max
    safe = np.where(degenerate, 1.0, diff)
    kernel = np.where(degenerate, 2.0 / (s[:, None] + s[None, :]), (logs[:, None] - logs[None, :]) / safe)
    u = vecs[:, support]
    block = xt[np.ix_(support, support)]
    return HermitianOperator(u @ (kernel * block) @ u.conj().T, sigma.layout)


def tensor(*ops) -> HermitianOperator:
    """Kronecker product; density inputs give a density output on the joined layout."""
    if not ops:
        raise OperatorError("tensor needs at least one operator")
    ops = [_as_hermitian(op) for op in ops]
    matrix = ops[0].matrix
    for op in ops[1:]:
        matrix = np.kron(matrix, op.matrix)
    layout = SystemLayout(tuple(d for op in ops for d in op.layout.dims))
    if all(isinstance(op, DensityOperator) for op in ops):
        return DensityOperator(matrix, layout)
    if all(isinstance(op, PositiveOperator) for op in ops):
        return PositiveOperator(matrix, layout)
    return HermitianOperator(matrix, layout)


def partial_trace_array(matrix: np.ndarray, keep: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    m = len(dims)
    t = np.asarray(matrix).reshape(tuple(dims) * 2)
    rows = list(range(m))
    cols = [m + i if i in keep else i for i in range(m)]
    out = [i for i in keep] + [m + i for i in keep]
    reduced = np.einsum(t, rows + cols, out)
    size = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(size, size)


def partial_trace(op, keep: Iterable[int], layout: SystemLayout | None = None) -> HermitianOperator:
    """Trace out every factor not in ``keep``; kept factors stay in ascending order."""
    op = _as_hermitian(op, layout)
    layout = _layout_for(op.dim, layout or op.layout)
    keep = layout.check_indices(keep)
    reduced = partial_trace_array(op.matrix, keep, layout.dims)
    return _rewrap(op, reduced, layout.sub(keep))


def partial_transpose_array(matrix: np.ndarray, subsystems: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    m = len(dims)
    t = np.asarray(matrix).reshape(tuple(dims) * 2)
    for k in subsystems:
        t = np.swapaxes(t, k, m + k)
    d = int(np.prod(dims))
    return t.reshape(d, d)


def partial_transpose(op, subsystems: Iterable[int], layout: SystemLayout | None = None) -> HermitianOperator:
    op = _as_hermitian(op, layout)
    layout = _layout_for(op.dim, layout or op.layout)
    subsystems = layout.check_indices(subsystems)
    return HermitianOperator(partial_transpose_array(op.matrix, subsystems, layout.dims), layout)


def permute_systems(op, perm: Sequence[int], layout: SystemLayout | None = None) -> HermitianOperator:
    """Reorder tensor factors: factor ``i`` of the result is factor ``perm[i]`` of ``op``."""
    op = _as_hermitian(op, layout)
    layout = _layout_for(op.dim, layout or op.layout)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(layout.parties)):
        raise LayoutError(f"{perm} is not a permutation of the {layout.parties} factors")
    m = layout.parties
    t = op.matrix.reshape(layout.dims * 2).transpose(perm + [m + p for p in perm])
    new_layout = SystemLayout(tuple(layout.dims[p] for p in perm))
    return _rewrap(op, t.reshape(op.dim, op.dim), new_layout)


def support_projector(op, tol: float = SUPPORT_RTOL) -> HermitianOperator:
    """Projector onto the eigenvectors with eigenvalue above ``tol * lambda_max``."""
    op = _as_hermitian(op)
    vals, vecs = op.spectrum
    lam_max = float(vals[-1])
    if lam_max <= 0:
        return HermitianOperator(np.zeros_like(op.matrix), op.layout)
    u = vecs[:, vals > tol * lam_max]
    return HermitianOperator(u @ u.conj().T, op.layout)


def trace_distance(a, b) -> float:
    """Trace norm of the difference, without the conventional factor 1/2."""
    diff = _matrix_of(a) - _matrix_of(b)
    diff = (diff + diff.conj().T) / 2
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def project_onto_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ind = np.arange(1, len(v) + 1)
    cond = u - (css - 1.0) / ind > 0
    rho = ind[cond][-1]
    theta = (css[cond][-1] - 1.0) / rho
    return np.maximum(v - theta, 0.0)


def project_psd_array(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T


def project_density_array(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    return (vecs * project_onto_simplex(vals)) @ vecs.conj().T


def project_to_density(h, layout: SystemLayout | None = None) -> DensityOperator:
    """Closest state in Hilbert-Schmidt norm."""
    h = _as_hermitian(h, layout)
    return DensityOperator(project_density_array(h.matrix), layout or h.layout)


def maximally_mixed(layout: SystemLayout) -> DensityOperator:
    return DensityOperator(np.eye(layout.total) / layout.total, layout)


def pure_state(vector, layout: SystemLayout | None = None) -> DensityOperator:
    psi = np.asarray(vector, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return DensityOperator(np.outer(psi, psi.conj()), layout)


def apply_kraus(op, kraus: Sequence[np.ndarray], layout: SystemLayout | None = None) -> HermitianOperator:
    """sum_k K rho K^dagger; ``layout`` describes the output space."""
    op = _as_hermitian(op)
    if not kraus:
        raise OperatorError("a Kraus family needs at least one operator")
    out = sum(k @ op.matrix @ k.conj().T for k in (np.asarray(k, dtype=complex) for k in kraus))
    if layout is None:
        layout = op.layout if out.shape[0] == op.dim else SystemLayout((out.shape[0],))
    if isinstance(op, PositiveOperator):
        return PositiveOperator(out, layout)
    return HermitianOperator(out, layout)
