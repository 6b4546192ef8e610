"""Seeded random states, unitaries and channels.

Every generator takes an explicit ``numpy.random.Generator`` (or a seed that
``as_generator`` turns into one); nothing touches the global RNG.
"""
import logging
import math
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from core.errors import LayoutError
from core.operators import DensityOperator, SystemLayout, pure_state, tensor
from core.operators import maximally_mixed as _maximally_mixed

logger = logging.getLogger(__name__)


def as_generator(rng=None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    if isinstance(layout, int):
        return SystemLayout((layout,))
    return SystemLayout(tuple(layout))


def random_vector(dim: int, rng=None) -> np.ndarray:
    """Haar-random unit vector in C^dim."""
    rng = as_generator(rng)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_pure_state(layout, rng=None) -> DensityOperator:
    layout = _layout(layout)
    return pure_state(random_vector(layout.total, rng), layout)


def random_density(layout, rng=None, rank: int | None = None) -> DensityOperator:
    """Induced-measure random state: G G^dagger / Tr for a Ginibre ``d x rank`` matrix.

    ``rank=None`` gives the Hilbert-Schmidt measure (full rank almost surely).
    """
    layout = _layout(layout)
    rng = as_generator(rng)
    d = layout.total
    k = d if rank is None else int(rank)
    if not 1 <= k <= d:
        raise LayoutError(f"rank {k} out of range for dimension {d}")
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    return DensityOperator.normalized(g @ g.conj().T, layout)


def random_unitary(dim: int, rng=None) -> np.ndarray:
    """Haar unitary from ``scipy.stats.unitary_group``."""
    rng = as_generator(rng)
    if dim == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(dim, random_state=rng)


def random_isometry(dim_in: int, dim_out: int, rng=None) -> np.ndarray:
    """First ``dim_in`` columns of a Haar unitary on C^dim_out."""
    if dim_out < dim_in:
        raise LayoutError(f"no isometry from dimension {dim_in} into {dim_out}")
    return random_unitary(dim_out, rng)[:, :dim_in]


def random_channel(dim_in: int, dim_out: int, rng=None, env_dim: int | None = None) -> list[np.ndarray]:
    """Kraus operators of V -> Tr_E V rho V^dagger for a random isometry V into C^dim_out x C^env_dim.

    ``env_dim`` defaults to the smallest environment (at least 2) that fits the isometry.
    """
    if env_dim is None:
        env_dim = max(2, math.ceil(dim_in / dim_out))
    v = random_isometry(dim_in, dim_out * env_dim, rng)
    blocks = v.reshape(dim_out, env_dim, dim_in)
    return [np.ascontiguousarray(blocks[:, e, :]) for e in range(env_dim)]


def maximally_mixed(layout) -> DensityOperator:
    return _maximally_mixed(_layout(layout))


def bell_state(d: int = 2) -> DensityOperator:
    """Maximally entangled Phi+_d on a d x d layout."""
    psi = np.zeros(d * d, dtype=complex)
    psi[[i * d + i for i in range(d)]] = 1.0
    return pure_state(psi, SystemLayout((d, d)))


def product_state(vectors: Sequence) -> DensityOperator:
    """|v1><v1| x |v2><v2| x ... for per-factor vectors."""
    return tensor(*(pure_state(v) for v in vectors))


def random_product_state(layout, rng=None) -> DensityOperator:
    layout = _layout(layout)
    rng = as_generator(rng)
    return product_state([random_vector(d, rng) for d in layout.dims])
