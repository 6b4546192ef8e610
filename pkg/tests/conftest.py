import numpy as np
import pytest

from core.free_sets import OracleConfig
from core.operators import DensityOperator, SystemLayout
from core.random_states import bell_state, random_density
from core.solver import SolverConfig
from lab.harness import HarnessConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bell():
    return bell_state(2)


@pytest.fixture
def two_qubits():
    return SystemLayout((2, 2))


@pytest.fixture
def fast_oracle():
    return OracleConfig(restarts=8, sweeps=100, ppt_max_iter=3000)


@pytest.fixture
def fast_solver(fast_oracle):
    return SolverConfig(max_iter=300, oracle=fast_oracle)


@pytest.fixture
def fast_harness(fast_solver):
    return HarnessConfig(solver=fast_solver)


@pytest.fixture
def separable_interior(rng, two_qubits):
    """A random two-qubit state mixed far enough toward I/4 to sit inside the separable ball."""
    rho = random_density(two_qubits, rng)
    return DensityOperator(0.2 * rho.matrix + 0.8 * np.eye(4) / 4, two_qubits)


@pytest.fixture
def lean_harness():
    """Smallest settings that still close brackets below tau / 2 on 2x2x2 and 3x3 layouts."""
    oracle = OracleConfig(restarts=4, sweeps=40, ppt_max_iter=1500, ppt_gap_tol=1e-5)
    return HarnessConfig(solver=SolverConfig(max_iter=200, gap_tol=2e-3, oracle=oracle), workers=4)
