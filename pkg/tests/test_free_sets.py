"""Tests for the free-set models and their oracles."""
import numpy as np
import pytest

from core.errors import LayoutError
from core.free_sets import (
    ConvexHull,
    FullySeparable,
    OracleConfig,
    PiSeparable,
    PPTStates,
    closest_product_state,
    group_layout,
    is_ppt,
    lmo,
    sample_free_state,
)
from core.operators import DensityOperator, HermitianOperator, Partition, PartitionSet, SystemLayout, tensor
from core.random_states import bell_state, random_density, random_product_state


@pytest.mark.parametrize("dims, partition, grouped", [
    ((2, 2, 2), "{{1},{2},{3}}", (2, 2, 2)),
    ((2, 2, 2), "{{1,2},{3}}", (4, 2)),
    ((2, 3), "{{1,2}}", (6,)),
    ((2, 3, 2), "{{1,3},{2}}", (4, 3)),
])
def test_group_layout(dims, partition, grouped):
    assert group_layout(SystemLayout(dims), Partition.parse(partition)).dims == grouped


def test_group_layout_rejects_bad_partition():
    with pytest.raises(LayoutError):
        group_layout(SystemLayout((2, 2, 2)), Partition.parse("{{1},{2}}"))


def test_grouped_round_trip(rng):
    """Moving an operator into block order and back is the identity."""
    layout = SystemLayout((2, 3, 2))
    grouped = group_layout(layout, Partition.parse("{{1,3},{2}}"))
    rho = random_density(layout, rng)
    back = grouped.from_grouped(grouped.to_grouped(rho))
    np.testing.assert_allclose(back.matrix, rho.matrix, atol=1e-12)


def test_product_search_identity(two_qubits, fast_oracle):
    found = closest_product_state(np.eye(4), two_qubits, fast_oracle)
    assert found.value == pytest.approx(1.0)


def test_product_search_diagonal(two_qubits, fast_oracle):
    """A diagonal G is minimised by the basis vector of its smallest entry."""
    g = np.diag([3.0, 1.0, -2.0, 0.5])
    found = closest_product_state(g, two_qubits, fast_oracle)
    assert found.value == pytest.approx(-2.0)
    np.testing.assert_allclose(np.abs(found.state.vector) ** 2, [0, 0, 1, 0], atol=1e-8)


def test_product_search_bell_projector(bell, two_qubits, fast_oracle):
    """min <psi|Phi+|psi> over products is 0 and min <psi|-Phi+|psi> is -1/2."""
    assert closest_product_state(bell.matrix, two_qubits, fast_oracle).value == pytest.approx(0.0, abs=1e-9)
    assert closest_product_state(-bell.matrix, two_qubits, fast_oracle).value == pytest.approx(-0.5, abs=1e-9)


def test_product_search_running_best_is_monotone(rng, fast_oracle):
    layout = SystemLayout((2, 2, 2))
    g = random_density(layout, rng).matrix
    found = closest_product_state(-g, layout, fast_oracle)
    assert all(a >= b for a, b in zip(found.running_best, found.running_best[1:]))
    assert found.running_best[-1] == found.value


def test_product_search_independent_of_workers(rng):
    """Restart seeds and tie-breaking do not depend on the thread count."""
    layout = SystemLayout((2, 3))
    g = HermitianOperator(-random_density(layout, rng).matrix, layout)
    serial = closest_product_state(g, layout, OracleConfig(restarts=6, workers=1))
    threaded = closest_product_state(g, layout, OracleConfig(restarts=6, workers=3))
    assert serial.value == threaded.value
    assert serial.restart == threaded.restart


def test_product_search_layout_mismatch(fast_oracle):
    with pytest.raises(LayoutError):
        closest_product_state(np.eye(4), SystemLayout((2, 3)), fast_oracle)


def test_hull_oracle_is_exact(rng):
    omega_1, omega_2 = random_density(2, rng), random_density(2, rng)
    hull = ConvexHull([omega_1, omega_2])
    g = HermitianOperator(omega_1.matrix - omega_2.matrix)
    result = lmo(g, hull)
    expected = int(np.argmin([g.inner(omega_1), g.inner(omega_2)]))
    assert result.index == expected
    assert result.lower == result.value


def test_separable_oracle_returns_product_vertex(rng, two_qubits, fast_oracle):
    model = FullySeparable(two_qubits)
    result = lmo(HermitianOperator(-bell_state(2).matrix, two_qubits), model, fast_oracle)
    assert result.value == pytest.approx(-0.5, abs=1e-9)
    assert is_ppt(result.vertex)
    assert np.linalg.matrix_rank(result.vertex.matrix, tol=1e-8) == 1


def test_pi_separable_picks_best_partition(rng, fast_oracle):
    """With Phi+ on the first two qubits, grouping them lets the oracle reach -1."""
    layout = SystemLayout((2, 2, 2))
    rho = tensor(bell_state(2), DensityOperator(np.diag([1.0, 0.0])))
    model = PiSeparable(layout, PartitionSet.parse("{{1},{2,3}}|{{1,2},{3}}"))
    result = lmo(HermitianOperator(-rho.matrix, layout), model, fast_oracle)
    assert result.value == pytest.approx(-1.0, abs=1e-9)
    assert model.describe() == "pi:{{1},{2,3}}|{{1,2},{3}}"


def test_ppt_oracle_bell_projector(two_qubits, fast_oracle):
    """min Tr(-Phi+ sigma) over PPT states is -1/2 with a matching dual bound."""
    result = lmo(HermitianOperator(-bell_state(2).matrix, two_qubits), PPTStates(two_qubits), fast_oracle)
    assert result.value == pytest.approx(-0.5, abs=1e-4)
    assert result.lower <= result.value + 1e-12
    assert result.lower >= -0.5 - 1e-4
    assert is_ppt(result.vertex)


def test_ppt_oracle_flags_iteration_cap(rng):
    """A starved subsolver reports non-convergence with its residual instead of raising."""
    layout = SystemLayout((2, 3))
    cfg = OracleConfig(ppt_max_iter=1, ppt_gap_tol=1e-14)
    g = HermitianOperator(-random_density(layout, rng).matrix, layout)
    result = lmo(g, PPTStates(layout), cfg)
    assert not result.converged
    assert result.residual > 0
    assert result.lower <= result.value


def test_ppt_warm_start_is_reused(two_qubits, fast_oracle):
    model = PPTStates(two_qubits)
    g = HermitianOperator(-bell_state(2).matrix, two_qubits)
    first = lmo(g, model, fast_oracle)
    second = lmo(g, model, fast_oracle, warm=first.warm)
    assert second.value == pytest.approx(first.value, abs=1e-5)


def test_ppt_model_validates_cut():
    with pytest.raises(LayoutError):
        PPTStates(SystemLayout((4,)))
    with pytest.raises(LayoutError):
        PPTStates(SystemLayout((2, 2)), transposed=[0, 1])
    assert PPTStates(SystemLayout((2, 2, 2))).describe() == "ppt:2,3"


def test_is_ppt(bell, rng, two_qubits):
    assert not is_ppt(bell)
    assert is_ppt(random_product_state(two_qubits, rng))
    assert is_ppt(DensityOperator(np.eye(4) / 4, two_qubits))


@pytest.mark.parametrize("make_model", [
    lambda layout: FullySeparable(layout),
    lambda layout: PiSeparable(layout, PartitionSet.parse("{{1},{2}}")),
    lambda layout: PPTStates(layout),
])
def test_samples_are_ppt_states(make_model, two_qubits):
    """For two qubits every sampled member of these sets passes the Peres test."""
    model = make_model(two_qubits)
    for seed in range(5):
        sample = sample_free_state(model, seed)
        assert sample.trace == pytest.approx(1.0)
        assert is_ppt(sample)


def test_sample_singleton_hull(rng):
    omega = random_density(3, rng)
    assert sample_free_state(ConvexHull([omega]), 0) is omega


def test_hull_rejects_mixed_layouts(rng):
    with pytest.raises(LayoutError):
        ConvexHull([random_density(SystemLayout((2, 2)), rng), random_density(SystemLayout((4,)), rng)])


def test_hull_anchor_is_barycenter(rng):
    states = [random_density(2, rng) for _ in range(3)]
    hull = ConvexHull(states)
    np.testing.assert_allclose(hull.anchor().matrix, sum(s.matrix for s in states) / 3)
    assert hull.describe() == "hull:3"


@pytest.mark.parametrize("seed", range(5))
def test_separable_minimum_not_below_pi_separable(seed):
    """Product vertices are pi-separable, so the coarser model can only go lower."""
    rng = np.random.default_rng(seed)
    layout = SystemLayout((2, 2, 2))
    cfg = OracleConfig(restarts=16, seed=seed)
    g = HermitianOperator(np.eye(8) - 2 * random_density(layout, rng).matrix, layout)
    fine = lmo(g, FullySeparable(layout), cfg)
    coarse = lmo(g, PiSeparable(layout, PartitionSet.parse("{{1,2},{3}}")), cfg)
    assert fine.value >= coarse.value - 1e-6
