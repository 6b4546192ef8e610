"""Tests for witness sequences and the divergence conditions they check."""
import numpy as np
import pytest

from core.entropy import mutual_information
from core.errors import SequenceError
from core.free_sets import FullySeparable
from core.operators import DensityOperator, SystemLayout
from core.random_states import random_density
from lab.sequences import StateSequence, gen_constant, gen_dominated
from lab.witness import (
    FAILS,
    HOLDS,
    INFINITE,
    WitnessSequence,
    check_witness_condition,
    marginal_product_witness,
    optimal_witness,
)


def _self_witness(seq):
    return WitnessSequence(seq.states, seq.limit, tuple(["member"] * len(seq)), "member")


def test_witness_equal_to_state(separable_interior):
    """omega_n = rho_n gives zero divergence and both conditions hold."""
    seq = gen_dominated(separable_interior, 0.5, 6, 0, delta=0.05)
    report = check_witness_condition(seq, _self_witness(seq))
    frame = report.to_frame()
    np.testing.assert_allclose(frame["relative_entropy"], 0.0, atol=1e-10)
    assert list(frame["n"]) == list(range(7))
    assert report.verdicts["relative_entropy"] == HOLDS


def test_marginal_product_witness_gives_mutual_information(rng):
    """D(rho_n || rho_A x rho_B) is the mutual information table."""
    layout = SystemLayout((2, 2))
    sigma = DensityOperator(0.5 * random_density(layout, rng).matrix + 0.5 * np.eye(4) / 4, layout)
    seq = gen_dominated(sigma, 0.5, 5, 1, delta=0.05)
    report = check_witness_condition(seq, marginal_product_witness(seq))
    expected = [mutual_information(rho) for _, rho in seq.with_limit_first()]
    np.testing.assert_allclose(report.to_frame()["relative_entropy"], expected, atol=1e-10)


def test_shrinking_support_witness_is_infinite(rng):
    """A rank-deficient witness against faithful states makes the table infinite."""
    layout = SystemLayout((2, 2))
    seq = gen_constant(random_density(layout, rng), 4)
    pure = DensityOperator(np.diag([1.0, 0.0, 0.0, 0.0]), layout)
    wit = WitnessSequence(tuple([pure] * 4), pure, tuple(["product"] * 4), "product")
    report = check_witness_condition(seq, wit)
    assert report.verdicts["relative_entropy"] == INFINITE
    assert report.verdicts["cross_entropy"] == INFINITE


def test_witness_condition_fails_for_drifting_witness():
    """A fixed witness far from the tail states leaves the divergence away from the limit value."""
    layout = SystemLayout((2, 2))
    limit = DensityOperator(np.eye(4) / 4, layout)
    states = tuple([DensityOperator(np.diag([0.4, 0.3, 0.2, 0.1]), layout)] * 3)
    seq = StateSequence(states, limit, "custom")
    wit = WitnessSequence(tuple([limit] * 3), limit, tuple(["mixed"] * 3), "mixed")
    report = check_witness_condition(seq, wit, tol=1e-3)
    assert report.verdicts["relative_entropy"] == FAILS


def test_witness_needs_notes(rng):
    rho = random_density(2, rng)
    with pytest.raises(SequenceError):
        WitnessSequence((rho,), rho, (), "note")


def test_witness_length_mismatch(rng):
    seq = gen_constant(random_density(2, rng), 3)
    with pytest.raises(SequenceError):
        check_witness_condition(seq, WitnessSequence(seq.states[:2], seq.limit, ("a", "b"), "a"))


def test_optimal_witness_records_drift(separable_interior, two_qubits, fast_solver):
    seq = gen_constant(separable_interior, 2)
    wit = optimal_witness(seq, FullySeparable(two_qubits), fast_solver)
    assert len(wit) == 2
    assert len(wit.drift) == 2
    assert all(d < 0.1 for d in wit.drift)
