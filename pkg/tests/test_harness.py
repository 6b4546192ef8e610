"""Tests for the continuity harness: verdict logic, predictions and end-to-end reproductions."""
import math
from dataclasses import replace

import numpy as np
import pytest

from core.errors import LayoutError, SequenceError
from core.free_sets import ConvexHull, FullySeparable, PiSeparable, PPTStates
from core.operators import DensityOperator, PartitionSet, SystemLayout, tensor
from core.random_states import random_density
from core.solver import SolverResult
from lab.harness import (
    CONVERGES,
    INCONCLUSIVE,
    NO,
    NO_PREDICTION,
    YES,
    ConvergenceReport,
    HarnessConfig,
    marginal_reports,
    observe,
    predict,
    run_continuity_harness,
    window_verdicts,
)
from lab.sequences import (
    StateSequence,
    gen_constant,
    gen_dominated,
    gen_lsc_gap,
    gen_mixture,
    gen_pushforward,
    identity_operation,
    rotation_schedule,
)


def _result(upper, width=0.0):
    return SolverResult(value=upper, sigma_star=None, fw_gap=width, iterations=1, bracket=(upper - width, upper))


@pytest.mark.parametrize("uppers, widths, expected", [
    ([0.5, 0.9, 0.501, 0.502, 0.499], [0.0] * 5, YES),
    ([0.5, 0.5, 0.6, 0.6, 0.6], [0.0] * 5, NO),
    ([0.5, 0.5, 0.5, 0.5, 0.5], [0.0, 0.0, 0.0, 0.01, 0.0], INCONCLUSIVE),
    ([math.inf, 0.5, 0.5, 0.5, 0.5], [0.0] * 5, NO),
])
def test_observe(uppers, widths, expected):
    """Tail closeness within tau, gaps above tau/2 make it inconclusive, an infinite limit is never 'yes'."""
    results = [_result(u, w) for u, w in zip(uppers, widths)]
    assert observe(results, tau=5e-3, tail=3) == expected


def test_window_verdicts():
    """Every window after the burn-in is judged; one late 'no' spoils the summary."""
    results = [_result(u) for u in [0.0, 0.0, 0.0, 0.0, 0.1, 0.0]]
    windows, verdict = window_verdicts(results, burn_in=0, tau=5e-3, tail=2)
    assert [(s, e) for s, e, _ in windows] == [(1, 2), (2, 3), (3, 4), (4, 5)]
    assert [v for _, _, v in windows] == [YES, YES, NO, NO]
    assert verdict == NO


def test_window_verdicts_too_short():
    windows, verdict = window_verdicts([_result(0.0), _result(0.0)], burn_in=0, tau=5e-3, tail=3)
    assert windows == []
    assert verdict == INCONCLUSIVE


def test_harness_config_validation():
    with pytest.raises(ValueError):
        HarnessConfig(tau=0.0)
    with pytest.raises(ValueError):
        HarnessConfig(tail=0)


def test_predict_annotations_override(separable_interior, two_qubits):
    seq = gen_constant(separable_interior, 4)
    model = FullySeparable(two_qubits)
    cfg = HarnessConfig()
    assert predict(seq, model, cfg, [], [], {"separable": None}) == (NO_PREDICTION, None)
    assert predict(seq, model, cfg, [], [], {"separable": "by-hand"}) == (CONVERGES, "by-hand")
    assert predict(seq, model, cfg, [], []) == (CONVERGES, "constant-sequence")


def test_predict_mutual_information_clause(two_qubits):
    """A sequence without a structural premise still gets a prediction when its mutual information settles."""
    limit = DensityOperator(np.eye(4) / 4, two_qubits)
    seq = StateSequence((limit, limit, limit), limit, "custom")
    verdict = predict(seq, FullySeparable(two_qubits), HarnessConfig(), [0.0, 0.0, 0.0, 0.0], [])
    assert verdict == (CONVERGES, "mutual-information-continuity")


def test_predict_marginal_entropy_clause(two_qubits):
    limit = DensityOperator(np.eye(4) / 4, two_qubits)
    seq = StateSequence((limit, limit, limit), limit, "custom")
    tables = [[1.0, 1.0, 1.0, 1.0], [1.0, 0.5, 0.5, 0.5]]
    verdict = predict(seq, FullySeparable(two_qubits), HarnessConfig(), [0.0, 1.0, 1.0, 1.0], tables)
    assert verdict == (CONVERGES, "marginal-entropy-continuity")


def test_predict_nothing_for_hulls(rng, two_qubits):
    limit = DensityOperator(np.eye(4) / 4, two_qubits)
    seq = StateSequence((limit, limit, limit), limit, "custom")
    hull = ConvexHull([random_density(two_qubits, rng)])
    assert predict(seq, hull, HarnessConfig(), [0.0] * 4, []) == (NO_PREDICTION, None)


def test_harness_rejects_layout_mismatch(separable_interior):
    seq = gen_constant(separable_interior, 3)
    with pytest.raises(LayoutError):
        run_continuity_harness(seq, [FullySeparable(SystemLayout((4,)))])


def test_harness_rechecks_domination(separable_interior):
    """A sequence whose recorded premise is false is rejected before solving."""
    seq = gen_dominated(separable_interior, 0.5, 4, 0, delta=0.05)
    forged = StateSequence(seq.states, seq.limit, "dominated", {"c": 1.0}, dominating=DensityOperator(
        np.diag([1.0, 0.0, 0.0, 0.0]), separable_interior.layout))
    with pytest.raises(SequenceError):
        run_continuity_harness(forged, [FullySeparable(separable_interior.layout)])


def test_constant_sequence_converges(separable_interior, two_qubits, fast_harness):
    """Every model observes 'yes' on a constant sequence."""
    seq = gen_constant(separable_interior, 4)
    report = run_continuity_harness(seq, [FullySeparable(two_qubits), PPTStates(two_qubits)], fast_harness)
    for verdict in report.verdicts.values():
        assert verdict.predicted == CONVERGES
        assert verdict.clause == "constant-sequence"
        assert verdict.observed == YES
        assert verdict.agreement is True
    assert report.passed
    frame = report.to_frame()
    assert list(frame.columns) == ConvergenceReport.COLUMNS
    assert len(frame) == 2 * 5


def test_dominated_sequence_converges(separable_interior, two_qubits, fast_harness):
    """Domination by a fixed state predicts convergence, and the solver sees it within tau."""
    seq = gen_dominated(separable_interior, 0.5, 12, 0, delta=0.05)
    report = run_continuity_harness(seq, [FullySeparable(two_qubits)], fast_harness)
    verdict = report.verdicts["separable"]
    assert verdict.predicted == CONVERGES
    assert verdict.clause == "dominated-by-fixed-state"
    assert verdict.observed == YES
    assert report.passed
    block = report.verdict_block()
    assert block["models"]["separable"]["agreement"] is True


def test_marginal_reports_with_constant_block(rng, fast_harness):
    """A product sequence whose B factor never moves has a constant B-marginal table."""
    layout_a = SystemLayout((2,))
    omega_b = DensityOperator(0.5 * random_density(2, rng).matrix + 0.25 * np.eye(2), SystemLayout((2,)))
    sigma_a = DensityOperator(0.5 * random_density(2, rng).matrix + 0.25 * np.eye(2), layout_a)
    seq_a = gen_dominated(sigma_a, 0.5, 6, 0, delta=0.05)
    states = tuple(DensityOperator(tensor(a, omega_b).matrix, SystemLayout((2, 2))) for a in seq_a.states)
    limit = DensityOperator(tensor(seq_a.limit, omega_b).matrix, SystemLayout((2, 2)))
    seq = StateSequence(states, limit, "product")
    report = marginal_reports(seq, [1], fast_harness)
    uppers = report.marginal.to_frame()["upper"]
    assert float(uppers.max() - uppers.min()) <= 1e-3
    assert report.mutual_information_verdict == YES
    assert report.forward["block"][1] == YES
    assert report.backward == (CONVERGES, YES)


def test_marginal_reports_rejects_trivial_block(separable_interior, fast_harness):
    with pytest.raises(LayoutError):
        marginal_reports(gen_constant(separable_interior, 3), [0, 1], fast_harness)


def _tripartite_interior(seed):
    rng = np.random.default_rng(seed)
    layout = SystemLayout((2, 2, 2))
    rho = random_density(layout, rng)
    return DensityOperator(0.1 * rho.matrix + 0.9 * np.eye(8) / 8, layout)


def _tripartite_models(layout):
    return [FullySeparable(layout), PiSeparable(layout, PartitionSet.parse("{{1,2},{3}}|{{1},{2,3}}")),
            PPTStates(layout)]


def _assert_reproduced(report, names):
    for name in names:
        verdict = report.verdicts[name]
        assert verdict.predicted == CONVERGES, name
        assert verdict.observed == YES, name
    assert not [row for row in report.implications if row["outcome"] == "counterexample"]
    assert report.passed


@pytest.mark.slow
def test_reproduce_dominated_family(lean_harness):
    sigma = _tripartite_interior(11)
    seq = gen_dominated(sigma, 0.5, 8, 3, delta=0.05)
    models = _tripartite_models(sigma.layout)
    report = run_continuity_harness(seq, models, lean_harness)
    _assert_reproduced(report, [m.describe() for m in models])


@pytest.mark.slow
def test_reproduce_mixture_family(lean_harness):
    seq_a = gen_dominated(_tripartite_interior(12), 0.5, 8, 4, delta=0.05)
    seq_b = gen_dominated(_tripartite_interior(13), 0.5, 8, 5, delta=0.05)
    weights = [0.5 + 0.2 / n for n in range(1, 9)]
    seq = gen_mixture(seq_a, seq_b, weights, 0.5)
    models = _tripartite_models(seq.layout)
    report = run_continuity_harness(seq, models, lean_harness)
    _assert_reproduced(report, [m.describe() for m in models])
    assert report.verdicts["separable"].clause == "mixture-of-converging"


@pytest.mark.slow
def test_reproduce_pushforward_family(lean_harness):
    base = gen_dominated(_tripartite_interior(14), 0.5, 8, 6, delta=0.05)
    layout = base.layout
    ops = rotation_schedule(layout, 8, seed=7, angle=0.5)
    seq = gen_pushforward(base, ops, identity_operation(layout), model=FullySeparable(layout))
    models = _tripartite_models(layout)
    report = run_continuity_harness(seq, models, lean_harness)
    _assert_reproduced(report, [m.describe() for m in models])
    assert report.verdicts["separable"].clause == "pushforward-of-converging"


@pytest.mark.slow
def test_lsc_gap_is_not_predicted_and_does_not_converge(lean_harness):
    """Dimension growth keeps the distance away from the limit value while no clause applies.

    The separation is measured against the PPT floor, so it does not rest on
    the heuristic product-state search.
    """
    seq = gen_lsc_gap([2, 2, 3, 3, 3])
    cfg = replace(lean_harness, solver=replace(lean_harness.solver, max_iter=1000, ppt_floor=True))
    report = run_continuity_harness(seq, [FullySeparable(seq.layout)], cfg)
    verdict = report.verdicts["separable"]
    assert verdict.predicted == NO_PREDICTION
    assert verdict.observed == NO
    assert verdict.separation_certified
    assert verdict.separation >= 10 * cfg.tau
    assert verdict.agreement is None
    assert report.verdict_block()["models"]["separable"]["separation_certified"] is True


def test_separation_uses_certified_floor(monkeypatch, separable_interior, two_qubits):
    """Tail lower ends backed only by a product-state search are replaced by their PPT floor."""
    seq = gen_dominated(separable_interior, 0.5, 4, 0, delta=0.05)
    floored = SolverResult(value=0.5, sigma_star=None, fw_gap=0.05, iterations=1, bracket=(0.45, 0.5),
                           certified=False, certified_floor=0.3)
    monkeypatch.setattr("lab.harness.free_distance",
                        lambda rho, model, cfg: _result(0.0) if rho is seq.limit else floored)
    verdict = run_continuity_harness(seq, [FullySeparable(two_qubits)]).verdicts["separable"]
    assert verdict.separation == pytest.approx(0.3)
    assert verdict.separation_certified


@pytest.mark.slow
def test_tripartite_marginal_criterion(lean_harness):
    """A converging 2x2x2 sequence converges on every marginal, in both directions of the criterion."""
    seq = gen_dominated(_tripartite_interior(21), 0.5, 6, 8, delta=0.05)
    for block in ([0], [1, 2]):
        report = marginal_reports(seq, block, lean_harness)
        assert report.joint.verdicts["separable"].observed == YES
        assert report.forward["block"] == (CONVERGES, YES)
        assert report.forward["complement"] == (CONVERGES, YES)
        assert report.mutual_information_verdict == YES
        assert report.backward == (CONVERGES, YES)
