"""Continuity harness: measure D_F along a sequence and compare with what the theory predicts.

Observed convergence is a finite-prefix surrogate: the solver's upper
bounds on the last ``tail`` indices must sit within ``tau`` of the limit's,
with every bracket narrower than ``tau / 2`` (otherwise the verdict is
"inconclusive", never a claim).  Predictions come from the sufficient
conditions a sequence was built to satisfy.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from core.entropy import format_nats, mutual_information, von_neumann_entropy
from core.errors import LayoutError, SequenceError
from core.free_sets import ConvexHull, FreeSetModel, FullySeparable, PiSeparable, PPTStates
from core.operators import Partition, partial_trace
from core.solver import SolverConfig, SolverResult, free_distance
from lab.sequences import DOMINATION_ATOL, KRAUS_ATOL, StateSequence

logger = logging.getLogger(__name__)

YES, NO, INCONCLUSIVE = "yes", "no", "inconclusive"
CONVERGES, NO_PREDICTION = "converges", "no-prediction"


@dataclass(frozen=True)
class HarnessConfig:
    tau: float = 5e-3
    tail: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.tail < 1:
            raise ValueError("tail must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class ModelVerdict:
    model: str
    predicted: str
    clause: str | None
    observed: str
    agreement: bool | None
    separation: float
    windows: list[tuple[int, int, str]] = field(default_factory=list)
    window_verdict: str = INCONCLUSIVE
    separation_certified: bool = False


@dataclass
class ConvergenceReport:
    """Per-index measurements and verdicts for one sequence against several models."""

    family: str
    rows: list[dict] = field(default_factory=list)
    verdicts: dict[str, ModelVerdict] = field(default_factory=dict)
    nesting: list[str] = field(default_factory=list)
    semicontinuity: list[str] = field(default_factory=list)
    implications: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    COLUMNS = ["model", "n", "trace_dist", "lower", "upper", "gap", "mutual_information"]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.COLUMNS)

    def verdict_block(self) -> dict:
        def number(x):
            return format_nats(x) if math.isinf(x) else round(float(x), 6)

        return {
            "family": self.family,
            "models": {
                name: {
                    "predicted": v.predicted,
                    "clause": v.clause,
                    "observed": v.observed,
                    "agreement": v.agreement,
                    "separation": number(v.separation),
                    "separation_certified": v.separation_certified,
                    "window_verdict": v.window_verdict,
                }
                for name, v in self.verdicts.items()
            },
            "nesting_violations": list(self.nesting),
            "semicontinuity_violations": list(self.semicontinuity),
            "implications": list(self.implications),
            "violations": list(self.violations),
        }

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_premises(seq: StateSequence) -> None:
    """Re-check the premise a generator claims, independently of the generator."""
    if seq.family == "dominated":
        c = seq.params["c"]
        dominating = seq.dominating
        anchors = list(dominating.states) if isinstance(dominating, StateSequence) else [dominating] * len(seq)
        limit = dominating.limit if isinstance(dominating, StateSequence) else dominating
        pairs = list(enumerate(zip(anchors, seq.states), start=1)) + [(0, (limit, seq.limit))]
        for n, (sigma, rho) in pairs:
            gap = sigma.matrix - c * rho.matrix
            if float(np.linalg.eigvalsh((gap + gap.conj().T) / 2)[0]) < -DOMINATION_ATOL:
                raise SequenceError(f"state {n} is not dominated with c={c}")
    elif seq.family == "pushforward":
        for op in seq.operations:
            if float(np.linalg.eigvalsh(op.effect)[-1]) > 1 + KRAUS_ATOL:
                raise SequenceError(f"operation {op.label} is not trace non-increasing")
        if any(c < 1e-12 for c in seq.normalizers):
            raise SequenceError("pushforward sequence contains a degenerate normalisation")
    elif seq.family == "mixture":
        weights = seq.params["weights"] + [seq.params["limit_weight"]]
        if any(not 0 <= p <= 1 for p in weights):
            raise SequenceError("mixture weights outside [0, 1]")
    for rho in list(seq.states) + [seq.limit]:
        if abs(rho.trace - 1) > 1e-10:
            raise SequenceError("sequence state is not normalised")


def _solve_all(seq: StateSequence, model: FreeSetModel, cfg: HarnessConfig) -> list[SolverResult]:
    """Results for rho_0, rho_1, ..., rho_N in that order."""
    states = [seq.limit] + list(seq.states)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(lambda rho: free_distance(rho, model, cfg.solver), states))
    return [free_distance(rho, model, cfg.solver) for rho in states]


def observe(results: list[SolverResult], tau: float, tail: int) -> str:
    """Finite-prefix convergence verdict from limit-first solver results."""
    limit, tail_results = results[0], results[1:][-tail:]
    if math.isinf(limit.upper):
        return NO
    if any(r.fw_gap > tau / 2 for r in [limit] + tail_results):
        return INCONCLUSIVE
    if all(abs(r.upper - limit.upper) <= tau for r in tail_results):
        return YES
    return NO


def window_verdicts(results: list[SolverResult], burn_in: int, tau: float, tail: int):
    """Verdicts on every contiguous window of ``tail`` indices after the burn-in."""
    n_states = len(results) - 1
    windows = []
    for start in range(burn_in + 1, n_states - tail + 2):
        end = start + tail - 1
        windows.append((start, end, observe([results[0]] + results[start:end + 1], tau, tail)))
    if not windows:
        return windows, INCONCLUSIVE
    verdicts = {v for _, _, v in windows}
    if verdicts == {YES}:
        return windows, YES
    return windows, NO if NO in verdicts else INCONCLUSIVE


def _tail_close(values: list[float], limit: float, tau: float, tail: int) -> bool:
    if math.isinf(limit):
        return False
    return all(abs(v - limit) <= tau for v in values[-tail:])


def _structural_clause(seq: StateSequence, model: FreeSetModel) -> str | None:
    """Clause under which ``seq`` is predicted to converge for ``model`` by construction, if any."""
    family = seq.family
    if family == "constant":
        return "constant-sequence"
    if family == "dominated":
        dominating = seq.dominating
        if isinstance(dominating, StateSequence):
            if _structural_clause(dominating, model) is None:
                return None
            return "dominated-by-converging-sequence"
        return "dominated-by-fixed-state"
    if family == "mixture":
        if all(_structural_clause(parent, model) for parent in seq.parents):
            return "mixture-of-converging"
        return None
    if family == "pushforward":
        parent = seq.parents[0]
        if isinstance(model, ConvexHull) or parent.layout.dims != seq.layout.dims:
            return None
        if all(op.local for op in seq.operations) and _structural_clause(parent, model):
            return "pushforward-of-converging"
    return None


def predict(seq: StateSequence, model: FreeSetModel, cfg: HarnessConfig, mi_values: list[float],
            entropy_tables: list[list[float]], annotations: dict | None = None) -> tuple[str, str | None]:
    """Predicted verdict and the clause that fired."""
    name = model.describe()
    if annotations and name in annotations:
        clause = annotations[name]
        return (CONVERGES, clause) if clause else (NO_PREDICTION, None)
    clause = _structural_clause(seq, model)
    if clause:
        return CONVERGES, clause
    if isinstance(model, ConvexHull):
        return NO_PREDICTION, None
    if mi_values and _tail_close(mi_values[1:], mi_values[0], cfg.tau, cfg.tail):
        return CONVERGES, "mutual-information-continuity"
    if entropy_tables:
        converging = [_tail_close(t[1:], t[0], cfg.tau, cfg.tail) for t in entropy_tables]
        if sum(converging) >= len(entropy_tables) - 1:
            return CONVERGES, "marginal-entropy-continuity"
    return NO_PREDICTION, None


def _agreement(predicted: str, observed: str) -> bool | None:
    if predicted != CONVERGES or observed == INCONCLUSIVE:
        return None
    return observed == YES


def _mi_table(seq: StateSequence) -> list[float]:
    if seq.layout.parties < 2:
        return []
    return [mutual_information(rho) for _, rho in seq.with_limit_first()]


def _entropy_tables(seq: StateSequence) -> list[list[float]]:
    """Per-factor marginal entropies, limit first."""
    if seq.layout.parties < 2:
        return []
    return [[von_neumann_entropy(partial_trace(rho, [k])) for _, rho in seq.with_limit_first()]
            for k in range(seq.layout.parties)]



def _nesting_checks(report: ConvergenceReport, solved: dict, models: list[FreeSetModel]):
    separable = [m for m in models if isinstance(m, FullySeparable)]
    for sep in separable:
        for other in models:
            if other is sep or not isinstance(other, (PiSeparable, PPTStates)):
                continue
            for n, (a, b) in enumerate(zip(solved[other.describe()], solved[sep.describe()])):
                if a.upper > b.upper + a.fw_gap + b.fw_gap + 1e-9:
                    report.nesting.append(f"n={n}: {other.describe()} above separable "
                                          f"({a.upper:.6f} > {b.upper:.6f})")


def _implication_checks(report: ConvergenceReport, models: list[FreeSetModel]):
    for sep in (m for m in models if isinstance(m, FullySeparable)):
        sep_verdict = report.verdicts[sep.describe()].observed
        for other in models:
            if not isinstance(other, PiSeparable) or isinstance(other, FullySeparable):
                continue
            pi_verdict = report.verdicts[other.describe()].observed
            if sep_verdict != YES:
                outcome = "vacuous"
            elif pi_verdict == YES:
                outcome = "confirmed"
            elif pi_verdict == NO:
                outcome = "counterexample"
            else:
                outcome = "inconclusive"
            report.implications.append({"premise": sep.describe(), "conclusion": other.describe(),
                                        "outcome": outcome})
            if outcome == "counterexample":
                report.violations.append(f"separable convergence without {other.describe()} convergence")


def run_continuity_harness(seq: StateSequence, models: list[FreeSetModel], cfg: HarnessConfig | None = None,
                           predictions: dict | None = None) -> ConvergenceReport:
    """Solve every (index, model) pair and assemble predicted-versus-observed verdicts.

    ``predictions`` maps a model descriptor to a clause name (forces
    "converges") or to None (forces "no-prediction").
    """
    cfg = cfg or HarnessConfig()
    for model in models:
        if model.layout.dims != seq.layout.dims:
            raise LayoutError(f"model {model.describe()} lives on {model.layout}, sequence on {seq.layout}")
    validate_premises(seq)

    report = ConvergenceReport(seq.family)
    distances = [0.0] + seq.trace_distances()
    mi_values = _mi_table(seq)
    entropy_tables = _entropy_tables(seq)
    solved = {}
    for model in models:
        name = model.describe()
        logger.info(f"Running harness for {seq.family} sequence against {name}")
        results = _solve_all(seq, model, cfg)
        solved[name] = results
        for n, r in enumerate(results):
            report.rows.append({"model": name, "n": n, "trace_dist": distances[n], "lower": r.lower,
                                "upper": r.upper, "gap": r.fw_gap,
                                "mutual_information": mi_values[n] if mi_values else 0.0})
        observed = observe(results, cfg.tau, cfg.tail)
        predicted, clause = predict(seq, model, cfg, mi_values, entropy_tables, predictions)
        if predicted == CONVERGES and math.isinf(results[0].upper):
            predicted, clause = NO_PREDICTION, None
        tail_results = results[1:][-cfg.tail:]
        separation = min(r.certified_lower for r in tail_results) - results[0].upper
        certified = all(r.lower_is_certified for r in tail_results)
        windows, window_verdict = window_verdicts(results, seq.burn_in, cfg.tau, cfg.tail)
        verdict = ModelVerdict(name, predicted, clause, observed, _agreement(predicted, observed),
                               separation, windows, window_verdict, certified)
        report.verdicts[name] = verdict
        if verdict.agreement is False:
            report.violations.append(f"{name}: predicted {clause} but observed no")
            logger.warning(f"Prediction violated for {name} on {seq.family} sequence")
        elif observed == INCONCLUSIVE:
            logger.warning(f"Inconclusive verdict for {name}: solver gaps above tau/2")

        tail_upper = min(r.upper for r in tail_results)
        if results[0].lower > tail_upper + cfg.tau:
            report.semicontinuity.append(f"{name}: limit lower bound {results[0].lower:.6f} "
                                         f"exceeds tail minimum {tail_upper:.6f}")

    _nesting_checks(report, solved, models)
    _implication_checks(report, models)
    report.violations.extend(report.nesting)
    report.violations.extend(report.semicontinuity)
    logger.info(f"Harness finished for {seq.family}: {len(report.violations)} violations")
    return report


@dataclass
class MarginalReport:
    """Joint and marginal reports for a cut B | B-bar, with the two directions of the marginal criterion."""

    block: tuple[int, ...]
    joint: ConvergenceReport
    marginal: ConvergenceReport
    complement: ConvergenceReport
    mutual_information: list[float]
    mutual_information_verdict: str
    forward: dict = field(default_factory=dict)
    backward: tuple[str, str] = (NO_PREDICTION, INCONCLUSIVE)


def _marginal_sequence(seq: StateSequence, keep) -> StateSequence:
    states = tuple(partial_trace(rho, keep) for rho in seq.states)
    return StateSequence(states, partial_trace(seq.limit, keep), "marginal", {"keep": list(keep)})


def marginal_reports(seq: StateSequence, block, cfg: HarnessConfig | None = None) -> MarginalReport:
    """E_R along the B and B-bar marginals and the joint sequence, plus I(B:B-bar)."""
    cfg = cfg or HarnessConfig()
    block = seq.layout.check_indices(block)
    rest = tuple(i for i in range(seq.layout.parties) if i not in block)
    if not block or not rest:
        raise LayoutError("the block must be a nontrivial proper subset of the factors")

    def separable_report(s):
        return run_continuity_harness(s, [FullySeparable(s.layout)], cfg), "separable"

    joint, name = separable_report(seq)
    marginal, _ = separable_report(_marginal_sequence(seq, block))
    complement, _ = separable_report(_marginal_sequence(seq, rest))

    cut = Partition((block, rest))
    mi = [mutual_information(rho, cut) for _, rho in seq.with_limit_first()]
    mi_verdict = YES if _tail_close(mi[1:], mi[0], cfg.tau, cfg.tail) else NO

    joint_obs = joint.verdicts[name].observed
    marg_obs = marginal.verdicts[name].observed
    comp_obs = complement.verdicts[name].observed
    forward_pred = CONVERGES if joint_obs == YES else NO_PREDICTION
    backward_pred = CONVERGES if (marg_obs == YES and comp_obs == YES and mi_verdict == YES) else NO_PREDICTION
    report = MarginalReport(block, joint, marginal, complement, mi, mi_verdict,
                            forward={"block": (forward_pred, marg_obs), "complement": (forward_pred, comp_obs)},
                            backward=(backward_pred, joint_obs))
    logger.info(f"Marginal report for block {[i + 1 for i in block]}: forward={report.forward}, "
                f"backward={report.backward}")
    return report
