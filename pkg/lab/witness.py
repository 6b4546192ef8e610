"""Free witness sequences omega_n and the divergence conditions they certify."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import pandas as pd

from core.entropy import cross_entropy, marginals, relative_entropy
from core.errors import LayoutError, SequenceError
from core.free_sets import FreeSetModel
from core.operators import DensityOperator, Partition, tensor, trace_distance
from core.solver import SolverConfig, free_distance
from lab.sequences import StateSequence

logger = logging.getLogger(__name__)

HOLDS, FAILS, INFINITE = "holds", "fails", "infinite"


@dataclass(frozen=True, eq=False)
class WitnessSequence:
    """omega_1..omega_N with limit omega_0, each with a note saying why it is free."""

    states: tuple[DensityOperator, ...]
    limit: DensityOperator
    notes: tuple[str, ...]
    limit_note: str
    drift: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.notes) != len(self.states) or not self.limit_note:
            raise SequenceError("every witness state needs a membership note")
        for s in self.states:
            if s.layout.dims != self.limit.layout.dims:
                raise LayoutError(f"witness layouts differ: {s.layout} vs {self.limit.layout}")

    def __len__(self):
        return len(self.states)


@dataclass
class WitnessReport:
    rows: list[dict] = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["n", "relative_entropy", "cross_entropy"])


def _tail_verdict(values: list[float], limit: float, tail: int, tol: float) -> str:
    if math.isinf(limit) or any(math.isinf(v) for v in values):
        return INFINITE
    return HOLDS if all(abs(v - limit) <= tol for v in values[-tail:]) else FAILS


def check_witness_condition(seq: StateSequence, wit: WitnessSequence, tol: float = 5e-3,
                            tail: int = 3) -> WitnessReport:
    """Tables of D(rho_n||omega_n) and Tr rho_n(-ln omega_n) with a tail verdict per condition."""
    if len(seq) != len(wit):
        raise SequenceError(f"sequence has {len(seq)} states, witness {len(wit)}")
    if seq.layout.dims != wit.limit.layout.dims:
        raise LayoutError(f"witness layout {wit.limit.layout} does not match {seq.layout}")
    report = WitnessReport()
    pairs = [(0, seq.limit, wit.limit)] + [(n, r, w) for n, (r, w) in
                                            enumerate(zip(seq.states, wit.states), start=1)]
    for n, rho, omega in pairs:
        report.rows.append({"n": n, "relative_entropy": relative_entropy(rho, omega),
                            "cross_entropy": cross_entropy(rho, omega)})
    for key in ("relative_entropy", "cross_entropy"):
        values = [row[key] for row in report.rows[1:]]
        report.verdicts[key] = _tail_verdict(values, report.rows[0][key], tail, tol)
    logger.info(f"Witness check on {seq.family} sequence: {report.verdicts}")
    return report


def marginal_product_witness(seq: StateSequence) -> WitnessSequence:
    """omega_n = rho_n^{A_1} x ... x rho_n^{A_m}; a product state, hence free for separable-type sets."""
    finest = Partition.finest(seq.layout.parties)

    def product(rho):
        return DensityOperator(tensor(*marginals(rho, finest)).matrix, seq.layout)

    states = tuple(product(rho) for rho in seq.states)
    return WitnessSequence(states, product(seq.limit), tuple(["product of marginals"] * len(states)),
                           "product of marginals")


def optimal_witness(seq: StateSequence, model: FreeSetModel, cfg: SolverConfig | None = None) -> WitnessSequence:
    """omega_n = the solver's optimal free state for rho_n; ``drift`` holds ||omega_n - omega_0||_1."""
    cfg = cfg or SolverConfig()
    limit = free_distance(seq.limit, model, cfg).sigma_star
    states = tuple(free_distance(rho, model, cfg).sigma_star for rho in seq.states)
    drift = tuple(trace_distance(s, limit) for s in states)
    note = f"solver optimum over {model.describe()}"
    return WitnessSequence(states, limit, tuple([note] * len(states)), note, drift)
