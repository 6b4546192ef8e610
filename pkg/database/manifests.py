"""Experiment manifests: which sequence to build, which free sets to test, with what settings.

A manifest is a JSON object::

    {
      "family": "dominated",
      "params": {"sigma": {"random": {"dims": [2, 2], "mix": 0.5}}, "c": 0.5, "length": 12},
      "models": ["separable", "ppt", "pi:{{1},{2}}"],
      "solver": {"max_iter": 300},
      "tolerance": {"tau": 0.005, "tail": 3},
      "seed": 7
    }

State specs inside ``params`` are a path to a state file, an inline state
file object, or one of ``{"random": {...}}``, ``{"bell": d}``,
``{"mixed": dims}``.  Nested sequences (mixture parents, pushforward base)
are ``{"family": ..., "params": ...}`` objects.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from core.errors import ManifestError
from core.free_sets import ConvexHull, FreeSetModel, FullySeparable, PiSeparable, PPTStates
from core.operators import DensityOperator, PartitionSet, SystemLayout
from core.random_states import bell_state, maximally_mixed, random_density
from core.solver import SolverConfig
from database.state_files import load_state, state_from_json
from lab.harness import HarnessConfig
from lab.sequences import (
    StateSequence,
    gen_constant,
    gen_dominated,
    gen_lsc_gap,
    gen_mixture,
    gen_pushforward,
    identity_operation,
    local_projection,
    lsc_gap_weights,
    rotation_schedule,
)

logger = logging.getLogger(__name__)

MANIFEST_KEYS = {"family", "params", "models", "solver", "tolerance", "seed", "label"}
SOLVER_KEYS = {"max_iter", "gap_tol", "line_search_evals", "blend", "init_samples", "ppt_floor"}
ORACLE_KEYS = {"restarts", "sweeps", "ppt_max_iter", "ppt_gap_tol"}
TOLERANCE_KEYS = {"tau", "tail", "support_tol", "workers"}
FAMILY_PARAMS = {
    "constant": {"state", "length"},
    "dominated": {"sigma", "c", "length", "delta"},
    "mixture": {"a", "b", "weights", "limit_weight", "amplitude"},
    "pushforward": {"base", "operation", "angle", "factor"},
    "lsc-gap": {"dims", "weights", "scale", "ambient"},
}
FAMILIES = tuple(FAMILY_PARAMS)


@dataclass(frozen=True)
class ExperimentManifest:
    family: str
    params: dict
    models: tuple[str, ...]
    solver: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    seed: int = 0
    label: str | None = None
    base_dir: Path = Path(".")


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ManifestError(f"{where} must be a JSON object")
    unknown = set(section) - allowed
    if unknown:
        raise ManifestError(f"unknown {where} keys: {sorted(unknown)}")


def manifest_from_json(obj, base_dir=".") -> ExperimentManifest:
    _check_keys(obj, MANIFEST_KEYS, "manifest")
    if "family" not in obj or "models" not in obj:
        raise ManifestError("manifest needs 'family' and 'models'")
    if obj["family"] not in FAMILIES:
        raise ManifestError(f"unknown family {obj['family']!r}; expected one of {list(FAMILIES)}")
    models = obj["models"]
    if not isinstance(models, list) or not models or not all(isinstance(m, str) for m in models):
        raise ManifestError("models must be a non-empty list of descriptors")
    solver = obj.get("solver", {})
    _check_keys(solver, SOLVER_KEYS | ORACLE_KEYS, "solver")
    tolerance = obj.get("tolerance", {})
    _check_keys(tolerance, TOLERANCE_KEYS, "tolerance")
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise ManifestError("seed must be an integer")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ManifestError("params must be a JSON object")
    return ExperimentManifest(obj["family"], params, tuple(models), solver, tolerance, seed,
                              obj.get("label"), Path(base_dir))


def load_manifest(path) -> ExperimentManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON in {path}: {exc}") from exc
    return manifest_from_json(obj, path.parent)


def resolve_state(spec, base_dir: Path, rng: np.random.Generator) -> DensityOperator:
    if isinstance(spec, str):
        return load_state(base_dir / spec)
    if not isinstance(spec, dict):
        raise ManifestError(f"cannot interpret state spec {spec!r}")
    if "matrix" in spec:
        return state_from_json(spec).to_density()
    if "bell" in spec:
        return bell_state(int(spec["bell"]))
    if "mixed" in spec:
        return maximally_mixed(SystemLayout(tuple(spec["mixed"])))
    if "random" in spec:
        opts = spec["random"]
        _check_keys(opts, {"dims", "rank", "mix"}, "random state")
        layout = SystemLayout(tuple(opts["dims"]))
        rho = random_density(layout, rng, rank=opts.get("rank"))
        mix = float(opts.get("mix", 0.0))
        return DensityOperator((1 - mix) * rho.matrix + mix * np.eye(layout.total) / layout.total, layout)
    raise ManifestError(f"cannot interpret state spec {sorted(spec)}")


def _mixture_weights(params: dict, length: int) -> tuple[list[float], float]:
    if "weights" in params:
        return [float(p) for p in params["weights"]], float(params["limit_weight"])
    p0 = float(params.get("limit_weight", 0.5))
    amplitude = float(params.get("amplitude", 0.2))
    return [min(1.0, max(0.0, p0 + amplitude / n)) for n in range(1, length + 1)], p0


def build_sequence(family: str, params: dict, base_dir: Path, rng: np.random.Generator) -> StateSequence:
    if family not in FAMILY_PARAMS:
        raise ManifestError(f"unknown family {family!r}; expected one of {list(FAMILIES)}")
    _check_keys(params, FAMILY_PARAMS[family], f"{family} params")
    length = int(params.get("length", 12))
    if family == "constant":
        return gen_constant(resolve_state(params["state"], base_dir, rng), length)
    if family == "dominated":
        sigma = params["sigma"]
        if isinstance(sigma, dict) and "family" in sigma:
            sigma = _nested(sigma, base_dir, rng)
        else:
            sigma = resolve_state(sigma, base_dir, rng)
        return gen_dominated(sigma, float(params.get("c", 0.5)), length, rng, float(params.get("delta", 0.1)))
    if family == "mixture":
        seq_a = _nested(params["a"], base_dir, rng)
        seq_b = _nested(params["b"], base_dir, rng)
        weights, p0 = _mixture_weights(params, len(seq_a))
        return gen_mixture(seq_a, seq_b, weights, p0)
    if family == "pushforward":
        base = _nested(params["base"], base_dir, rng)
        operation = params.get("operation", "rotation")
        if operation == "identity":
            ops = [identity_operation(base.layout)] * len(base)
        elif operation == "rotation":
            ops = rotation_schedule(base.layout, len(base), rng, float(params.get("angle", 0.5)))
        elif operation == "projection":
            factor = int(params.get("factor", 1)) - 1
            projector = np.zeros((base.layout.dims[factor],) * 2)
            projector[0, 0] = 1.0
            ops = [local_projection(projector, factor, base.layout)] * len(base)
        else:
            raise ManifestError(f"unknown operation {operation!r}")
        limit_op = ops[0] if operation == "projection" else identity_operation(base.layout)
        return gen_pushforward(base, ops, limit_op, seed=rng)
    if family == "lsc-gap":
        dims = params.get("dims", [2, 2, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4])
        weights = params.get("weights") or lsc_gap_weights(dims, float(params.get("scale", 0.5)))
        return gen_lsc_gap(dims, weights, params.get("ambient"))


def _nested(spec, base_dir, rng) -> StateSequence:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ManifestError("nested sequence must be an object with 'family' and 'params'")
    _check_keys(spec, {"family", "params"}, "nested sequence")
    return build_sequence(spec["family"], spec.get("params", {}), base_dir, rng)


def manifest_sequence(manifest: ExperimentManifest) -> StateSequence:
    rng = np.random.default_rng(manifest.seed)
    try:
        return build_sequence(manifest.family, manifest.params, manifest.base_dir, rng)
    except KeyError as exc:
        raise ManifestError(f"missing parameter {exc} for family {manifest.family!r}") from exc


def load_hull(path) -> ConvexHull:
    """A JSON list of inline state objects or paths relative to the list file."""
    path = Path(path)
    try:
        items = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read hull file {path}: {exc}") from exc
    if not isinstance(items, list) or not items:
        raise ManifestError("hull file must hold a non-empty list")
    states, labels = [], []
    for i, item in enumerate(items):
        if isinstance(item, str):
            states.append(load_state(path.parent / item))
            labels.append(item)
        else:
            sf = state_from_json(item)
            states.append(sf.to_density())
            labels.append(sf.label or f"state{i + 1}")
    return ConvexHull(states, labels)


def parse_free_set(descriptor: str, layout: SystemLayout, base_dir=".") -> FreeSetModel:
    """Build a model from a descriptor such as ``separable``, ``ppt:2``, ``pi:{{1,2},{3}}|{{1},{2,3}}`` or ``hull:<path>``.

    Subsystem labels are 1-based.
    """
    kind, _, arg = descriptor.partition(":")
    try:
        if kind == "separable" and not arg:
            return FullySeparable(layout)
        if kind == "ppt":
            transposed = [int(x) - 1 for x in arg.split(",")] if arg else None
            return PPTStates(layout, transposed)
        if kind == "pi" and arg:
            return PiSeparable(layout, PartitionSet.parse(arg))
        if kind == "hull" and arg:
            hull = load_hull(Path(base_dir) / arg)
            if hull.layout.dims != layout.dims:
                raise ManifestError(f"hull states live on {hull.layout}, expected {layout}")
            return hull
    except ManifestError:
        raise
    except ValueError as exc:
        raise ManifestError(f"bad free-set descriptor {descriptor!r}: {exc}") from exc
    raise ManifestError(f"unknown free-set descriptor {descriptor!r}")


def solver_config(settings: dict | None = None, seed: int = 0, base: SolverConfig | None = None) -> SolverConfig:
    settings = dict(settings or {})
    base = base or SolverConfig()
    oracle = {k: settings.pop(k) for k in list(settings) if k in ORACLE_KEYS}
    oracle_cfg = replace(base.oracle, seed=seed, **oracle)
    support_tol = settings.pop("support_tol", base.support_tol)
    return replace(base, oracle=oracle_cfg, seed=seed, support_tol=support_tol, **settings)


def harness_config(manifest: ExperimentManifest) -> HarnessConfig:
    tol = dict(manifest.tolerance)
    settings = dict(manifest.solver)
    if "support_tol" in tol:
        settings["support_tol"] = tol.pop("support_tol")
    try:
        solver = solver_config(settings, manifest.seed)
        return HarnessConfig(solver=solver, **tol)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"invalid settings: {exc}") from exc
