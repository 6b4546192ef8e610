import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.errors import ManifestError, OperatorError
from core.operators import HERMITIAN_ATOL, DensityOperator, SystemLayout

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StateFile:
    """A state as stored on disk: dims, matrix rows of [re, im] pairs, optional label.

    ``matrix`` keeps the parsed numbers untouched so emitting a parsed file
    reproduces it byte for byte.
    """

    dims: tuple[int, ...]
    matrix: tuple
    label: str | None = None

    def to_array(self) -> np.ndarray:
        return np.array([[complex(re, im) for re, im in row] for row in self.matrix])

    def to_density(self) -> DensityOperator:
        """Validate and convert; the first bad entry is reported by (row, col)."""
        layout = SystemLayout(self.dims)
        mat = self.to_array()
        if mat.shape != (layout.total, layout.total):
            raise ManifestError(f"matrix is {mat.shape[0]}x{mat.shape[1]} but dims {list(self.dims)} "
                                f"need {layout.total}x{layout.total}")
        scale = max(1.0, float(np.max(np.abs(mat))))
        asym = np.abs(mat - mat.conj().T) > HERMITIAN_ATOL * scale
        if np.any(asym):
            row, col = (int(i) for i in np.argwhere(asym)[0])
            raise ManifestError("matrix is not Hermitian", row=row, col=col)
        try:
            return DensityOperator(mat, layout)
        except OperatorError as exc:
            raise ManifestError(f"not a density matrix: {exc}") from exc

    @classmethod
    def from_density(cls, rho, label: str | None = None) -> "StateFile":
        rows = tuple(tuple((float(z.real), float(z.imag)) for z in row) for row in rho.matrix)
        return cls(tuple(rho.layout.dims), rows, label)

    def to_json(self) -> dict:
        out = {"dims": list(self.dims), "matrix": [[list(pair) for pair in row] for row in self.matrix]}
        if self.label is not None:
            out["label"] = self.label
        return out


def state_from_json(obj) -> StateFile:
    if not isinstance(obj, dict):
        raise ManifestError("state must be a JSON object")
    unknown = set(obj) - {"dims", "matrix", "label"}
    if unknown:
        raise ManifestError(f"unknown state keys: {sorted(unknown)}")
    if "dims" not in obj or "matrix" not in obj:
        raise ManifestError("state needs 'dims' and 'matrix'")
    dims = obj["dims"]
    if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and d >= 1 for d in dims):
        raise ManifestError(f"dims must be a list of positive integers, got {dims!r}")
    rows = obj["matrix"]
    if not isinstance(rows, list) or not rows:
        raise ManifestError("matrix must be a non-empty list of rows")
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != len(rows):
            raise ManifestError(f"row {r} does not have {len(rows)} entries", row=r, col=0)
        for c, pair in enumerate(row):
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
                raise ManifestError("entry must be a [re, im] pair of numbers", row=r, col=c)
    matrix = tuple(tuple(tuple(pair) for pair in row) for row in rows)
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise ManifestError("label must be a string")
    return StateFile(tuple(dims), matrix, label)


def parse_state_file(text: str) -> StateFile:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON: {exc}") from exc
    return state_from_json(obj)


def emit_state_file(state: StateFile) -> str:
    """Canonical form: two-space indent, sorted keys, trailing newline."""
    return json.dumps(state.to_json(), indent=2, sort_keys=True) + "\n"


def load_state(path) -> DensityOperator:
    path = Path(path)
    logger.debug(f"Loading state from {path}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    return parse_state_file(text).to_density()


def save_state(path, rho, label: str | None = None) -> None:
    Path(path).write_text(emit_state_file(StateFile.from_density(rho, label)))
