"""Tests for the JSON state-file format."""
import json

import numpy as np
import pytest

from core.errors import ManifestError
from core.operators import SystemLayout
from core.random_states import bell_state, random_density
from database.state_files import (
    StateFile,
    emit_state_file,
    load_state,
    parse_state_file,
    save_state,
    state_from_json,
)


def _plus_state(**extra):
    obj = {"dims": [2], "matrix": [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]}
    obj.update(extra)
    return obj


def test_emit_reproduces_canonical_text():
    """Parsing then emitting a canonical file gives back the same bytes."""
    text = json.dumps(_plus_state(label="plus"), indent=2, sort_keys=True) + "\n"
    assert emit_state_file(parse_state_file(text)) == text


def test_emit_is_stable_for_generated_states(rng):
    text = emit_state_file(StateFile.from_density(random_density(SystemLayout((2, 3)), rng), "random"))
    assert emit_state_file(parse_state_file(text)) == text
    assert text.endswith("}\n")


def test_to_density():
    rho = state_from_json(_plus_state()).to_density()
    np.testing.assert_allclose(rho.matrix, np.full((2, 2), 0.5))
    assert rho.layout.dims == (2,)


def test_first_non_hermitian_entry_is_located():
    obj = {"dims": [2], "matrix": [[[0.5, 0], [0.2, 0]], [[0.0, 0], [0.5, 0]]]}
    with pytest.raises(ManifestError) as excinfo:
        state_from_json(obj).to_density()
    assert (excinfo.value.row, excinfo.value.col) == (0, 1)
    assert "(row 0, col 1)" in str(excinfo.value)


def test_ragged_row_is_located():
    obj = {"dims": [2], "matrix": [[[0.5, 0], [0.5, 0]], [[0.5, 0]]]}
    with pytest.raises(ManifestError) as excinfo:
        state_from_json(obj)
    assert excinfo.value.row == 1


@pytest.mark.parametrize("obj", [
    _plus_state(comment="x"),
    {"dims": [2]},
    {"dims": [0], "matrix": [[[1, 0]]]},
    {"dims": [1], "matrix": [[[1, True]]]},
    _plus_state(label=3),
    [1, 2],
])
def test_rejected_objects(obj):
    with pytest.raises(ManifestError):
        state_from_json(obj)


def test_shape_must_match_dims():
    with pytest.raises(ManifestError):
        state_from_json({"dims": [2, 2], "matrix": _plus_state()["matrix"]}).to_density()


def test_negative_eigenvalue_is_rejected():
    obj = {"dims": [2], "matrix": [[[1.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]]}
    with pytest.raises(ManifestError):
        state_from_json(obj).to_density()


def test_invalid_json():
    with pytest.raises(ManifestError):
        parse_state_file("{not json")


def test_save_and_load(tmp_path):
    path = tmp_path / "bell.json"
    save_state(path, bell_state(2), "bell")
    rho = load_state(path)
    np.testing.assert_allclose(rho.matrix, bell_state(2).matrix, atol=1e-15)
    assert rho.layout.dims == (2, 2)
    assert json.loads(path.read_text())["label"] == "bell"


def test_load_missing_file(tmp_path):
    with pytest.raises(ManifestError):
        load_state(tmp_path / "absent.json")
