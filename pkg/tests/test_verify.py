"""Tests for the randomised identity suites."""
import pytest

from lab.verify import SUITES, SuiteResult, verify_all


def test_all_suites_pass_at_full_count():
    """200 instances per suite covers both layouts and every channel output dimension."""
    results = verify_all(count=200, seed=0)
    assert [r.name for r in results] == list(SUITES)
    for result in results:
        assert result.ok, str(result)
        assert result.total == 200


def test_data_processing_on_the_larger_layout():
    """Trials 3 and 9 shrink a 2x3 state into a qubit, which needs a three-level environment."""
    (result,) = verify_all(count=10, seed=2, suites=["data-processing"])
    assert result.ok, str(result)


def test_selected_suites_only():
    results = verify_all(count=2, seed=0, suites=["nonnegativity", "scaling"])
    assert [r.name for r in results] == ["nonnegativity", "scaling"]


def test_unknown_suite():
    with pytest.raises(ValueError):
        verify_all(count=1, suites=["triangle-inequality"])


def test_suite_result_summary():
    result = SuiteResult("gradient", 9, 10, 1e-7)
    assert str(result) == "gradient: 9/10"
    assert not result.ok
