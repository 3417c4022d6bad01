"""
Tests for error metrics and rate fitting.
"""

import math

import numpy as np
import pytest

from src.errors import ArgumentError, DimensionError
from src.metrics import (
    CurvePoint,
    compute_error,
    fit_display_constant,
    fit_rate,
    mean_and_stderr,
    points_by_loss,
    rescale_n,
    test_error,
)
from src.model import ObservationSet, ParameterMatrix


def test_compute_error_simple_cases():
    """Test zero error for equal matrices and 1 for a unit shift."""
    A = np.arange(6.0).reshape(2, 3)
    assert compute_error(A, A) == 0.0
    assert compute_error(A + 1.0, A) == pytest.approx(1.0)
    assert compute_error(ParameterMatrix(A), A) == 0.0
    with pytest.raises(DimensionError):
        compute_error(A, A.T)


def test_test_error_matches_loop():
    """Test the held-out error against an explicit loop."""
    test = ObservationSet.from_entries([(0, 0, 4.0), (1, 2, 2.0), (0, 1, 3.0)], 2, 3)
    B = np.array([[3.0, 3.0, 0.0], [0.0, 0.0, 5.0]])
    expected = sum((y - B[r, c]) ** 2 for r, c, y in test.entries()) / 3
    assert test_error(B, test) == pytest.approx(expected)


def test_test_error_rejects_empty_set():
    """Test that an empty test set is an argument error."""
    empty = ObservationSet(np.array([], dtype=int), np.array([], dtype=int), np.array([]), 2, 2)
    with pytest.raises(ArgumentError):
        test_error(np.zeros((2, 2)), empty)


def test_mean_and_stderr():
    """Test the sample mean and standard error, including degenerate sizes."""
    mean, stderr = mean_and_stderr([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert stderr == pytest.approx(1.0 / math.sqrt(3))
    assert mean_and_stderr([5.0]) == (5.0, 0.0)
    assert all(math.isnan(v) for v in mean_and_stderr([]))


def test_fit_rate_recovers_inverse_n():
    """Test slope -1 and the display constant on an exact c / n curve."""
    ns = [100, 200, 400, 800, 1600, 3200]
    oracle = [10.0 / n for n in ns]
    errors = [2.5 * o for o in oracle]
    fit = fit_rate(ns, errors, oracle)
    assert fit.slope == pytest.approx(-1.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.display_constant == pytest.approx(2.5)
    assert fit.points_used == 2


def test_fit_display_constant_uses_largest_n():
    """Test that only the last points enter the least-squares constant."""
    errors = [100.0, 100.0, 2.0, 4.0]
    oracle = [1.0, 1.0, 1.0, 2.0]
    assert fit_display_constant(errors, oracle, top=2) == pytest.approx(2.0)
    with pytest.raises(ArgumentError):
        fit_display_constant([1.0], [0.0])
    with pytest.raises(ArgumentError):
        fit_rate([1, 2], [1.0, 0.5], [1.0, 0.5], top=3)


def test_rescale_and_grouping():
    """Test the rescaled abscissa and grouping of curve points by loss."""
    assert rescale_n(300, 10, 1) == pytest.approx(10.0 / math.log(10))
    points = [
        CurvePoint(n=200, loss="huber", mean_error=1.0, stderr=0.1, oracle_value=1.0, scaled_oracle=1.0),
        CurvePoint(n=100, loss="huber", mean_error=2.0, stderr=0.1, oracle_value=2.0, scaled_oracle=2.0),
        CurvePoint(n=100, loss="quadratic", mean_error=3.0, stderr=0.1, oracle_value=2.0, scaled_oracle=2.0),
    ]
    grouped = points_by_loss(points)
    assert [pt.n for pt in grouped["huber"]] == [100, 200]
    assert len(grouped["quadratic"]) == 1
