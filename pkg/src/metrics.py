"""
Error metrics, replicate aggregation and rate fitting for the simulation curves.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import ArgumentError, DimensionError
from .model import ObservationSet, ParameterMatrix, as_array, check_shape

Matrix = Union[ParameterMatrix, np.ndarray]

# Oracle display constants for the default simulation setting
DISPLAY_CONSTANTS: Dict[str, float] = {"student_t": 1.68, "gaussian": 1.1}


def compute_error(estimate: Matrix, truth: Matrix) -> float:
    """
    Mean squared entrywise error 1/(pq) ||estimate - truth||_F^2.

    Args:
        estimate: Estimated matrix
        truth: Target matrix of the same shape

    Returns:
        Nonnegative error
    """
    a = as_array(estimate)
    b = as_array(truth)
    if a.shape != b.shape:
        raise DimensionError(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sum((a - b) ** 2) / a.size)


def test_error(estimate: Matrix, test: ObservationSet) -> float:
    """1/n_test sum over test entries of (value - estimate[row, col])^2."""
    b = as_array(estimate)
    check_shape(test, b)
    if test.n == 0:
        raise ArgumentError("test set is empty")
    r = test.values - b[test.rows, test.cols]
    return float(np.sum(r * r) / test.n)


# Keep pytest from collecting the metric as a test
test_error.__test__ = False


@dataclass
class CurvePoint:
    n: int
    loss: str
    mean_error: float
    stderr: float
    oracle_value: float
    scaled_oracle: float
    replicates: int = 0
    excluded: int = 0


def mean_and_stderr(values: Sequence[float]) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(np.mean(arr)), float(np.std(arr, ddof=1) / math.sqrt(arr.size))


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    display_constant: float
    points_used: int


def _top(values: Sequence[float], count: int) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)[-count:]


def fit_display_constant(errors: Sequence[float], oracle_values: Sequence[float],
                         top: Optional[int] = None) -> float:
    """Least-squares c minimizing sum (error - c * oracle)^2 over the largest-n points."""
    if len(errors) != len(oracle_values) or not errors:
        raise ArgumentError("errors and oracle values must be non-empty and of equal length")
    count = top if top is not None else max(1, math.ceil(len(errors) / 3))
    e = _top(errors, count)
    o = _top(oracle_values, count)
    denom = float(np.dot(o, o))
    if denom == 0:
        raise ArgumentError("oracle values are all zero")
    return float(np.dot(e, o) / denom)


def fit_rate(ns: Sequence[int], errors: Sequence[float], oracle_values: Sequence[float],
             top: Optional[int] = None) -> RateFit:
    """
    Log-log regression of error on n plus the display constant on the same points.

    Args:
        ns: Sample sizes, ascending
        errors: Mean errors per sample size
        oracle_values: Oracle rate per sample size
        top: Number of largest-n points to use (default: top third)

    Returns:
        RateFit with slope, intercept, R^2 and display constant
    """
    if not len(ns) == len(errors) == len(oracle_values):
        raise ArgumentError("ns, errors and oracle values must have equal length")
    count = top if top is not None else max(2, math.ceil(len(ns) / 3))
    if count < 2 or count > len(ns):
        raise ArgumentError(f"need between 2 and {len(ns)} points for a rate fit, got {count}")
    x = np.log(_top(ns, count))
    y = np.log(_top(errors, count))
    fit = stats.linregress(x, y)
    return RateFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        display_constant=fit_display_constant(errors, oracle_values, count),
        points_used=count,
    )


def rescale_n(n: int, p: int, s0: int) -> float:
    """n / (3 p s0 log p), the abscissa that lines up curves of different sizes."""
    return n / (3.0 * p * s0 * math.log(p))


def points_by_loss(points: List[CurvePoint]) -> Dict[str, List[CurvePoint]]:
    grouped: Dict[str, List[CurvePoint]] = {}
    for point in points:
        grouped.setdefault(point.loss, []).append(point)
    for series in grouped.values():
        series.sort(key=lambda pt: pt.n)
    return grouped
