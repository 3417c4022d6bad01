"""
Robust loss functions, their derivatives and the empirical risk over observed entries.

The Huber loss keeps the unnormalised scaling rho(x) = x^2 inside [-kappa, kappa]
and 2 kappa |x| - kappa^2 outside, so its Lipschitz constant is 2 kappa.
"""

from typing import Optional, Union

import numpy as np

from .config import LossSpec
from .model import ObservationSet, ParameterMatrix, as_array, check_shape

ArrayLike = Union[float, np.ndarray]


def _scalar_or_array(values: np.ndarray, like) -> ArrayLike:
    return float(values) if np.ndim(like) == 0 else values


def loss_value(spec: LossSpec, residual: ArrayLike) -> ArrayLike:
    """Evaluate rho(residual) elementwise."""
    x = np.asarray(residual, dtype=np.float64)
    if spec.kind == "huber":
        k = spec.kappa
        ax = np.abs(x)
        out = np.where(ax <= k, x * x, 2.0 * k * ax - k * k)
    elif spec.kind == "absolute":
        out = np.abs(x)
    else:
        out = x * x
    return _scalar_or_array(out, residual)


def loss_derivative(spec: LossSpec, residual: ArrayLike) -> ArrayLike:
    """
    Derivative of rho; for the absolute loss the minimum-norm subgradient (0 at 0).
    """
    x = np.asarray(residual, dtype=np.float64)
    if spec.kind == "huber":
        k = spec.kappa
        out = np.where(np.abs(x) <= k, 2.0 * x, 2.0 * k * np.sign(x))
    elif spec.kind == "absolute":
        out = np.sign(x)
    else:
        out = 2.0 * x
    return _scalar_or_array(out, residual)


def lipschitz_constant(spec: LossSpec) -> Optional[float]:
    """Global Lipschitz constant of rho, None for the (locally Lipschitz) quadratic loss."""
    if spec.kind == "huber":
        return 2.0 * spec.kappa
    if spec.kind == "absolute":
        return 1.0
    return None


def residuals(obs: ObservationSet, B: Union[ParameterMatrix, np.ndarray]) -> np.ndarray:
    """Y_i - trace(X_i B) in entry order."""
    b = as_array(B)
    check_shape(obs, b)
    return obs.values - b[obs.rows, obs.cols]


def empirical_risk(spec: LossSpec, obs: ObservationSet, B: Union[ParameterMatrix, np.ndarray]) -> float:
    """
    R_n(B) = (1/n) sum_i rho(Y_i - B[row_i, col_i]).

    Args:
        spec: Loss function
        obs: Observations
        B: Parameter matrix of shape (p, q)

    Returns:
        Mean loss over the observations, summed in entry order
    """
    r = residuals(obs, B)
    if obs.n == 0:
        return 0.0
    return float(np.sum(loss_value(spec, r)) / obs.n)


def risk_gradient(spec: LossSpec, obs: ObservationSet, B: Union[ParameterMatrix, np.ndarray]) -> np.ndarray:
    """
    Dense gradient of the empirical risk; zero at unobserved cells.

    Contributions of repeated samples of one cell are summed in entry order.
    """
    b = as_array(B)
    r = residuals(obs, b)
    p, q = obs.shape
    if obs.n == 0:
        return np.zeros((p, q))
    weights = -np.asarray(loss_derivative(spec, r)) / obs.n
    grad = np.bincount(obs.flat_index, weights=weights, minlength=p * q)
    return grad.reshape(p, q)
