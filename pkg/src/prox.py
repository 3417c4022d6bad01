"""
Proximal and projection operators: singular value soft-thresholding and box projection.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .errors import ArgumentError, NumericError


@dataclass
class SvdFactors:
    """Thin SVD W = U diag(singular_values) Vt with singular values nonincreasing."""

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    def reconstruct(self, singular_values: Optional[np.ndarray] = None) -> np.ndarray:
        s = self.singular_values if singular_values is None else singular_values
        return (self.u * s) @ self.vt


def svd(W: np.ndarray) -> SvdFactors:
    """Full thin SVD with a finiteness check."""
    W = np.asarray(W, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise NumericError("SVD input contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(W, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"SVD did not converge: {e}") from e
    return SvdFactors(u, s, vt)


def soft_threshold(x: Union[float, np.ndarray], gamma: float) -> Union[float, np.ndarray]:
    """
    Symmetric shrinkage S_gamma(x) = sign(x) max(|x| - gamma, 0).

    Args:
        x: Scalar or array
        gamma: Nonnegative threshold

    Returns:
        Shrunk value(s), scalar in scalar out
    """
    if gamma < 0:
        raise ArgumentError(f"gamma must be nonnegative, got {gamma}")
    arr = np.asarray(x, dtype=np.float64)
    out = np.sign(arr) * np.maximum(np.abs(arr) - gamma, 0.0)
    return float(out) if np.ndim(x) == 0 else out


def _partial_prox(W: np.ndarray, gamma: float, k: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    # Exact only when the k-th singular value is already below the threshold.
    try:
        v0 = np.ones(min(W.shape)) / np.sqrt(min(W.shape))
        u, s, vt = svds(W, k=k, v0=v0)
    except (ArpackNoConvergence, ValueError):
        return None
    order = np.argsort(s)[::-1]
    u, s, vt = u[:, order], s[order], vt[order]
    if s[-1] > gamma:
        return None
    shrunk = np.maximum(s - gamma, 0.0)
    return (u * shrunk) @ vt, shrunk


def prox_nuclear_with_spectrum(
    W: np.ndarray, gamma: float, max_rank: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nuclear-norm prox together with the shrunk singular values of the result.

    With ``max_rank`` a partial SVD is tried first; it falls back to the full
    SVD whenever more than ``max_rank`` singular values exceed gamma.
    """
    if gamma < 0:
        raise ArgumentError(f"gamma must be nonnegative, got {gamma}")
    W = np.asarray(W, dtype=np.float64)
    if max_rank is not None and max_rank < min(W.shape) - 1:
        if not np.all(np.isfinite(W)):
            raise NumericError("prox input contains non-finite entries")
        fast = _partial_prox(W, gamma, max_rank)
        if fast is not None:
            return fast
    factors = svd(W)
    shrunk = np.maximum(factors.singular_values - gamma, 0.0)
    return factors.reconstruct(shrunk), shrunk


def prox_nuclear(W: np.ndarray, gamma: float, max_rank: Optional[int] = None) -> np.ndarray:
    """
    argmin_B gamma ||B||_nuclear + 1/2 ||B - W||_F^2 = U S_gamma(sigma) Vt.

    Args:
        W: Input matrix
        gamma: Nonnegative threshold
        max_rank: Optional partial-SVD fast path (off by default)

    Returns:
        Prox of W
    """
    return prox_nuclear_with_spectrum(W, gamma, max_rank)[0]


def project_box(B: np.ndarray, eta: float) -> np.ndarray:
    """Entrywise clip to [-eta, eta]."""
    if not eta > 0:
        raise ArgumentError(f"eta must be positive, got {eta}")
    return np.clip(np.asarray(B, dtype=np.float64), -eta, eta)
