"""
Tests for the proximal and projection operators.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.errors import ArgumentError, NumericError
from src.model import make_rng
from src.prox import project_box, prox_nuclear, prox_nuclear_with_spectrum, soft_threshold, svd
from src.theory import nuclear_norm

matrices = arrays(np.float64, (4, 3), elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))


def _prox_objective(B, W, gamma):
    return gamma * nuclear_norm(B) + 0.5 * np.sum((B - W) ** 2)


def test_soft_threshold_scalars():
    """Test symmetric shrinkage on scalars."""
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    with pytest.raises(ArgumentError):
        soft_threshold(1.0, -0.1)


@pytest.mark.parametrize("gamma", [0.0, 0.1, 1.0, 10.0])
def test_prox_shrinks_singular_values(gamma):
    """Test that the output spectrum is the soft-thresholded input spectrum."""
    rng = make_rng(int(gamma * 10))
    for _ in range(20):
        W = 3.0 * rng.standard_normal((10, 8))
        B = prox_nuclear(W, gamma)
        expected = soft_threshold(np.linalg.svd(W, compute_uv=False), gamma)
        assert np.allclose(np.linalg.svd(B, compute_uv=False), expected, atol=1e-8)


def test_prox_beats_perturbations():
    """Test that the prox minimizes its objective against random perturbations."""
    rng = make_rng(0)
    W = rng.standard_normal((10, 8))
    B = prox_nuclear(W, 1.0)
    base = _prox_objective(B, W, 1.0)
    for _ in range(50):
        assert _prox_objective(B + 1e-2 * rng.standard_normal(B.shape), W, 1.0) > base


def test_prox_extremes():
    """Test gamma = 0 (identity) and a huge gamma (zero)."""
    W = make_rng(1).standard_normal((5, 4))
    assert np.allclose(prox_nuclear(W, 0.0), W, atol=1e-12)
    assert np.allclose(prox_nuclear(W, 1e6), 0.0)


def test_prox_spectrum_sum_is_nuclear_norm():
    """Test that the returned spectrum gives the nuclear norm of the output."""
    W = make_rng(2).standard_normal((6, 7))
    B, shrunk = prox_nuclear_with_spectrum(W, 0.5)
    assert np.sum(shrunk) == pytest.approx(nuclear_norm(B))


def test_partial_svd_path_matches_full():
    """Test the truncated fast path on a nearly rank-2 input."""
    rng = make_rng(3)
    W = 10.0 * rng.standard_normal((20, 2)) @ rng.standard_normal((2, 15)) + 0.01 * rng.standard_normal((20, 15))
    full = prox_nuclear(W, 1.0)
    fast = prox_nuclear(W, 1.0, max_rank=3)
    assert np.allclose(fast, full, atol=1e-6)


def test_partial_svd_falls_back():
    """Test that too small a rank cap still gives the exact prox."""
    W = make_rng(4).standard_normal((12, 10))
    assert np.allclose(prox_nuclear(W, 0.1, max_rank=1), prox_nuclear(W, 0.1), atol=1e-10)


def test_non_finite_input():
    """Test that NaN input is a numeric error."""
    W = np.ones((3, 3))
    W[0, 0] = np.nan
    with pytest.raises(NumericError):
        prox_nuclear(W, 1.0)
    with pytest.raises(NumericError):
        svd(W)


def test_project_box():
    """Test clipping and the eta check."""
    B = np.array([[-20.0, 3.0], [10.5, -9.9]])
    assert np.array_equal(project_box(B, 10.0), np.array([[-10.0, 3.0], [10.0, -9.9]]))
    with pytest.raises(ArgumentError):
        project_box(B, 0.0)


@settings(max_examples=100, deadline=None)
@given(matrices, matrices, st.floats(0.0, 5.0))
def test_prox_is_nonexpansive(A, B, gamma):
    """Test ||prox(A) - prox(B)||_F <= ||A - B||_F."""
    gap = np.linalg.norm(prox_nuclear(A, gamma) - prox_nuclear(B, gamma))
    assert gap <= np.linalg.norm(A - B) + 1e-9


def test_soft_threshold_reference_values():
    """Test shrinkage at the threshold and inside the dead zone."""
    assert soft_threshold(5.0, 2.0) == 3.0
    assert soft_threshold(0.7, 0.7) == 0.0
    assert soft_threshold(-0.5, 2.0) == 0.0


def test_prox_diagonal_case():
    """Test diag(3, 1) with gamma = 2."""
    assert np.allclose(prox_nuclear(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-12)


def test_prox_optimality_certificate():
    """Test W - B in gamma times the nuclear-norm subdifferential at B."""
    gamma = 0.7
    W = make_rng(5).standard_normal((10, 8))
    B = prox_nuclear(W, gamma)
    G = W - B
    assert np.linalg.norm(G, 2) <= gamma + 1e-9
    assert np.sum(G * B) == pytest.approx(gamma * nuclear_norm(B), rel=1e-9)


def test_project_box_reference_values():
    """Test entries inside, above and below the box."""
    inside = np.array([[1.0, -9.0]])
    assert np.array_equal(project_box(inside, 10.0), inside)
    assert np.array_equal(project_box(np.array([[12.0, -11.5]]), 10.0), np.array([[10.0, -10.0]]))
