"""
Tests for truths, sampling and corruption.
"""

import numpy as np
import pytest

from src.config import CorruptionModel, NoiseModel
from src.errors import ArgumentError, DimensionError
from src.model import (
    ObservationSet,
    ParameterMatrix,
    corrupt,
    generate_low_rank,
    sample_uniform,
)


@pytest.fixture
def truth():
    return generate_low_rank(12, 9, 2, eta=10.0, seed=3)


def test_low_rank_truth(truth):
    """Test rank, shape and scaling of the generated truth."""
    assert truth.shape == (12, 9)
    assert np.linalg.matrix_rank(truth.b_star.data) == 2
    assert truth.b_star.max_abs == pytest.approx(5.0)


def test_low_rank_truth_is_seeded():
    """Test that the same seed gives the same truth."""
    a = generate_low_rank(6, 5, 1, 10.0, seed=11).b_star.data
    b = generate_low_rank(6, 5, 1, 10.0, seed=11).b_star.data
    c = generate_low_rank(6, 5, 1, 10.0, seed=12).b_star.data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_low_rank_rejects_bad_rank():
    """Test that s0 > min(p, q) is rejected."""
    with pytest.raises(DimensionError):
        generate_low_rank(4, 3, 4, 10.0, seed=0)


def test_sample_uniform_noiseless(truth):
    """Test that noiseless samples reproduce the truth entries."""
    obs = sample_uniform(truth, 50, NoiseModel(kind="none"), seed=1)
    assert obs.n == 50
    assert obs.rows.max() < 12 and obs.cols.max() < 9
    assert np.array_equal(obs.values, truth.b_star.data[obs.rows, obs.cols])


def test_sample_uniform_is_reproducible(truth):
    """Test that masks and noise depend only on the seeds."""
    noise = NoiseModel(kind="student_t", df=3.0, seed=5)
    a = sample_uniform(truth, 40, noise, seed=2)
    b = sample_uniform(truth, 40, noise, seed=2)
    c = sample_uniform(truth, 40, noise, seed=3)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.rows, b.rows)
    assert not np.array_equal(a.values, c.values)


def test_sample_uniform_exhaustive(truth):
    """Test that exhaustive sampling visits every cell once."""
    obs = sample_uniform(truth, 108, NoiseModel(kind="none"), seed=0, exhaustive=True)
    assert np.array_equal(obs.counts(), np.ones((12, 9), dtype=int))
    assert np.array_equal(obs.to_dense(), truth.b_star.data)
    with pytest.raises(ArgumentError):
        sample_uniform(truth, 100, NoiseModel(kind="none"), seed=0, exhaustive=True)


def test_sample_uniform_rejects_empty(truth):
    """Test that n <= 0 is an argument error."""
    with pytest.raises(ArgumentError):
        sample_uniform(truth, 0, NoiseModel(), seed=0)


def test_corrupt_shifts_expected_count(truth):
    """Test that round(fraction * n) entries move by exactly +/- magnitude."""
    obs = sample_uniform(truth, 200, NoiseModel(), seed=4)
    out = corrupt(obs, CorruptionModel(fraction=0.05, magnitude=10.0, seed=1))
    diff = out.values - obs.values
    moved = np.flatnonzero(~np.isclose(diff, 0.0))
    assert len(moved) == 10
    assert np.allclose(np.abs(diff[moved]), 10.0)
    assert np.array_equal(out.rows, obs.rows)


def test_corrupt_edge_cases(truth):
    """Test zero fraction and a missing magnitude."""
    obs = sample_uniform(truth, 20, NoiseModel(), seed=4)
    assert corrupt(obs, CorruptionModel(fraction=0.0, magnitude=1.0)) is obs
    with pytest.raises(ArgumentError):
        corrupt(obs, CorruptionModel(fraction=0.1))


def test_observation_set_validation():
    """Test index range checks."""
    with pytest.raises(DimensionError):
        ObservationSet([0, 3], [0, 1], [1.0, 2.0], 3, 2)
    with pytest.raises(DimensionError):
        ObservationSet([0], [0, 1], [1.0], 3, 2)


def test_observed_entry_matrix_averages_duplicates():
    """Test B_obs with repeated cells."""
    obs = ObservationSet.from_entries([(0, 0, 2.0), (0, 0, 4.0), (1, 1, -1.0)], 2, 2)
    assert np.array_equal(obs.to_dense(), np.array([[3.0, 0.0], [0.0, -1.0]]))
    assert obs.to_sparse()[0, 0] == 6.0
    assert list(obs.entries())[2] == (1, 1, -1.0)


def test_parameter_matrix_projection():
    """Test the box projection of a parameter."""
    b = ParameterMatrix(np.array([[12.0, -3.0]]), eta=10.0)
    assert np.array_equal(b.projected().data, np.array([[10.0, -3.0]]))
    with pytest.raises(ArgumentError):
        ParameterMatrix(np.zeros((2, 2)), eta=0.0)


def test_small_truth_scaling_and_rank():
    """Test the full-rank 2x2 case and the rank contract on a 30x30 truth."""
    small = generate_low_rank(2, 2, 2, eta=10.0, seed=7)
    assert small.b_star.max_abs == pytest.approx(5.0)
    assert np.linalg.matrix_rank(small.b_star.data) == 2
    s = np.linalg.svd(generate_low_rank(30, 30, 2, eta=10.0, seed=1).b_star.data, compute_uv=False)
    assert s[2] < 1e-10 * s[0]


def test_rank_one_truth_has_vanishing_minors():
    """Test that every 2x2 minor of a rank-one truth is zero."""
    B = generate_low_rank(5, 5, 1, eta=10.0, seed=3).b_star.data
    for i in range(5):
        for k in range(i + 1, 5):
            for j in range(5):
                for m in range(j + 1, 5):
                    assert B[i, j] * B[k, m] - B[i, m] * B[k, j] == pytest.approx(0.0, abs=1e-12)


def test_gaussian_noise_is_centered():
    """Test that sampled residuals average to zero within three standard errors."""
    truth = generate_low_rank(10, 10, 1, eta=10.0, seed=0)
    obs = sample_uniform(truth, 100_000, NoiseModel(kind="gaussian", stddev=1.0, seed=9), seed=0)
    eps = obs.values - truth.b_star.data[obs.rows, obs.cols]
    assert abs(eps.mean()) < 3 * eps.std(ddof=1) / np.sqrt(eps.size)


def test_student_t_noise_variance():
    """Test that t_3 draws have variance close to 3."""
    noise = NoiseModel(kind="student_t", df=3.0)
    assert noise.variance == pytest.approx(3.0)
    draws = noise.sample(np.random.default_rng(2024), 1_000_000)
    assert draws.var() == pytest.approx(3.0, rel=0.05)


def test_corrupt_degenerate_and_rounding(truth):
    """Test a zero magnitude and the round(fraction * n) count."""
    obs = sample_uniform(truth, 1000, NoiseModel(), seed=2)
    same = corrupt(obs, CorruptionModel(fraction=1.0, magnitude=0.0, seed=1))
    assert np.array_equal(same.values, obs.values)
    moved = corrupt(obs, CorruptionModel(fraction=0.05, magnitude=3.0, seed=1))
    assert int(np.sum(moved.values != obs.values)) == 50
