"""
Tests for the accelerated proximal gradient solver and the absolute-loss continuation.
"""

import math

import numpy as np
import pytest

from src.config import LossSpec, NoiseModel, SolverConfig
from src.errors import ArgumentError, DimensionError
from src.losses import empirical_risk, risk_gradient
from src.model import ObservationSet, generate_low_rank, sample_uniform
from src.prox import prox_nuclear
from src.solver import fixed_point_residual, objective, solve, solve_absolute

KAPPA = 1.345


def one_cell(*values):
    return ObservationSet.from_entries([(0, 0, v) for v in values], 1, 1)


@pytest.fixture
def small_instance():
    truth = generate_low_rank(6, 5, 1, eta=10.0, seed=8)
    obs = sample_uniform(truth, 20, NoiseModel(kind="student_t", df=3.0, seed=1), seed=8)
    return truth, obs


def test_soft_threshold_mean():
    """Test the 1x1 quadratic case: argmin 1/2 sum (y - b)^2 + |b| = 2.5 for y in {2, 4}."""
    result = solve(LossSpec.quadratic(), one_cell(2.0, 4.0), SolverConfig(lam=1.0, max_iter=500))
    assert result.estimate.data[0, 0] == pytest.approx(2.5, abs=1e-4)
    assert result.estimate.shape == (1, 1)


def test_huber_symmetric_from_observed_entries():
    """Test the symmetric 1x1 Huber case started from B_obs."""
    obs = one_cell(0.0, 10.0)
    result = solve(LossSpec.huber(KAPPA), obs, SolverConfig(lam=0.0, max_iter=200), init=obs.to_dense())
    assert result.estimate.data[0, 0] == pytest.approx(5.0, abs=1e-9)


def test_huber_symmetric_from_zero_reaches_flat_minimum():
    """Test that a zero start lands in the flat set of Huber minimizers [kappa, 10 - kappa]."""
    obs = one_cell(0.0, 10.0)
    spec = LossSpec.huber(KAPPA)
    result = solve(spec, obs, SolverConfig(lam=0.0, max_iter=500))
    b = result.estimate.data[0, 0]
    assert KAPPA - 1e-3 <= b <= 10.0 - KAPPA + 1e-3
    assert empirical_risk(spec, obs, result.estimate) == pytest.approx(10 * KAPPA - KAPPA ** 2, abs=1e-6)


def test_absolute_continuation_finds_median():
    """Test the 1x1 absolute-loss case: the minimizer is the median 2 of {1, 2, 9}."""
    result = solve_absolute(one_cell(1.0, 2.0, 9.0), SolverConfig(lam=0.0, max_iter=2000))
    assert result.estimate.data[0, 0] == pytest.approx(2.0, abs=0.02)


def test_absolute_objective_beats_huber_solution():
    """Test that the continuation output has lower absolute-loss objective than the Huber fit."""
    obs = one_cell(0.0, 1.0, 9.0)
    config = SolverConfig(lam=0.0, max_iter=2000)
    huber = solve(LossSpec.huber(KAPPA), obs, config)
    absolute = solve_absolute(obs, config)
    assert huber.estimate.data[0, 0] == pytest.approx(1.1725, abs=1e-3)
    assert objective(LossSpec.absolute(), obs, absolute.estimate, 0.0) <= \
        objective(LossSpec.absolute(), obs, huber.estimate, 0.0)


def test_noiseless_exhaustive_recovery():
    """Test exact recovery from every cell with a negligible penalty."""
    truth = generate_low_rank(20, 15, 2, eta=10.0, seed=0)
    obs = sample_uniform(truth, 300, NoiseModel(kind="none"), seed=0, exhaustive=True)
    result = solve(LossSpec.quadratic(), obs, SolverConfig(lam=1e-10, max_iter=500))
    b0 = truth.b_star.data
    assert np.linalg.norm(result.estimate.data - b0) / np.linalg.norm(b0) < 1e-4


def test_noiseless_exhaustive_recovery_absolute():
    """Test that the continuation also recovers a noiseless truth."""
    truth = generate_low_rank(20, 15, 2, eta=10.0, seed=1)
    obs = sample_uniform(truth, 300, NoiseModel(kind="none"), seed=1, exhaustive=True)
    result = solve_absolute(obs, SolverConfig(lam=1e-10, max_iter=500))
    b0 = truth.b_star.data
    assert np.linalg.norm(result.estimate.data - b0) / np.linalg.norm(b0) < 1e-3


def test_solver_diagnostics(small_instance):
    """Test trace length, finiteness and the backtracking exit condition."""
    _, obs = small_instance
    config = SolverConfig(lam=0.1, max_iter=300)
    result = solve(LossSpec.huber(KAPPA), obs, config)
    assert result.iterations_run == 300
    assert len(result.objective_trace) == 300
    assert all(math.isfinite(v) for v in result.objective_trace)
    assert all(d <= config.bt_tolerance for d in result.accepted_deltas)
    assert result.final_step_curvature >= config.l_init * (1 - 1e-12)


def test_min_objective_late(small_instance):
    """Test that the best objective value is reached in the last fifth of the run."""
    _, obs = small_instance
    trace = solve(LossSpec.huber(KAPPA), obs, SolverConfig(lam=0.1, max_iter=2000)).objective_trace
    best = float(np.min(trace))
    assert min(trace[int(0.8 * len(trace)):]) <= best + 1e-8 * (1 + abs(best))


def test_fixed_point_at_solution(small_instance):
    """Test the fixed-point characterization at a converged estimate."""
    _, obs = small_instance
    config = SolverConfig(lam=0.1, max_iter=20000, fixed_point_tol=1e-7)
    result = solve(LossSpec.huber(KAPPA), obs, config)
    scale = 1.0 + np.linalg.norm(result.estimate.data)
    assert result.final_fixed_point_residual <= 1e-4 * scale
    again = fixed_point_residual(LossSpec.huber(KAPPA), obs, result.estimate, 0.1, result.final_step_curvature)
    assert again == pytest.approx(result.final_fixed_point_residual)


def test_fixed_point_residual_at_zero(small_instance):
    """Test that B = 0 is not a fixed point for nonzero data."""
    _, obs = small_instance
    assert fixed_point_residual(LossSpec.huber(KAPPA), obs, np.zeros((6, 5)), 0.01, 1.0) > 0


def test_deterministic(small_instance):
    """Test bit-identical traces for identical inputs."""
    _, obs = small_instance
    config = SolverConfig(lam=0.1, max_iter=100)
    a = solve(LossSpec.huber(KAPPA), obs, config)
    b = solve(LossSpec.huber(KAPPA), obs, config)
    assert a.objective_trace == b.objective_trace
    assert np.array_equal(a.estimate.data, b.estimate.data)


def test_box_projection_bounds_estimate(small_instance):
    """Test that the box projection keeps every entry inside [-eta, eta]."""
    _, obs = small_instance
    result = solve(LossSpec.quadratic(), obs, SolverConfig(lam=0.0, max_iter=100, box_projection=True, eta=1.0))
    assert np.max(np.abs(result.estimate.data)) <= 1.0


def test_early_stop(small_instance):
    """Test that a loose fixed-point tolerance stops before max_iter."""
    _, obs = small_instance
    result = solve(LossSpec.huber(KAPPA), obs, SolverConfig(lam=0.1, max_iter=5000, fixed_point_tol=1e-2))
    assert result.iterations_run < 5000
    assert result.final_fixed_point_residual <= 1e-2


def test_argument_errors(small_instance):
    """Test the absolute-loss guard, bad init shapes and bad schedules."""
    _, obs = small_instance
    with pytest.raises(ArgumentError):
        solve(LossSpec.absolute(), obs, SolverConfig())
    with pytest.raises(DimensionError):
        solve(LossSpec.huber(KAPPA), obs, SolverConfig(), init=np.zeros((5, 6)))
    with pytest.raises(ArgumentError):
        solve_absolute(obs, SolverConfig(), smoothing_kappa_schedule=[0.1, 0.3])
    with pytest.raises(ArgumentError):
        solve_absolute(obs, SolverConfig(), smoothing_kappa_schedule=[])


def test_fixed_point_residual_shrinks_with_iterations(small_instance):
    """Test that a longer run ends closer to a fixed point."""
    _, obs = small_instance
    spec = LossSpec.huber(KAPPA)
    short = solve(spec, obs, SolverConfig(lam=0.1, max_iter=200))
    long = solve(spec, obs, SolverConfig(lam=0.1, max_iter=4000))
    assert long.final_fixed_point_residual <= short.final_fixed_point_residual + 1e-9


def test_objective_matches_long_proximal_gradient_reference(small_instance):
    """Test the APG objective against plain proximal gradient with the exact Lipschitz step."""
    _, obs = small_instance
    spec, lam = LossSpec.huber(KAPPA), 0.1
    result = solve(spec, obs, SolverConfig(lam=lam, max_iter=5000, bt_tolerance=1e-12))

    # the Huber second derivative is at most 2
    step = obs.n / (2.0 * obs.counts().max())
    b = np.zeros(obs.shape)
    for _ in range(50000):
        b = prox_nuclear(b - step * risk_gradient(spec, obs, b), step * lam)
    reference = objective(spec, obs, b, lam)

    assert objective(spec, obs, result.estimate, lam) == pytest.approx(reference, abs=1e-5)


def test_fixed_point_residual_tail_stays_small(small_instance):
    """Test that residuals over the last iterations stay below the early residual and a small bound."""
    _, obs = small_instance
    spec = LossSpec.huber(KAPPA)
    config = SolverConfig(lam=0.1, bt_tolerance=1e-10)
    early = solve(spec, obs, config.model_copy(update={"max_iter": 20}))
    tail = [solve(spec, obs, config.model_copy(update={"max_iter": t}))
            for t in range(1800, 2001, 40)]
    scale = 1.0 + np.linalg.norm(tail[-1].estimate.data)
    worst = max(r.final_fixed_point_residual for r in tail)
    assert worst <= early.final_fixed_point_residual + 1e-9
    assert worst <= 1e-3 * scale
