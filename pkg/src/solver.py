"""
Accelerated proximal gradient with backtracking for the nuclear-norm penalized
robust estimator, plus a Huber continuation for the absolute-value loss.

The iteration follows the HuberProx scheme literally:

    obj <- F(B) + lam ||B||_*
    repeat:
        B <- prox_{lam/L}(v - grad F(v) / L)
        delta <- F(B) + lam ||B||_* - obj - <grad F(B_prev), B - B_prev> - L/2 ||B - B_prev||_F^2
        L <- beta L
    until delta <= bt_tolerance
    L <- L / beta
    v <- B + t/(t+3) (B - B_prev)

so the curvature estimate L never decreases.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import LossSpec, SolverConfig
from .errors import ArgumentError, DimensionError, NumericError
from .losses import empirical_risk, risk_gradient
from .model import ObservationSet, ParameterMatrix, as_array, check_shape
from .prox import project_box, prox_nuclear_with_spectrum
from .theory import nuclear_norm

logger = logging.getLogger(__name__)

DEFAULT_KAPPA_SCHEDULE = (1.0, 0.3, 0.1, 0.03, 0.01)
LOG_EVERY = 100


class CompositeProblem:
    """Smooth part plus a prox-friendly penalty, over a flat or matrix iterate."""

    def smooth(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def prox(self, w: np.ndarray, step: float) -> Tuple[np.ndarray, float]:
        """Return argmin_x step * penalty(x) + 1/2 ||x - w||^2 and penalty(x)."""
        raise NotImplementedError

    def penalty(self, x: np.ndarray) -> float:
        raise NotImplementedError


@dataclass
class ApgRun:
    x: np.ndarray
    objective_trace: List[float]
    accepted_deltas: List[float]
    iterations: int
    curvature: float
    backtracks: int
    fixed_point_residual: float


def fixed_point_gap(problem: CompositeProblem, x: np.ndarray, curvature: float) -> float:
    """||x - prox_{1/L}(x - grad(x)/L)||."""
    target, _ = problem.prox(x - problem.gradient(x) / curvature, 1.0 / curvature)
    return float(np.linalg.norm(x - target))


def accelerated_prox_gradient(problem: CompositeProblem, x0: np.ndarray, config: SolverConfig,
                              label: str = "apg") -> ApgRun:
    """
    Run the backtracking APG loop on ``problem`` from ``x0``.

    Args:
        problem: Smooth loss and penalty
        x0: Initial iterate (copied)
        config: Step, backtracking and stopping parameters
        label: Name used in debug logs

    Returns:
        ApgRun with the final iterate and per-iteration diagnostics
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    v = x.copy()
    L = config.l_init
    obj = problem.smooth(x) + problem.penalty(x)
    if not math.isfinite(obj):
        raise NumericError("objective at the initial point is not finite", iteration=0)

    trace: List[float] = []
    deltas: List[float] = []
    total_backtracks = 0
    t = 0

    for t in range(1, config.max_iter + 1):
        x_prev = x
        grad_v = problem.gradient(v)
        grad_prev = problem.gradient(x_prev)

        backtracks = 0
        while True:
            x, pen = problem.prox(v - grad_v / L, 1.0 / L)
            f_new = problem.smooth(x)
            diff = x - x_prev
            delta = f_new + pen - obj - float(np.sum(grad_prev * diff)) - 0.5 * L * float(np.sum(diff * diff))
            if not math.isfinite(delta):
                raise NumericError(f"{label}: objective became non-finite", iteration=t)
            L *= config.beta
            if delta <= config.bt_tolerance:
                break
            backtracks += 1
            if backtracks >= config.max_backtracks:
                raise NumericError(f"{label}: backtracking did not terminate (L={L:.3g})", iteration=t)
        L /= config.beta
        total_backtracks += backtracks

        obj = f_new + pen
        trace.append(obj)
        deltas.append(delta)
        v = x + (t / (t + 3.0)) * (x - x_prev)

        if t % LOG_EVERY == 0:
            logger.debug("%s iter=%d obj=%.10g L=%.4g backtracks=%d", label, t, obj, L, total_backtracks)

        if config.fixed_point_tol > 0 and fixed_point_gap(problem, x, L) <= config.fixed_point_tol:
            logger.debug("%s converged at iter=%d", label, t)
            break

    return ApgRun(
        x=x,
        objective_trace=trace,
        accepted_deltas=deltas,
        iterations=t,
        curvature=L,
        backtracks=total_backtracks,
        fixed_point_residual=fixed_point_gap(problem, x, L),
    )


class NuclearPenalizedRisk(CompositeProblem):
    """R_n(B) + lam ||B||_* for a differentiable robust loss."""

    def __init__(self, spec: LossSpec, obs: ObservationSet, lam: float, box_eta: Optional[float] = None,
                 max_rank: Optional[int] = None):
        self.spec = spec
        self.obs = obs
        self.lam = lam
        self.box_eta = box_eta
        self.max_rank = max_rank

    def smooth(self, x: np.ndarray) -> float:
        return empirical_risk(self.spec, self.obs, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return risk_gradient(self.spec, self.obs, x)

    def prox(self, w: np.ndarray, step: float) -> Tuple[np.ndarray, float]:
        if self.lam == 0:
            b = np.array(w, dtype=np.float64, copy=True)
            if self.box_eta is not None:
                b = project_box(b, self.box_eta)
            return b, 0.0
        b, shrunk = prox_nuclear_with_spectrum(w, self.lam * step, self.max_rank)
        if self.box_eta is not None:
            b = project_box(b, self.box_eta)
            return b, self.penalty(b)
        return b, self.lam * float(np.sum(shrunk))

    def penalty(self, x: np.ndarray) -> float:
        return self.lam * nuclear_norm(x) if self.lam > 0 else 0.0


@dataclass
class SolveResult:
    estimate: ParameterMatrix
    objective_trace: List[float]
    iterations_run: int
    final_fixed_point_residual: float
    final_step_curvature: float
    accepted_deltas: List[float] = field(default_factory=list)
    backtracks: int = 0

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else math.nan


def objective(spec: LossSpec, obs: ObservationSet, B: Union[ParameterMatrix, np.ndarray], lam: float) -> float:
    """R_n(B) + lam ||B||_nuclear under any of the three losses."""
    b = as_array(B)
    return empirical_risk(spec, obs, b) + lam * nuclear_norm(b)


def _initial_matrix(obs: ObservationSet, init: Optional[Union[ParameterMatrix, np.ndarray]]) -> np.ndarray:
    if init is None:
        return np.zeros(obs.shape)
    b = as_array(init)
    check_shape(obs, b)
    return b


def solve(
    spec: LossSpec,
    obs: ObservationSet,
    config: SolverConfig,
    init: Optional[Union[ParameterMatrix, np.ndarray]] = None,
) -> SolveResult:
    """
    Minimize R_n(B) + lam ||B||_nuclear with a differentiable loss.

    Args:
        spec: Huber or quadratic loss
        obs: Observations
        config: Solver hyperparameters (lam, l_init, beta, ...)
        init: Starting matrix, zero when omitted

    Returns:
        SolveResult with the estimate and diagnostics
    """
    if not spec.is_differentiable:
        raise ArgumentError("the absolute loss is not differentiable; use solve_absolute")
    b0 = _initial_matrix(obs, init)
    problem = NuclearPenalizedRisk(
        spec, obs, config.lam,
        box_eta=config.eta if config.box_projection else None,
        max_rank=config.prox_max_rank,
    )
    run = accelerated_prox_gradient(problem, b0, config, label=spec.label)
    return SolveResult(
        estimate=ParameterMatrix(run.x, config.eta),
        objective_trace=run.objective_trace,
        iterations_run=run.iterations,
        final_fixed_point_residual=run.fixed_point_residual,
        final_step_curvature=run.curvature,
        accepted_deltas=run.accepted_deltas,
        backtracks=run.backtracks,
    )


def fixed_point_residual(
    spec: LossSpec,
    obs: ObservationSet,
    B: Union[ParameterMatrix, np.ndarray],
    lam: float,
    curvature: float,
) -> float:
    """||B - prox_{lam/curvature}(B - grad R_n(B) / curvature)||_F."""
    if not curvature > 0:
        raise ArgumentError(f"curvature must be positive, got {curvature}")
    b = as_array(B)
    if b.shape != obs.shape:
        raise DimensionError(f"matrix shape {b.shape} does not match observations {obs.shape}")
    return fixed_point_gap(NuclearPenalizedRisk(spec, obs, lam), b, curvature)


def _check_schedule(schedule: Sequence[float]) -> List[float]:
    kappas = [float(k) for k in schedule]
    if not kappas:
        raise ArgumentError("smoothing schedule must not be empty")
    if any(not (k > 0 and math.isfinite(k)) for k in kappas):
        raise ArgumentError(f"smoothing parameters must be positive and finite, got {kappas}")
    if any(b >= a for a, b in zip(kappas, kappas[1:])):
        raise ArgumentError(f"smoothing schedule must be strictly decreasing, got {kappas}")
    return kappas


def solve_absolute(
    obs: ObservationSet,
    config: SolverConfig,
    smoothing_kappa_schedule: Sequence[float] = DEFAULT_KAPPA_SCHEDULE,
    init: Optional[Union[ParameterMatrix, np.ndarray]] = None,
) -> SolveResult:
    """
    Approximate the absolute-loss estimator by Huber continuation.

    Huber(kappa) / (2 kappa) lies within kappa / 2 of |x|, so stage j minimizes
    R_n^{kappa_j}(B) + 2 kappa_j lam ||B||_* with the backtracking tolerance scaled
    the same way. Each stage is warm-started from the previous estimate and
    curvature. The objective trace and deltas are reported divided by 2 kappa_j,
    i.e. on the scale of the absolute-loss objective.
    """
    kappas = _check_schedule(smoothing_kappa_schedule)
    current = _initial_matrix(obs, init)
    l_init = config.l_init
    trace: List[float] = []
    deltas: List[float] = []
    iterations = 0
    backtracks = 0
    result: Optional[SolveResult] = None
    stage_config = config

    for kappa in kappas:
        scale = 2.0 * kappa
        stage_config = config.model_copy(update={
            "lam": scale * config.lam,
            "bt_tolerance": scale * config.bt_tolerance,
            "l_init": l_init,
        })
        result = solve(LossSpec.huber(kappa), obs, stage_config, init=current)
        logger.debug("continuation stage kappa=%g iterations=%d obj=%.10g",
                     kappa, result.iterations_run, result.final_objective / scale)
        current = result.estimate.data
        trace.extend(value / scale for value in result.objective_trace)
        deltas.extend(value / scale for value in result.accepted_deltas)
        iterations += result.iterations_run
        backtracks += result.backtracks
        l_init = result.final_step_curvature

    last_kappa = kappas[-1]
    return SolveResult(
        estimate=result.estimate,
        objective_trace=trace,
        iterations_run=iterations,
        final_fixed_point_residual=fixed_point_residual(LossSpec.huber(last_kappa), obs, current,
                                                        stage_config.lam, result.final_step_curvature),
        final_step_curvature=result.final_step_curvature / (2.0 * last_kappa),
        accepted_deltas=deltas,
        backtracks=backtracks,
    )
