"""
Randomized invariant suites behind the ``theory-check`` and ``prox-check`` commands.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .config import LossSpec
from .losses import empirical_risk, risk_gradient
from .model import ObservationSet, make_rng
from .prox import prox_nuclear, soft_threshold
from .theory import (
    InequalityCheck,
    check_extended_triangle,
    check_hoelder,
    check_norm_sandwich,
    check_projection_contraction,
    check_triangle_property,
    decompose_active,
    nuclear_norm,
    omega_plus,
    weak_sparsity_bounds,
)

logger = logging.getLogger(__name__)

SLACK_TOL = 1e-9
PROX_GAMMAS = (0.0, 0.1, 1.0, 10.0)


@dataclass
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst_slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _random_low_rank(rng: np.random.Generator, p: int, q: int, rank: int) -> np.ndarray:
    return rng.standard_normal((p, rank)) @ rng.standard_normal((rank, q))


def _random_shape(rng: np.random.Generator):
    return int(rng.integers(2, 9)), int(rng.integers(2, 9))


def _run(name: str, trials: int, rng: np.random.Generator,
         trial: Callable[[np.random.Generator], InequalityCheck]) -> SuiteResult:
    violations = 0
    worst = np.inf
    for _ in range(trials):
        check = trial(rng)
        worst = min(worst, check.slack)
        if check.slack < -SLACK_TOL:
            violations += 1
    logger.debug("%s: trials=%d violations=%d worst_slack=%.3g", name, trials, violations, worst)
    return SuiteResult(name=name, trials=trials, violations=violations, worst_slack=float(worst))


def _triangle(rng):
    p, q = _random_shape(rng)
    s = int(rng.integers(1, min(p, q) + 1))
    dec = decompose_active(rng.standard_normal((p, q)), s)
    return check_triangle_property(dec, rng.standard_normal((p, q)), tol=SLACK_TOL)


def _extended_triangle(rng):
    p, q = _random_shape(rng)
    s = int(rng.integers(1, min(p, q) + 1))
    return check_extended_triangle(rng.standard_normal((p, q)), rng.standard_normal((p, q)), s, tol=SLACK_TOL)


def _sandwich(rng):
    p, q = _random_shape(rng)
    rank = int(rng.integers(1, min(p, q) + 1))
    return check_norm_sandwich(_random_low_rank(rng, p, q, rank), tol=SLACK_TOL)


def _contraction(rng):
    p, q = _random_shape(rng)
    k = int(rng.integers(1, p + 1))
    basis, _ = np.linalg.qr(rng.standard_normal((p, k)))
    return check_projection_contraction(basis, rng.standard_normal((p, q)), tol=SLACK_TOL)


def _hoelder(rng):
    p, q = _random_shape(rng)
    return check_hoelder(rng.standard_normal((p, q)), rng.standard_normal((p, q)), tol=SLACK_TOL)


def _omega_plus_of_tail(rng):
    p, q = _random_shape(rng)
    s = int(rng.integers(1, min(p, q) + 1))
    dec = decompose_active(rng.standard_normal((p, q)), s)
    value = omega_plus(dec, dec.b_minus)
    return InequalityCheck(passed=value <= SLACK_TOL, slack=-value, lhs=value, rhs=0.0)


def _weak_sparsity(rng):
    spectrum = np.sort(rng.exponential(1.0, size=int(rng.integers(1, 10))))[::-1]
    bounds = weak_sparsity_bounds(spectrum, r=float(rng.uniform(0.05, 0.95)),
                                  sigma=float(rng.uniform(0.05, 2.0)))
    slack = min(bounds.nuclear_tail_bound - bounds.actual_tail, bounds.s_bound - bounds.actual_s)
    return InequalityCheck(passed=bounds.holds, slack=slack, lhs=bounds.actual_tail, rhs=bounds.nuclear_tail_bound)


THEORY_SUITES = [
    ("triangle-property", _triangle),
    ("extended-triangle", _extended_triangle),
    ("norm-sandwich", _sandwich),
    ("projection-contraction", _contraction),
    ("hoelder", _hoelder),
    ("omega-plus-of-tail", _omega_plus_of_tail),
    ("weak-sparsity", _weak_sparsity),
]


def run_theory_suites(trials: int = 1000, seed: int = 0) -> List[SuiteResult]:
    """
    Run every norm and semi-norm inequality on ``trials`` random instances each.

    Args:
        trials: Instances per suite
        seed: Base seed; each suite gets its own spawned stream

    Returns:
        One SuiteResult per suite
    """
    streams = np.random.SeedSequence(seed).spawn(len(THEORY_SUITES))
    return [_run(name, trials, make_rng(stream), fn) for (name, fn), stream in zip(THEORY_SUITES, streams)]


def _prox_objective(B: np.ndarray, W: np.ndarray, gamma: float) -> float:
    return gamma * nuclear_norm(B) + 0.5 * float(np.sum((B - W) ** 2))


def _prox_trial(rng, perturbations: int = 50):
    W = rng.standard_normal((10, 8)) * 3.0
    worst = np.inf
    for gamma in PROX_GAMMAS:
        B = prox_nuclear(W, gamma)
        expected = soft_threshold(np.linalg.svd(W, compute_uv=False), gamma)
        actual = np.linalg.svd(B, compute_uv=False)
        worst = min(worst, 1e-8 - float(np.max(np.abs(actual - expected))) + SLACK_TOL)
        base = _prox_objective(B, W, gamma)
        for _ in range(perturbations):
            other = B + 1e-2 * rng.standard_normal(B.shape)
            worst = min(worst, _prox_objective(other, W, gamma) - base)
    return InequalityCheck(passed=worst >= -SLACK_TOL, slack=worst, lhs=0.0, rhs=worst)


def _gradient_trial(rng, h: float = 1e-6):
    p, q, n = 6, 5, 20
    cells = rng.integers(0, p * q, size=n)
    rows, cols = np.divmod(cells, q)
    obs = ObservationSet(rows, cols, 3.0 * rng.standard_normal(n), p, q)
    spec = LossSpec.huber(1.345)
    B = rng.standard_normal((p, q))
    grad = risk_gradient(spec, obs, B)
    numeric = np.zeros_like(B)
    for i in range(p):
        for j in range(q):
            step = np.zeros_like(B)
            step[i, j] = h
            numeric[i, j] = (empirical_risk(spec, obs, B + step) - empirical_risk(spec, obs, B - step)) / (2 * h)
    err = float(np.max(np.abs(grad - numeric)))
    return InequalityCheck(passed=err <= 1e-5, slack=1e-5 - err + SLACK_TOL, lhs=err, rhs=1e-5)


def run_prox_suites(trials: int = 100, seed: int = 0, gradient_trials: int = 20) -> List[SuiteResult]:
    """Prox optimality on 10 x 8 matrices and Huber gradient against central differences."""
    prox_stream, grad_stream = np.random.SeedSequence(seed).spawn(2)
    return [
        _run("prox-nuclear", trials, make_rng(prox_stream), _prox_trial),
        _run("huber-gradient", gradient_trials, make_rng(grad_stream), _gradient_trial),
    ]
