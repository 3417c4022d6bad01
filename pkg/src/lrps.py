"""
Low-rank plus sparse comparison estimator.

Minimizes (1/n) sum (Y_i - (L + S)[row_i, col_i])^2 + lam1 ||L||_* + lam2 ||S||_1
with the same backtracking APG loop as the Huber estimator. S only lives on the
observed cells, since its gradient vanishes everywhere else.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .config import LossSpec, SolverConfig
from .errors import ArgumentError
from .losses import empirical_risk, risk_gradient
from .model import ObservationSet, ParameterMatrix
from .prox import project_box, prox_nuclear_with_spectrum, soft_threshold
from .solver import CompositeProblem, accelerated_prox_gradient
from .theory import nuclear_norm

logger = logging.getLogger(__name__)

_QUADRATIC = LossSpec.quadratic()


class LowRankPlusSparse(CompositeProblem):
    """Joint iterate x = [vec(L), s] where s holds S on the observed cells."""

    def __init__(self, obs: ObservationSet, lambda1: float, lambda2: float, box_eta: Optional[float] = None,
                 max_rank: Optional[int] = None):
        self.obs = obs
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.box_eta = box_eta
        self.max_rank = max_rank
        self.support, self.cell_of_entry = np.unique(obs.flat_index, return_inverse=True)
        self.size_l = obs.p * obs.q

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[: self.size_l].reshape(self.obs.shape), x[self.size_l:]

    def s_dense(self, s: np.ndarray) -> np.ndarray:
        dense = np.zeros(self.size_l)
        dense[self.support] = s
        return dense.reshape(self.obs.shape)

    def join(self, l_mat: np.ndarray, s: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(l_mat, dtype=np.float64).ravel(), s])

    def smooth(self, x: np.ndarray) -> float:
        l_mat, s = self.split(x)
        return empirical_risk(_QUADRATIC, self.obs, l_mat + self.s_dense(s))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        l_mat, s = self.split(x)
        grad = risk_gradient(_QUADRATIC, self.obs, l_mat + self.s_dense(s))
        return self.join(grad, grad.ravel()[self.support])

    def prox(self, w: np.ndarray, step: float) -> Tuple[np.ndarray, float]:
        w_l, w_s = self.split(w)
        l_mat, _ = prox_nuclear_with_spectrum(w_l, self.lambda1 * step, self.max_rank)
        s = np.asarray(soft_threshold(w_s, self.lambda2 * step))
        if self.box_eta is not None:
            l_mat = project_box(l_mat, self.box_eta)
            s = np.clip(s, -self.box_eta, self.box_eta)
        x = self.join(l_mat, s)
        return x, self.penalty(x)

    def penalty(self, x: np.ndarray) -> float:
        l_mat, s = self.split(x)
        value = self.lambda2 * float(np.sum(np.abs(s)))
        if self.lambda1 > 0:
            value += self.lambda1 * nuclear_norm(l_mat)
        return value


@dataclass
class LrpsResult:
    l_hat: ParameterMatrix
    s_hat: ParameterMatrix
    s_sparse: sp.csr_matrix
    objective_trace: List[float]
    iterations_run: int = 0
    final_fixed_point_residual: float = 0.0
    final_step_curvature: float = 0.0
    accepted_deltas: List[float] = field(default_factory=list)

    @property
    def estimate(self) -> ParameterMatrix:
        """L + S, the matrix compared against the truth."""
        return ParameterMatrix(self.l_hat.data + self.s_hat.data, self.l_hat.eta)


def lrps_objective(obs: ObservationSet, l_mat: np.ndarray, s_mat: np.ndarray, lambda1: float,
                   lambda2: float) -> float:
    l_mat = np.asarray(l_mat, dtype=np.float64)
    s_mat = np.asarray(s_mat, dtype=np.float64)
    return (empirical_risk(_QUADRATIC, obs, l_mat + s_mat) + lambda1 * nuclear_norm(l_mat)
            + lambda2 * float(np.sum(np.abs(s_mat))))


def solve_lrps(
    obs: ObservationSet,
    lambda1: float,
    lambda2: float,
    config: SolverConfig,
    init_l: Optional[np.ndarray] = None,
) -> LrpsResult:
    """
    Fit the low-rank plus sparse decomposition.

    Args:
        obs: Observations
        lambda1: Nuclear-norm weight on L
        lambda2: l1 weight on S
        config: Solver hyperparameters; ``config.lam`` is ignored
        init_l: Optional starting L (S always starts at zero)

    Returns:
        LrpsResult with dense and sparse S
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ArgumentError(f"lambda1 and lambda2 must be nonnegative, got {lambda1}, {lambda2}")
    problem = LowRankPlusSparse(
        obs, lambda1, lambda2,
        box_eta=config.eta if config.box_projection else None,
        max_rank=config.prox_max_rank,
    )
    l0 = np.zeros(obs.shape) if init_l is None else np.asarray(init_l, dtype=np.float64)
    if l0.shape != obs.shape:
        raise ArgumentError(f"init_l shape {l0.shape} does not match {obs.shape}")
    x0 = problem.join(l0, np.zeros(len(problem.support)))

    run = accelerated_prox_gradient(problem, x0, config, label="lrps")
    l_mat, s = problem.split(run.x)
    rows, cols = np.divmod(problem.support, obs.q)
    keep = s != 0
    s_sparse = sp.csr_matrix((s[keep], (rows[keep], cols[keep])), shape=obs.shape)
    logger.debug("lrps finished: iterations=%d nnz(S)=%d", run.iterations, s_sparse.nnz)

    return LrpsResult(
        l_hat=ParameterMatrix(l_mat.copy(), config.eta),
        s_hat=ParameterMatrix(problem.s_dense(s), config.eta),
        s_sparse=s_sparse,
        objective_trace=run.objective_trace,
        iterations_run=run.iterations,
        final_fixed_point_residual=run.fixed_point_residual,
        final_step_curvature=run.curvature,
        accepted_deltas=run.accepted_deltas,
    )
