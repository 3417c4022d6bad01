"""
Theoretical quantities: norms and semi-norms, tuning levels, oracle rates,
margin constants, weak-sparsity bounds and a Monte-Carlo check of the
spectral tail bound for Rademacher-weighted mask sums.
"""

import math
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .config import LossSpec, NoiseModel
from .errors import ArgumentError, AssumptionWarning, DimensionError, NumericError
from .losses import loss_value
from .model import make_rng
from .prox import svd

# psi_2 Orlicz norm of a Rademacher variable
RADEMACHER_PSI2_NORM = math.sqrt(1.0 / math.log(2.0))

MARGIN_GRID_POINTS = 10_000
QUADRATURE_TOL = 1e-8


def _singular_values(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise NumericError("matrix contains non-finite entries")
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def nuclear_norm(A: np.ndarray) -> float:
    return float(np.sum(_singular_values(A)))


def frobenius_norm(A: np.ndarray) -> float:
    return float(np.sqrt(np.sum(_singular_values(A) ** 2)))


def spectral_norm(A: np.ndarray) -> float:
    s = _singular_values(A)
    return float(s[0]) if s.size else 0.0


# ---------------------------------------------------------------------------
# Active / non-active decomposition and the two semi-norms
# ---------------------------------------------------------------------------


@dataclass
class ActiveDecomposition:
    """Split B = B+ + B- at singular index s."""

    s: int
    p_plus: np.ndarray
    q_plus: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray

    @property
    def row_projector(self) -> np.ndarray:
        return self.p_plus @ self.p_plus.T

    @property
    def col_projector(self) -> np.ndarray:
        return self.q_plus @ self.q_plus.T


def decompose_active(B: np.ndarray, s: int) -> ActiveDecomposition:
    """
    Split B into its top-s singular part B+ and the remainder B-.

    Args:
        B: Matrix of shape (p, q)
        s: Number of active singular values, 1 <= s <= min(p, q)

    Returns:
        ActiveDecomposition with orthonormal P+, Q+
    """
    B = np.asarray(B, dtype=np.float64)
    if not 1 <= s <= min(B.shape):
        raise ArgumentError(f"s must lie in [1, {min(B.shape)}], got {s}")
    factors = svd(B)
    p_plus = factors.u[:, :s]
    q_plus = factors.vt[:s].T
    b_plus = (p_plus * factors.singular_values[:s]) @ q_plus.T
    return ActiveDecomposition(s=s, p_plus=p_plus, q_plus=q_plus, b_plus=b_plus, b_minus=B - b_plus)


def _check_dims(dec: ActiveDecomposition, Bp: np.ndarray) -> np.ndarray:
    Bp = np.asarray(Bp, dtype=np.float64)
    if Bp.shape != dec.b_plus.shape:
        raise DimensionError(f"shape {Bp.shape} does not match decomposition {dec.b_plus.shape}")
    return Bp


def omega_plus(dec: ActiveDecomposition, Bp: np.ndarray) -> float:
    """sqrt(s) (||P+P+' B'||_F + ||B' Q+Q+'||_F + ||P+P+' B' Q+Q+'||_F)."""
    Bp = _check_dims(dec, Bp)
    left = dec.p_plus @ (dec.p_plus.T @ Bp)
    right = (Bp @ dec.q_plus) @ dec.q_plus.T
    both = dec.p_plus @ (dec.p_plus.T @ Bp @ dec.q_plus) @ dec.q_plus.T
    total = np.linalg.norm(left) + np.linalg.norm(right) + np.linalg.norm(both)
    return float(math.sqrt(dec.s) * total)


def omega_minus(dec: ActiveDecomposition, Bp: np.ndarray) -> float:
    """||(I - P+P+') B' (I - Q+Q+')||_nuclear."""
    Bp = _check_dims(dec, Bp)
    residual = Bp - dec.p_plus @ (dec.p_plus.T @ Bp)
    residual = residual - (residual @ dec.q_plus) @ dec.q_plus.T
    return nuclear_norm(residual)


class InequalityCheck(NamedTuple):
    passed: bool
    slack: float
    lhs: float
    rhs: float


def _inequality(lhs: float, rhs: float, tol: float) -> InequalityCheck:
    slack = rhs - lhs
    return InequalityCheck(passed=slack >= -tol, slack=slack, lhs=lhs, rhs=rhs)


def check_triangle_property(dec: ActiveDecomposition, Bp: np.ndarray, tol: float = 1e-9) -> InequalityCheck:
    """||B+||_* - ||B'||_* <= Omega+(B' - B+) - Omega-(B')."""
    Bp = _check_dims(dec, Bp)
    lhs = nuclear_norm(dec.b_plus) - nuclear_norm(Bp)
    rhs = omega_plus(dec, Bp - dec.b_plus) - omega_minus(dec, Bp)
    return _inequality(lhs, rhs, tol)


def check_extended_triangle(B: np.ndarray, Bp: np.ndarray, s: int, tol: float = 1e-9) -> InequalityCheck:
    """||B||_* - ||B'||_* <= Omega+(B' - B) - Omega-(B' - B) + 2 ||B-||_*, semi-norms at B+."""
    dec = decompose_active(B, s)
    Bp = _check_dims(dec, Bp)
    diff = Bp - np.asarray(B, dtype=np.float64)
    lhs = nuclear_norm(B) - nuclear_norm(Bp)
    rhs = omega_plus(dec, diff) - omega_minus(dec, diff) + 2.0 * nuclear_norm(dec.b_minus)
    return _inequality(lhs, rhs, tol)


def check_hoelder(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> InequalityCheck:
    """trace(A'B) <= Lambda_max(A) ||B||_nuclear."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"shapes {A.shape} and {B.shape} differ")
    lhs = float(np.sum(A * B))
    rhs = spectral_norm(A) * nuclear_norm(B)
    return _inequality(lhs, rhs, tol * max(1.0, abs(rhs)))


def check_norm_sandwich(A: np.ndarray, tol: float = 1e-9) -> InequalityCheck:
    """||A||_F <= ||A||_* <= sqrt(rank A) ||A||_F; reports the tighter of the two slacks."""
    s = _singular_values(A)
    fro = float(np.sqrt(np.sum(s ** 2)))
    nuc = float(np.sum(s))
    rank = int(np.sum(s > (s[0] if s.size else 0.0) * max(np.asarray(A).shape) * np.finfo(float).eps))
    lower = _inequality(fro, nuc, tol * max(1.0, nuc))
    upper = _inequality(nuc, math.sqrt(rank) * fro, tol * max(1.0, nuc))
    return lower if lower.slack <= upper.slack else upper


def check_projection_contraction(P: np.ndarray, A: np.ndarray, tol: float = 1e-9) -> InequalityCheck:
    """||P P' A||_F <= ||A||_F for P with orthonormal columns."""
    projected = np.linalg.norm(P @ (P.T @ A))
    return _inequality(float(projected), float(np.linalg.norm(A)), tol)


# ---------------------------------------------------------------------------
# Tuning levels and rates
# ---------------------------------------------------------------------------


@dataclass
class TuningLevels:
    lambda_eps: float
    lambda_star: float
    c0: float


def _noise_level_core(p: int, q: int, n: int, c0: float) -> float:
    if p < 1 or q < 1 or n < 1:
        raise ArgumentError(f"p, q and n must be positive, got p={p}, q={q}, n={n}")
    log_pq = math.log(p + q)
    return (8.0 * c0 + math.sqrt(2.0)) * math.sqrt(log_pq / (n * q)) + 8.0 * c0 * math.sqrt(
        math.log(1.0 + q)
    ) * log_pq / n


def lambda_eps_huber(p: int, q: int, n: int, kappa: float, c0: float = 1.0, eta: float = 10.0) -> TuningLevels:
    """Noise level and lambda_* for the Huber estimator."""
    lam_eps = 4.0 * kappa * _noise_level_core(p, q, n, c0)
    lam_star = 16.0 * eta * kappa * p * math.log(p + q) / (3.0 * n) + lam_eps
    return TuningLevels(lambda_eps=lam_eps, lambda_star=lam_star, c0=c0)


def lambda_eps_absolute(p: int, q: int, n: int, c0: float = 1.0, eta: float = 10.0) -> TuningLevels:
    """Noise level and lambda_* for the absolute-value estimator."""
    lam_eps = 2.0 * _noise_level_core(p, q, n, c0)
    lam_star = 8.0 * eta * p * math.log(p + q) / (3.0 * n) + lam_eps
    return TuningLevels(lambda_eps=lam_eps, lambda_star=lam_star, c0=c0)


def oracle_rate_sharp(p: int, q: int, n: int, s0: int, kappa: float, c1: float = 1.0) -> float:
    """kappa^2 C1^4 p^2 q s0 log(p+q) / n (O_P constant taken as 1)."""
    return kappa ** 2 * c1 ** 4 * p ** 2 * q * s0 * math.log(p + q) / n


def oracle_rate_nonsharp(p: int, q: int, n: int, s0: int, c2: float = 1.0) -> float:
    """C2^4 p^2 q s0 log(p+q) / n."""
    return c2 ** 4 * p ** 2 * q * s0 * math.log(p + q) / n


def rho_r(singular_values: Sequence[float], r: float) -> float:
    """rho_r^r = sum_k Lambda_k^r with the convention 0^r = 0."""
    s = np.asarray(singular_values, dtype=np.float64)
    s = s[s > 0]
    return float(np.sum(s ** r))


def oracle_rate_weak_sharp(p: int, q: int, n: int, r: float, rho_r_r: float, kappa: float, c1: float = 1.0) -> float:
    """(kappa^2 C1^4 p^2 q log(p+q) / n)^(1-r) rho_r^r for approximately low-rank truths."""
    return (kappa ** 2 * c1 ** 4 * p ** 2 * q * math.log(p + q) / n) ** (1.0 - r) * rho_r_r


def oracle_rate_weak_nonsharp(p: int, q: int, n: int, r: float, rho_r_r: float) -> float:
    """(p^2 q log(p+q) / n)^(1-r) rho_r^r."""
    return (p ** 2 * q * math.log(p + q) / n) ** (1.0 - r) * rho_r_r


class WeakSparsityBounds(NamedTuple):
    nuclear_tail_bound: float
    s_bound: float
    actual_tail: float
    actual_s: int
    rho_r_r: float

    @property
    def holds(self) -> bool:
        tol = 1e-9 * max(1.0, self.rho_r_r)
        return self.actual_tail <= self.nuclear_tail_bound + tol and self.actual_s <= self.s_bound + tol


def weak_sparsity_bounds(singular_values: Sequence[float], r: float, sigma: float) -> WeakSparsityBounds:
    """
    Bounds on the non-active tail and active count when s = #{Lambda_k > sigma}.

    Args:
        singular_values: Spectrum of the matrix
        r: Exponent in (0, 1)
        sigma: Threshold > 0

    Returns:
        Bounds sigma^(1-r) rho_r^r and sigma^(-r) rho_r^r with the actual values
    """
    if not 0.0 < r < 1.0:
        raise ArgumentError(f"r must lie in (0, 1), got {r}")
    if not sigma > 0:
        raise ArgumentError(f"sigma must be positive, got {sigma}")
    s = np.sort(np.abs(np.asarray(singular_values, dtype=np.float64)))[::-1]
    rr = rho_r(s, r)
    active = s > sigma
    return WeakSparsityBounds(
        nuclear_tail_bound=sigma ** (1.0 - r) * rr,
        s_bound=sigma ** (-r) * rr,
        actual_tail=float(np.sum(s[~active])),
        actual_s=int(np.sum(active)),
        rho_r_r=rr,
    )


# ---------------------------------------------------------------------------
# Margin constants
# ---------------------------------------------------------------------------


@dataclass
class MarginConstants:
    c1: float
    c2: float
    kappa_within_eta: bool


def _distribution(noise):
    if isinstance(noise, NoiseModel):
        return noise.distribution()
    return noise


def interval_probability(dist, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """F(hi) - F(lo), using survival functions on the right tail to avoid cancellation."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    right = lo >= 0
    return np.where(right, dist.sf(lo) - dist.sf(hi), dist.cdf(hi) - dist.cdf(lo))


def margin_constant_c1(noise: Union[NoiseModel, object], kappa: float, eta: float,
                       grid_points: int = MARGIN_GRID_POINTS) -> float:
    """
    C1 = 1 / sqrt(min_{|u| <= eta} F(u + kappa) - F(u - kappa)).

    Warns with AssumptionWarning when kappa > eta.
    """
    if not kappa > 0 or not eta > 0:
        raise ArgumentError(f"kappa and eta must be positive, got kappa={kappa}, eta={eta}")
    if kappa > eta:
        warnings.warn(f"kappa={kappa} exceeds eta={eta}; the margin assumption needs kappa <= eta",
                      AssumptionWarning, stacklevel=2)
    dist = _distribution(noise)
    u = np.linspace(-eta, eta, grid_points)
    mass = interval_probability(dist, u - kappa, u + kappa)
    smallest = float(np.min(mass))
    if not smallest > 0:
        raise NumericError(f"interval mass underflows to {smallest} on |u| <= {eta}")
    return 1.0 / math.sqrt(smallest)


def margin_constant_c2(noise: Union[NoiseModel, object], eta: float,
                       grid_points: int = MARGIN_GRID_POINTS) -> float:
    """C2 = 1 / sqrt(min_{|u| <= 2 eta} f(u))."""
    if not eta > 0:
        raise ArgumentError(f"eta must be positive, got {eta}")
    dist = _distribution(noise)
    u = np.linspace(-2.0 * eta, 2.0 * eta, grid_points)
    smallest = float(np.min(dist.pdf(u)))
    if not smallest > 0:
        raise NumericError(f"density vanishes on |u| <= {2 * eta}")
    return 1.0 / math.sqrt(smallest)


def margin_constants(noise: NoiseModel, kappa: float, eta: float) -> MarginConstants:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionWarning)
        c1 = margin_constant_c1(noise, kappa, eta)
    return MarginConstants(c1=c1, c2=margin_constant_c2(noise, eta), kappa_within_eta=kappa <= eta)


def huber_risk_second_derivative(noise: Union[NoiseModel, object], kappa: float, b):
    """r''(b) = 2 (F(b + kappa) - F(b - kappa)) for the one-cell Huber risk."""
    dist = _distribution(noise)
    out = 2.0 * interval_probability(dist, np.asarray(b, dtype=float) - kappa, np.asarray(b, dtype=float) + kappa)
    return float(out) if np.ndim(b) == 0 else out


def one_cell_huber_risk(noise: Union[NoiseModel, object], kappa: float, b: float) -> float:
    """r(b) = E rho_H(eps - b), integrated piecewise around the Huber knots."""
    dist = _distribution(noise)
    spec = LossSpec.huber(kappa)

    def integrand(e: float) -> float:
        return loss_value(spec, e - b) * dist.pdf(e)

    pieces = [(-np.inf, b - kappa), (b - kappa, b + kappa), (b + kappa, np.inf)]
    total = 0.0
    for lo, hi in pieces:
        value, _ = integrate.quad(integrand, lo, hi, epsabs=QUADRATURE_TOL * 1e-4, epsrel=QUADRATURE_TOL * 1e-4,
                                  limit=200)
        total += value
    return float(total)


# ---------------------------------------------------------------------------
# Monte-Carlo check of the spectral tail bound
# ---------------------------------------------------------------------------


def tail_bound_envelope(p: int, q: int, n: int) -> float:
    """sqrt(log(p+q)/(nq)) + sqrt(log(q+1)) log(p+q)/n."""
    return math.sqrt(math.log(p + q) / (n * q)) + math.sqrt(math.log(q + 1)) * math.log(p + q) / n


@dataclass
class MonteCarloResult:
    mean: float
    stderr: float
    values: List[float]
    envelope: float

    @property
    def ratio(self) -> float:
        return self.mean / self.envelope

    @property
    def coefficient_of_variation(self) -> float:
        if len(self.values) < 2 or self.mean == 0:
            return 0.0
        return float(np.std(self.values, ddof=1) / self.mean)


def _rademacher_rep(p: int, q: int, n: int, seed_seq: np.random.SeedSequence) -> float:
    rng = make_rng(seed_seq)
    cells = rng.integers(0, p * q, size=n)
    signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
    rows, cols = np.divmod(cells, q)
    acc = sp.coo_matrix((signs, (rows, cols)), shape=(p, q)).tocsr()
    return spectral_norm(acc.toarray()) / n


def rademacher_lambda_max_mc(p: int, q: int, n: int, reps: int, seed: int,
                             jobs: Optional[int] = 1) -> MonteCarloResult:
    """
    Mean of Lambda_max(sum_i eps_i X_i) / n over ``reps`` independent draws.

    Each replicate uses its own spawned seed; the mean is reduced in replicate order.
    """
    if p < 1 or q < 1 or n < 1 or reps < 1:
        raise ArgumentError(f"p, q, n and reps must be positive, got {(p, q, n, reps)}")
    from .worker import ReplicatePool

    seeds = np.random.SeedSequence(seed).spawn(reps)
    pool = ReplicatePool(max_workers=jobs)
    jobs_done = pool.run_all([{"seed_seq": s} for s in seeds], lambda job: _rademacher_rep(p, q, n, job["seed_seq"]))
    failed = [j for j in jobs_done if j.error is not None]
    if failed:
        raise NumericError(f"Monte-Carlo replicate failed: {failed[0].error}")
    values = [float(j.result) for j in jobs_done]
    stderr = float(np.std(values, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return MonteCarloResult(mean=float(np.mean(values)), stderr=stderr, values=values,
                            envelope=tail_bound_envelope(p, q, n))
