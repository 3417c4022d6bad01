"""
Uniform-sampling trace regression model: low-rank truths, observations and corruptions.

Observations are stored as parallel index/value arrays; a mask X_i with a single
unit entry at (row, col) is represented by that pair of indices.
"""

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .config import CorruptionModel, NoiseModel
from .errors import ArgumentError, DimensionError

RNG_NAME = "PCG64"


def make_rng(seed: Union[int, np.random.SeedSequence]) -> np.random.Generator:
    """Seeded generator used everywhere in the package."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Sampled (row, col, value) triples of a p x q matrix; duplicates allowed."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.p < 1 or self.q < 1:
            raise DimensionError(f"dimensions must be positive, got p={self.p}, q={self.q}")
        if not (len(rows) == len(cols) == len(values)):
            raise DimensionError("rows, cols and values must have equal length")
        if len(rows) and (rows.min() < 0 or rows.max() >= self.p):
            raise DimensionError(f"row index out of range [0, {self.p})")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.q):
            raise DimensionError(f"column index out of range [0, {self.q})")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_entries(cls, entries: Iterable[Tuple[int, int, float]], p: int, q: int) -> "ObservationSet":
        entries = list(entries)
        if not entries:
            return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), p, q)
        rows, cols, values = zip(*entries)
        return cls(np.array(rows), np.array(cols), np.array(values, dtype=float), p, q)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.p, self.q)

    @property
    def flat_index(self) -> np.ndarray:
        return self.rows * self.q + self.cols

    def entries(self) -> Iterator[Tuple[int, int, float]]:
        for r, c, v in zip(self.rows, self.cols, self.values):
            yield int(r), int(c), float(v)

    def subset(self, index: np.ndarray) -> "ObservationSet":
        return ObservationSet(self.rows[index], self.cols[index], self.values[index], self.p, self.q)

    def with_values(self, values: np.ndarray) -> "ObservationSet":
        return ObservationSet(self.rows, self.cols, values, self.p, self.q)

    def counts(self) -> np.ndarray:
        """Number of samples per cell."""
        return np.bincount(self.flat_index, minlength=self.p * self.q).reshape(self.p, self.q)

    def to_sparse(self) -> sp.csr_matrix:
        """Sum of value_i * X_i^T as a sparse p x q matrix (duplicates summed)."""
        return sp.coo_matrix((self.values, (self.rows, self.cols)), shape=self.shape).tocsr()

    def to_dense(self) -> np.ndarray:
        """Observed-entry matrix: mean of the samples per cell, zero elsewhere."""
        sums = np.bincount(self.flat_index, weights=self.values, minlength=self.p * self.q)
        counts = np.bincount(self.flat_index, minlength=self.p * self.q)
        dense = np.zeros(self.p * self.q)
        seen = counts > 0
        dense[seen] = sums[seen] / counts[seen]
        return dense.reshape(self.p, self.q)


@dataclass
class ParameterMatrix:
    """Dense p x q parameter with box bound eta."""

    data: np.ndarray
    eta: float = 10.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionError(f"parameter must be a matrix, got shape {self.data.shape}")
        if not self.eta > 0:
            raise ArgumentError(f"eta must be positive, got {self.eta}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def projected(self) -> "ParameterMatrix":
        return ParameterMatrix(np.clip(self.data, -self.eta, self.eta), self.eta)


@dataclass
class GroundTruth:
    """Low-rank target B0 of a simulation."""

    b_star: ParameterMatrix
    rank: int
    seed: Optional[int] = field(default=None)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.b_star.shape


def as_array(B: Union[ParameterMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(B, ParameterMatrix):
        return B.data
    return np.asarray(B, dtype=np.float64)


def check_shape(obs: ObservationSet, B: np.ndarray):
    if B.shape != obs.shape:
        raise DimensionError(f"matrix shape {B.shape} does not match observations {obs.shape}")


def generate_low_rank(p: int, q: int, s0: int, eta: float, seed: int) -> GroundTruth:
    """
    Generate B0 = U V^T with Gaussian factors, rescaled to max |entry| = eta / 2.

    Args:
        p: Number of rows
        q: Number of columns
        s0: Rank of the truth, 1 <= s0 <= min(p, q)
        eta: Box bound of the parameter space
        seed: Seed of the factor draws

    Returns:
        GroundTruth with numerical rank s0
    """
    if p < 1 or q < 1 or not 1 <= s0 <= min(p, q):
        raise DimensionError(f"invalid dimensions p={p}, q={q}, s0={s0}")
    if not eta > 0:
        raise ArgumentError(f"eta must be positive, got {eta}")

    rng = make_rng(seed)
    u = rng.standard_normal((p, s0))
    v = rng.standard_normal((q, s0))
    b = u @ v.T
    b *= (eta / 2.0) / np.max(np.abs(b))
    return GroundTruth(b_star=ParameterMatrix(b, eta), rank=s0, seed=seed)


def sample_uniform(
    truth: GroundTruth,
    n: int,
    noise: NoiseModel,
    seed: int,
    exhaustive: bool = False,
) -> ObservationSet:
    """
    Draw n observations Y_i = B0[row, col] + eps_i with cells uniform over the grid.

    Masks and noise come from two streams spawned from (seed, noise.seed), so the
    same seed pair always reproduces the same set. With ``exhaustive`` every cell
    is observed exactly once in row-major order (requires n == p * q).
    """
    if n <= 0:
        raise ArgumentError(f"n must be positive, got {n}")
    p, q = truth.shape
    mask_seq, noise_seq = np.random.SeedSequence([seed, noise.seed]).spawn(2)

    if exhaustive:
        if n != p * q:
            raise ArgumentError(f"exhaustive sampling requires n == p*q == {p * q}, got {n}")
        cells = np.arange(p * q)
    else:
        cells = make_rng(mask_seq).integers(0, p * q, size=n)
    rows, cols = np.divmod(cells, q)

    eps = noise.sample(make_rng(noise_seq), n)
    values = truth.b_star.data[rows, cols] + eps
    return ObservationSet(rows, cols, values, p, q)


def corrupt(obs: ObservationSet, model: CorruptionModel) -> ObservationSet:
    """
    Add +/- magnitude to round(fraction * n) observations chosen without replacement.

    Args:
        obs: Observations to corrupt
        model: Corruption fraction, magnitude and seed

    Returns:
        New ObservationSet; the input is left unchanged
    """
    if not 0.0 <= model.fraction <= 1.0:
        raise ArgumentError(f"fraction must lie in [0, 1], got {model.fraction}")
    if model.magnitude is None:
        raise ArgumentError("corruption magnitude is not set")

    k = int(np.floor(model.fraction * obs.n + 0.5))
    if k == 0:
        return obs
    rng = make_rng(model.seed)
    index = rng.choice(obs.n, size=k, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    values = obs.values.copy()
    values[index] += model.magnitude * signs
    return obs.with_values(values)
