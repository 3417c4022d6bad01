"""
Configuration schemas for noise, corruption, losses, the solver and experiments.

All schemas are frozen pydantic models so they can be shared between worker
threads and echoed verbatim into reports via ``model_dump()``.
"""

import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from .errors import ArgumentError


class _FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class NoiseModel(_FrozenModel):
    """Distribution of the additive errors in the trace regression model."""

    kind: Literal["gaussian", "student_t", "none"] = "gaussian"
    stddev: float = Field(1.0, gt=0)
    df: float = Field(3.0, gt=0)
    seed: int = Field(0, ge=0)

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.stddev ** 2
        if self.kind == "student_t":
            return self.df / (self.df - 2.0) if self.df > 2 else math.inf
        return 0.0

    @property
    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian:{self.stddev:g}"
        if self.kind == "student_t":
            return f"student-t:{self.df:g}"
        return "none"

    def distribution(self):
        """Frozen scipy distribution of a single error term."""
        if self.kind == "gaussian":
            return stats.norm(loc=0.0, scale=self.stddev)
        if self.kind == "student_t":
            return stats.t(df=self.df)
        raise ArgumentError("noise model 'none' has no distribution")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """
        Draw ``size`` i.i.d. errors.

        Student-t draws use the Gaussian / chi-square ratio construction.
        """
        if self.kind == "gaussian":
            return rng.normal(0.0, self.stddev, size)
        if self.kind == "student_t":
            z = rng.standard_normal(size)
            w = rng.chisquare(self.df, size)
            return z / np.sqrt(w / self.df)
        return np.zeros(size)

    @classmethod
    def parse(cls, token: str, seed: int = 0) -> "NoiseModel":
        """Parse ``gaussian[:sd]``, ``student-t:df`` or ``none``."""
        name, _, arg = token.strip().lower().partition(":")
        try:
            if name in ("gaussian", "normal"):
                return cls(kind="gaussian", stddev=float(arg) if arg else 1.0, seed=seed)
            if name in ("student-t", "student_t", "t"):
                return cls(kind="student_t", df=float(arg) if arg else 3.0, seed=seed)
        except ValueError as e:
            raise ArgumentError(f"invalid noise token '{token}': {e}") from e
        if name == "none" and not arg:
            return cls(kind="none", seed=seed)
        raise ArgumentError(f"unknown noise model '{token}'")


class CorruptionModel(_FrozenModel):
    """Sparse corruptions added on top of the noisy observations."""

    fraction: float = Field(0.05, ge=0.0, le=1.0)
    magnitude: Optional[float] = None
    seed: int = Field(0, ge=0)


class LossSpec(_FrozenModel):
    """Tagged loss choice: Huber(kappa), absolute value or quadratic."""

    kind: Literal["huber", "absolute", "quadratic"] = "huber"
    kappa: Optional[float] = None

    @model_validator(mode="after")
    def _check_kappa(self) -> "LossSpec":
        if self.kind == "huber":
            if self.kappa is None or not self.kappa > 0 or not math.isfinite(self.kappa):
                raise ValueError("Huber loss requires a finite kappa > 0")
        elif self.kappa is not None:
            raise ValueError(f"{self.kind} loss takes no kappa")
        return self

    @classmethod
    def huber(cls, kappa: float = 1.345) -> "LossSpec":
        return cls(kind="huber", kappa=kappa)

    @classmethod
    def absolute(cls) -> "LossSpec":
        return cls(kind="absolute")

    @classmethod
    def quadratic(cls) -> "LossSpec":
        return cls(kind="quadratic")

    @property
    def is_differentiable(self) -> bool:
        return self.kind != "absolute"

    @property
    def label(self) -> str:
        return f"huber:{self.kappa:g}" if self.kind == "huber" else self.kind

    @classmethod
    def parse(cls, token: str, default_kappa: float = 1.345) -> "LossSpec":
        """Parse ``huber[:kappa]``, ``absolute`` or ``quadratic``; a bare ``huber`` takes ``default_kappa``."""
        name, _, arg = token.strip().lower().partition(":")
        if name == "huber":
            try:
                return cls.huber(float(arg) if arg else default_kappa)
            except ValueError as e:
                raise ArgumentError(f"invalid loss token '{token}': {e}") from e
        if name in ("absolute", "quadratic") and not arg:
            return cls(kind=name)
        raise ArgumentError(f"unknown loss '{token}'")

    @classmethod
    def parse_list(cls, tokens: str, default_kappa: float = 1.345) -> List["LossSpec"]:
        return [cls.parse(t, default_kappa) for t in tokens.split(",") if t.strip()]


class SolverConfig(_FrozenModel):
    """Hyperparameters of the accelerated proximal gradient solver."""

    lam: float = Field(0.0, ge=0.0)
    l_init: float = Field(0.1, gt=0.0)
    beta: float = Field(1.2, gt=1.0)
    bt_tolerance: float = Field(1e-3, ge=0.0)
    max_iter: int = Field(1000, ge=1)
    fixed_point_tol: float = Field(0.0, ge=0.0)
    box_projection: bool = False
    eta: float = Field(10.0, gt=0.0)
    max_backtracks: int = Field(500, ge=1)
    prox_max_rank: Optional[int] = Field(None, ge=1)


LambdaRule = Literal["paper_sim", "one_over_sqrt_n", "explicit"]


class ExperimentSpec(_FrozenModel):
    """Full description of a simulation study."""

    p: int = Field(30, ge=1)
    q: int = Field(30, ge=1)
    s0: int = Field(2, ge=1)
    eta: float = Field(10.0, gt=0.0)
    kappa: float = Field(1.345, gt=0.0)
    noise: NoiseModel = NoiseModel(kind="student_t", df=3.0)
    corruption: Optional[CorruptionModel] = None
    losses: List[LossSpec] = [LossSpec.huber(1.345), LossSpec.quadratic()]
    n_grid: Optional[List[int]] = None
    replicates: int = Field(25, ge=1)
    base_seed: int = Field(0, ge=0)
    lambda_rule: LambdaRule = "paper_sim"
    lambda_value: Optional[float] = Field(None, ge=0.0)
    solver: SolverConfig = SolverConfig(max_iter=1000)

    @field_validator("losses")
    @classmethod
    def _non_empty(cls, value: List[LossSpec]) -> List[LossSpec]:
        if not value:
            raise ValueError("at least one loss is required")
        return value

    @model_validator(mode="after")
    def _check_shape(self) -> "ExperimentSpec":
        if self.s0 > min(self.p, self.q):
            raise ValueError(f"s0={self.s0} exceeds min(p, q)={min(self.p, self.q)}")
        if self.n_grid is not None:
            grid = self.n_grid
            if not grid:
                raise ValueError("n_grid must not be empty")
            if any(n < 1 for n in grid):
                raise ValueError("n_grid entries must be positive")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("n_grid must be strictly ascending")
            if grid[-1] > self.p * self.q:
                raise ValueError(f"n_grid maximum {grid[-1]} exceeds p*q={self.p * self.q}")
        if self.lambda_rule == "explicit" and self.lambda_value is None:
            raise ValueError("lambda_rule 'explicit' requires lambda_value")
        return self


class RealDataSpec(_FrozenModel):
    """Settings of a ratings-file train/test run."""

    path: str
    n_train: int = Field(..., ge=1)
    kappa: float = Field(2.0, gt=0.0)
    max_iter: int = Field(6000, ge=1)
    lambda_rule: LambdaRule = "one_over_sqrt_n"
    lambda_value: Optional[float] = Field(None, ge=0.0)
    seed: int = Field(0, ge=0)
    l_init: float = Field(0.1, gt=0.0)
    beta: float = Field(1.2, gt=1.0)

    @model_validator(mode="after")
    def _check_lambda(self) -> "RealDataSpec":
        if self.lambda_rule == "paper_sim":
            raise ValueError("real-data runs use 'one_over_sqrt_n' or 'explicit'")
        if self.lambda_rule == "explicit" and self.lambda_value is None:
            raise ValueError("lambda_rule 'explicit' requires lambda_value")
        return self


def config_echo(model: BaseModel) -> Dict[str, Any]:
    """JSON-friendly dump of a configuration model."""
    return model.model_dump(mode="json")
