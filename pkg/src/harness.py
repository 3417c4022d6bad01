"""
Experiment harness: simulated error curves, the problem-size study, the
comparison with the low-rank plus sparse estimator and the ratings-file
train/test protocol. Results are written as CSV files plus metadata.json.
"""

import json
import logging
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy

from .config import (
    CorruptionModel,
    ExperimentSpec,
    LossSpec,
    RealDataSpec,
    SolverConfig,
    config_echo,
)
from .errors import ArgumentError, AssumptionWarning, NumericError
from .lrps import solve_lrps
from .metrics import (
    DISPLAY_CONSTANTS,
    CurvePoint,
    compute_error,
    fit_display_constant,
    mean_and_stderr,
    rescale_n,
    test_error,
)
from .model import RNG_NAME, ObservationSet, corrupt, generate_low_rank, sample_uniform
from .ratings import parse_ratings, split_train_test
from .solver import solve, solve_absolute
from .theory import oracle_rate_sharp
from .worker import ReplicatePool

logger = logging.getLogger(__name__)

GRID_POINTS = 10
MAX_FAILED_FRACTION = 0.1
DEFAULT_SIZES = ((30, 30), (50, 50), (80, 80))

REPLICATE_HEADER = ["p", "q", "s0", "n", "replicate", "loss", "kappa", "lambda", "error", "iterations", "seed"]
CURVE_HEADER = ["p", "q", "s0", "n", "loss", "mean_error", "stderr", "oracle_value", "scaled_oracle"]
RESCALED_HEADER = ["p", "q", "s0", "n", "rescaled_n", "loss", "mean_error", "stderr"]

# Reference test errors of the ratings experiments: n_train -> test error
REFERENCE_TABLES: Dict[str, Dict[str, Any]] = {
    "movielens-100k": {
        "n_total": 100_000,
        "kappa": 2.0,
        "max_iter": 6000,
        "rows": {25_000: 1.48, 50_000: 1.09, 75_000: 0.96},
    },
    "movielens-1m": {
        "n_total": 1_000_209,
        "kappa": 2.0,
        "max_iter": 10_000,
        "rows": {250_000: 1.01, 500_000: 0.92, 750_000: 0.84},
    },
}


# ---------------------------------------------------------------------------
# Grids and tuning parameters
# ---------------------------------------------------------------------------


def default_n_grid(p: int, q: int, s0: int, points: int = GRID_POINTS) -> List[int]:
    """
    Evenly spaced sample sizes from ceil(3 p log(p) s0) to p q, both ends included.

    Args:
        p: Number of rows
        q: Number of columns
        s0: Rank of the truth
        points: Number of grid points before deduplication

    Returns:
        Strictly ascending list of integers
    """
    low = max(1, math.ceil(3.0 * p * math.log(p) * s0))
    high = p * q
    if low > high:
        raise ArgumentError(f"grid start {low} exceeds p*q={high} for p={p}, q={q}, s0={s0}")
    grid = np.unique(np.rint(np.linspace(low, high, points)).astype(np.int64))
    return [int(n) for n in grid]


def lambda_paper_sim(p: int, q: int, n: int) -> float:
    """2 sqrt(log(p+q) / (n q))."""
    return 2.0 * math.sqrt(math.log(p + q) / (n * q))


def lambda_one_over_sqrt_n(n: int) -> float:
    return 1.0 / math.sqrt(n)


def lambda_lrps(p: int, q: int, n: int) -> Tuple[float, float]:
    """(lambda1, lambda2) = (2 sqrt(log(p+q)/(nq)), 2 log(p+q)/n)."""
    return lambda_paper_sim(p, q, n), 2.0 * math.log(p + q) / n


def resolve_lambda(rule: str, p: int, q: int, n: int, value: Optional[float] = None) -> float:
    if rule == "paper_sim":
        return lambda_paper_sim(p, q, n)
    if rule == "one_over_sqrt_n":
        return lambda_one_over_sqrt_n(n)
    if rule == "explicit":
        if value is None:
            raise ArgumentError("explicit lambda rule requires a value")
        return float(value)
    raise ArgumentError(f"unknown lambda rule '{rule}'")


# ---------------------------------------------------------------------------
# Replicate machinery
# ---------------------------------------------------------------------------


@dataclass
class ReplicateRecord:
    p: int
    q: int
    s0: int
    n: int
    replicate: int
    loss: str
    kappa: Optional[float]
    lam: float
    error: float
    iterations: int
    seed: int


@dataclass
class Estimator:
    """A named fitting routine evaluated on every (replicate, n) sample."""

    label: str
    kappa: Optional[float]
    tuning: Callable[[int], float]
    fit: Callable[[ObservationSet, int], Tuple[np.ndarray, int]]


@dataclass
class CurveResult:
    spec: ExperimentSpec
    n_grid: List[int]
    records: List[ReplicateRecord]
    points: List[CurvePoint]
    display_constants: Dict[str, float]
    excluded_replicates: List[int] = field(default_factory=list)
    corrupted: bool = False

    @property
    def labels(self) -> List[str]:
        seen: List[str] = []
        for point in self.points:
            if point.loss not in seen:
                seen.append(point.loss)
        return seen

    def series(self, label: str) -> List[CurvePoint]:
        return [pt for pt in self.points if pt.loss == label]

    def point(self, label: str, n: int) -> CurvePoint:
        for pt in self.points:
            if pt.loss == label and pt.n == n:
                return pt
        raise KeyError(f"no point for loss={label}, n={n}")


def _solver_config(spec: ExperimentSpec, lam: float) -> SolverConfig:
    return spec.solver.model_copy(update={"lam": lam, "eta": spec.eta})


def loss_estimator(spec: ExperimentSpec, loss: LossSpec) -> Estimator:
    if loss.kind == "huber" and loss.kappa > spec.eta:
        warnings.warn(f"huber kappa={loss.kappa:g} exceeds eta={spec.eta:g}; the margin assumption needs kappa <= eta",
                      AssumptionWarning, stacklevel=3)

    def tuning(n: int) -> float:
        return resolve_lambda(spec.lambda_rule, spec.p, spec.q, n, spec.lambda_value)

    def fit(obs: ObservationSet, n: int) -> Tuple[np.ndarray, int]:
        config = _solver_config(spec, tuning(n))
        if loss.kind == "absolute":
            result = solve_absolute(obs, config)
        else:
            result = solve(loss, obs, config)
        return result.estimate.data, result.iterations_run

    return Estimator(label=loss.label, kappa=loss.kappa, tuning=tuning, fit=fit)


def lrps_estimator(spec: ExperimentSpec) -> Estimator:
    def fit(obs: ObservationSet, n: int) -> Tuple[np.ndarray, int]:
        lambda1, lambda2 = lambda_lrps(spec.p, spec.q, n)
        result = solve_lrps(obs, lambda1, lambda2, _solver_config(spec, 0.0))
        # only the low-rank part is compared with the truth
        return result.l_hat.data, result.iterations_run

    return Estimator(label="lrps", kappa=None, tuning=lambda n: lambda_lrps(spec.p, spec.q, n)[0], fit=fit)


def _with_magnitude(corruption: CorruptionModel, eta: float) -> CorruptionModel:
    if corruption.magnitude is None:
        return corruption.model_copy(update={"magnitude": eta})
    return corruption


def _run_replicate(spec: ExperimentSpec, estimators: Sequence[Estimator], grid: Sequence[int],
                   corruption: Optional[CorruptionModel], replicate: int) -> List[ReplicateRecord]:
    seed = spec.base_seed + replicate
    truth = generate_low_rank(spec.p, spec.q, spec.s0, spec.eta, seed)
    records = []
    for n in grid:
        obs = sample_uniform(truth, n, spec.noise, seed)
        if corruption is not None:
            obs = corrupt(obs, corruption.model_copy(update={"seed": corruption.seed + seed}))
        for est in estimators:
            estimate, iterations = est.fit(obs, n)
            records.append(ReplicateRecord(
                p=spec.p, q=spec.q, s0=spec.s0, n=n, replicate=replicate,
                loss=est.label, kappa=est.kappa, lam=est.tuning(n),
                error=compute_error(estimate, truth.b_star), iterations=iterations, seed=seed,
            ))
    return records


def _collect(spec: ExperimentSpec, jobs: List[Any]) -> Tuple[List[ReplicateRecord], List[int]]:
    failed = []
    records: List[ReplicateRecord] = []
    for replicate, job in enumerate(jobs):
        if job.exception is None:
            records.extend(job.result)
            continue
        if not isinstance(job.exception, NumericError):
            raise job.exception
        failed.append(replicate)

    if failed:
        if len(failed) >= MAX_FAILED_FRACTION * spec.replicates:
            raise NumericError(f"{len(failed)} of {spec.replicates} replicates failed; first: "
                               f"{jobs[failed[0]].error}")
        warnings.warn(f"excluding {len(failed)} failed replicate(s) {failed}", RuntimeWarning, stacklevel=3)
    return records, failed


def display_constant(spec: ExperimentSpec, errors: Sequence[float], oracle_values: Sequence[float]) -> float:
    """Fixed display constant under the default penalty rule, least-squares fit otherwise."""
    if spec.lambda_rule == "paper_sim" and spec.noise.kind in DISPLAY_CONSTANTS:
        return DISPLAY_CONSTANTS[spec.noise.kind]
    return fit_display_constant(errors, oracle_values)


def aggregate(spec: ExperimentSpec, grid: Sequence[int], labels: Sequence[str],
              records: Sequence[ReplicateRecord]) -> Tuple[List[CurvePoint], Dict[str, float]]:
    """
    Average replicate errors per (loss, n) and attach the oracle overlay.

    Aggregation runs in (loss, n, replicate) order so results do not depend on
    the order in which replicates finished.
    """
    by_key: Dict[Tuple[str, int], List[ReplicateRecord]] = {}
    for rec in records:
        by_key.setdefault((rec.loss, rec.n), []).append(rec)

    points: List[CurvePoint] = []
    constants: Dict[str, float] = {}
    pq = spec.p * spec.q
    for label in labels:
        oracle = [oracle_rate_sharp(spec.p, spec.q, n, spec.s0, spec.kappa) / pq for n in grid]
        stats_per_n = []
        for n in grid:
            errors = [r.error for r in sorted(by_key.get((label, n), []), key=lambda r: r.replicate)]
            stats_per_n.append((mean_and_stderr(errors), len(errors)))
        means = [m for (m, _), _ in stats_per_n]
        constant = display_constant(spec, means, oracle)
        constants[label] = constant
        for n, o, ((mean, stderr), count) in zip(grid, oracle, stats_per_n):
            points.append(CurvePoint(
                n=n, loss=label, mean_error=mean, stderr=stderr, oracle_value=o,
                scaled_oracle=constant * o, replicates=count,
                excluded=spec.replicates - count,
            ))
    return points, constants


def _run_curve(spec: ExperimentSpec, estimators: List[Estimator], corruption: Optional[CorruptionModel],
               jobs: Optional[int], progress: bool) -> CurveResult:
    grid = list(spec.n_grid) if spec.n_grid is not None else default_n_grid(spec.p, spec.q, spec.s0)
    if corruption is not None:
        corruption = _with_magnitude(corruption, spec.eta)

    start = time.time()
    pool = ReplicatePool(max_workers=jobs, progress=progress, desc=f"p={spec.p} q={spec.q}")
    done = pool.run_all(
        [{"replicate": r} for r in range(spec.replicates)],
        lambda payload: _run_replicate(spec, estimators, grid, corruption, payload["replicate"]),
    )
    records, failed = _collect(spec, done)
    labels = [est.label for est in estimators]
    order = {label: i for i, label in enumerate(labels)}
    records.sort(key=lambda r: (order[r.loss], r.n, r.replicate))
    points, constants = aggregate(spec, grid, labels, records)
    logger.info("curve p=%d q=%d losses=%s finished in %.1fs", spec.p, spec.q, ",".join(labels),
                time.time() - start)
    return CurveResult(spec=spec, n_grid=grid, records=records, points=points, display_constants=constants,
                       excluded_replicates=failed, corrupted=corruption is not None)


def run_error_curve(spec: ExperimentSpec, jobs: Optional[int] = 1, progress: bool = False) -> CurveResult:
    """
    Mean estimation error against n for every loss in ``spec.losses``.

    One truth per replicate (seed base_seed + replicate) is shared across the grid.

    Args:
        spec: Experiment description
        jobs: Worker threads for the replicates
        progress: Show a progress bar

    Returns:
        CurveResult with per-replicate records and aggregated points
    """
    estimators = [loss_estimator(spec, loss) for loss in spec.losses]
    return _run_curve(spec, estimators, spec.corruption, jobs, progress)


@dataclass
class SizeStudyResult:
    curves: Dict[Tuple[int, int], CurveResult]
    rescaled: List[Dict[str, Any]]


def run_problem_size_study(base: ExperimentSpec, sizes: Sequence[Tuple[int, int]] = DEFAULT_SIZES,
                           jobs: Optional[int] = 1, progress: bool = False) -> SizeStudyResult:
    """
    Error curves for several matrix sizes, raw and against n / (3 p s0 log p).

    The grid of each size is its default grid; every other setting comes from ``base``.
    """
    curves: Dict[Tuple[int, int], CurveResult] = {}
    rescaled: List[Dict[str, Any]] = []
    for p, q in sizes:
        spec = ExperimentSpec(**{**base.model_dump(), "p": p, "q": q, "n_grid": None})
        curve = run_error_curve(spec, jobs=jobs, progress=progress)
        curves[(p, q)] = curve
        for pt in curve.points:
            rescaled.append({
                "p": p, "q": q, "s0": spec.s0, "n": pt.n, "rescaled_n": rescale_n(pt.n, p, spec.s0),
                "loss": pt.loss, "mean_error": pt.mean_error, "stderr": pt.stderr,
            })
    return SizeStudyResult(curves=curves, rescaled=rescaled)


def run_klopp_comparison(spec: ExperimentSpec, corrupted: bool, jobs: Optional[int] = 1,
                         progress: bool = False) -> CurveResult:
    """
    Huber estimator and low-rank plus sparse estimator on identical samples.

    In corrupted mode a fraction of the observations (``spec.corruption``, or 5%
    by default) is shifted by +/- eta.
    """
    corruption = None
    if corrupted:
        corruption = spec.corruption or CorruptionModel(fraction=0.05)
    estimators = [loss_estimator(spec, LossSpec.huber(spec.kappa)), lrps_estimator(spec)]
    return _run_curve(spec, estimators, corruption, jobs, progress)


# ---------------------------------------------------------------------------
# Ratings data
# ---------------------------------------------------------------------------


@dataclass
class RealDataReport:
    config: Dict[str, Any]
    p: int
    q: int
    n: int
    n_train: int
    n_test: int
    lam: float
    iterations: int
    test_error: float
    elapsed_seconds: float
    reference_table: Optional[str] = None
    reference_error: Optional[float] = None

    @property
    def relative_deviation(self) -> Optional[float]:
        if self.reference_error is None:
            return None
        return (self.test_error - self.reference_error) / self.reference_error

    def to_text(self) -> str:
        lines = [f"{key}={value}" for key, value in self.config.items()]
        values = asdict(self)
        values.pop("config")
        values["relative_deviation"] = self.relative_deviation
        lines.extend(f"{key}={value}" for key, value in values.items())
        return "\n".join(lines) + "\n"


def reference_error(n_total: int, n_train: int) -> Tuple[Optional[str], Optional[float]]:
    for name, table in REFERENCE_TABLES.items():
        if table["n_total"] == n_total and n_train in table["rows"]:
            return name, table["rows"][n_train]
    return None, None


def run_real_data(spec: RealDataSpec) -> RealDataReport:
    """
    Parse, split, fit the Huber estimator from B_obs and report the test error.

    Args:
        spec: Ratings file, training size and solver settings

    Returns:
        RealDataReport echoing the configuration
    """
    start = time.time()
    data = parse_ratings(spec.path)
    train, test = split_train_test(data.obs, spec.n_train, spec.seed)
    if test.n == 0:
        raise ArgumentError(f"n_train={spec.n_train} leaves no test ratings")

    lam = resolve_lambda(spec.lambda_rule, train.p, train.q, train.n, spec.lambda_value)
    config = SolverConfig(lam=lam, l_init=spec.l_init, beta=spec.beta, max_iter=spec.max_iter)
    result = solve(LossSpec.huber(spec.kappa), train, config, init=train.to_dense())
    error = test_error(result.estimate, test)
    table, ref = reference_error(data.obs.n, spec.n_train)
    logger.info("ratings run n_train=%d test_error=%.4f", spec.n_train, error)

    return RealDataReport(
        config=config_echo(spec), p=data.obs.p, q=data.obs.q, n=data.obs.n, n_train=train.n, n_test=test.n,
        lam=lam, iterations=result.iterations_run, test_error=error, elapsed_seconds=time.time() - start,
        reference_table=table, reference_error=ref,
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def format_float(value: Optional[float]) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if value is None:
        return ""
    return repr(float(value))


def _write_rows(rows: List[List[str]], header: List[str], path: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame = pd.DataFrame(rows, columns=header, dtype=str)
    frame.to_csv(path, index=False, lineterminator="\n")


def write_replicate_csv(records: Sequence[ReplicateRecord], path: str):
    rows = [
        [str(r.p), str(r.q), str(r.s0), str(r.n), str(r.replicate), r.loss, format_float(r.kappa),
         format_float(r.lam), format_float(r.error), str(r.iterations), str(r.seed)]
        for r in records
    ]
    _write_rows(rows, REPLICATE_HEADER, path)


def write_curve_csv(spec: ExperimentSpec, points: Sequence[CurvePoint], path: str):
    rows = [
        [str(spec.p), str(spec.q), str(spec.s0), str(pt.n), pt.loss, format_float(pt.mean_error),
         format_float(pt.stderr), format_float(pt.oracle_value), format_float(pt.scaled_oracle)]
        for pt in points
    ]
    _write_rows(rows, CURVE_HEADER, path)


def write_rescaled_csv(rescaled: Sequence[Dict[str, Any]], path: str):
    rows = [
        [str(r["p"]), str(r["q"]), str(r["s0"]), str(r["n"]), format_float(r["rescaled_n"]), r["loss"],
         format_float(r["mean_error"]), format_float(r["stderr"])]
        for r in rescaled
    ]
    _write_rows(rows, RESCALED_HEADER, path)


def write_metadata(out_dir: str, config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    metadata = {
        "config": config,
        "rng": RNG_NAME,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
    }
    if extra:
        metadata.update(extra)
    path = os.path.join(out_dir, "metadata.json")
    with open(path, "w") as f:
        json.dump(metadata, f, indent=2)
    return path


def save_curve(result: CurveResult, out_dir: str, prefix: str = "curve") -> Dict[str, str]:
    """Write per-replicate and aggregated CSVs plus metadata.json; returns the paths."""
    paths = {
        "replicates": os.path.join(out_dir, f"{prefix}_replicates.csv"),
        "curve": os.path.join(out_dir, f"{prefix}.csv"),
    }
    write_replicate_csv(result.records, paths["replicates"])
    write_curve_csv(result.spec, result.points, paths["curve"])
    paths["metadata"] = write_metadata(out_dir, config_echo(result.spec), {
        "n_grid": result.n_grid,
        "display_constants": result.display_constants,
        "excluded_replicates": result.excluded_replicates,
        "corrupted": result.corrupted,
    })
    return paths
