"""
Command-line front end: simulations, the size study, the low-rank plus sparse
comparison, ratings-file runs and the invariant check suites.

Exit codes: 0 success, 1 invalid arguments or input, 2 numeric failure.
"""

import argparse
import json
import logging
import os
import sys
import warnings
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .checks import SuiteResult, run_prox_suites, run_theory_suites
from .config import (
    CorruptionModel,
    ExperimentSpec,
    LossSpec,
    NoiseModel,
    RealDataSpec,
    SolverConfig,
    config_echo,
)
from .errors import ArgumentError, ConfigWarning, NumericError
from .harness import (
    CurveResult,
    run_error_curve,
    run_klopp_comparison,
    run_problem_size_study,
    run_real_data,
    save_curve,
    write_metadata,
    write_rescaled_csv,
)

logger = logging.getLogger(__name__)

SEED_ENV = "ROBUSTMC_SEED"
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2


class UsageError(ArgumentError):
    """Raised instead of argparse's exit(2) so bad flags map to exit code 1."""


class RaisingArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help=f"Base seed (overridden by ${SEED_ENV})")
    parser.add_argument("--out", default="outputs", help="Output directory")
    parser.add_argument("--jobs", type=int, default=os.cpu_count(), help="Parallel replicates (default: logical cores)")
    parser.add_argument("--quiet", action="store_true", help="Only print the summary")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


def _experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--p", type=int, default=30, help="Number of rows")
    parser.add_argument("--q", type=int, default=30, help="Number of columns")
    parser.add_argument("--s0", type=int, default=2, help="Rank of the truth")
    parser.add_argument("--eta", type=float, default=10.0, help="Box bound")
    parser.add_argument("--kappa", type=float, default=None,
                        help="Huber constant for bare 'huber' losses and the oracle overlay (default 1.345)")
    parser.add_argument("--noise", default="student-t:3", help="gaussian[:sd], student-t:df or none")
    parser.add_argument("--losses", default="huber,quadratic", help="Comma list of losses, e.g. huber[:kappa],quadratic")
    parser.add_argument("--replicates", type=int, default=25, help="Replicates per grid point")
    parser.add_argument("--n-grid", default=None, help="Comma list of sample sizes (default grid otherwise)")
    parser.add_argument("--lambda-rule", choices=["paper_sim", "one_over_sqrt_n"], default="paper_sim",
                        help="Tuning rule for lambda")
    parser.add_argument("--lambda", dest="lambda_value", type=float, default=None,
                        help="Fixed lambda (overrides --lambda-rule)")
    parser.add_argument("--max-iter", type=int, default=1000, help="Solver iterations")
    parser.add_argument("--l-init", type=float, default=0.1, help="Initial curvature estimate")
    parser.add_argument("--beta", type=float, default=1.2, help="Backtracking factor")
    parser.add_argument("--fixed-point-tol", type=float, default=0.0, help="Early stop tolerance (0 disables)")
    parser.add_argument("--box-projection", action="store_true", help="Clip iterates to [-eta, eta]")
    parser.add_argument("--corruption-fraction", type=float, default=None, help="Fraction of corrupted samples")
    parser.add_argument("--corruption-magnitude", type=float, default=None, help="Corruption size (default eta)")


def build_parser() -> argparse.ArgumentParser:
    parser = RaisingArgumentParser(prog="robustmc", description="Robust nuclear-norm matrix completion")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Error curves against n for several losses")
    _experiment_flags(simulate)
    _common_flags(simulate)

    size = sub.add_parser("size-study", help="Error curves for several matrix sizes")
    _experiment_flags(size)
    size.add_argument("--sizes", default="30x30,50x50,80x80", help="Comma list of PxQ sizes")
    _common_flags(size)

    compare = sub.add_parser("compare-lrps", help="Huber estimator against low-rank plus sparse")
    _experiment_flags(compare)
    compare.add_argument("--corrupted", action="store_true", help="Corrupt 5%% of the samples by +/- eta")
    _common_flags(compare)

    real = sub.add_parser("real-data", help="Train/test run on a ratings file")
    real.add_argument("--path", required=True, help="Ratings file (u.data or ratings.dat layout)")
    real.add_argument("--n-train", type=int, required=True, help="Training set size")
    real.add_argument("--kappa", type=float, default=2.0, help="Huber constant")
    real.add_argument("--max-iter", type=int, default=6000, help="Solver iterations")
    real.add_argument("--lambda", dest="lambda_value", type=float, default=None, help="Fixed lambda (default 1/sqrt(n))")
    real.add_argument("--l-init", type=float, default=0.1, help="Initial curvature estimate")
    real.add_argument("--beta", type=float, default=1.2, help="Backtracking factor")
    _common_flags(real)

    theory = sub.add_parser("theory-check", help="Randomized norm inequality suites")
    theory.add_argument("--trials", type=int, default=1000, help="Instances per suite")
    _common_flags(theory)

    prox = sub.add_parser("prox-check", help="Prox optimality and gradient suites")
    prox.add_argument("--trials", type=int, default=100, help="Random matrices")
    _common_flags(prox)
    return parser


def _resolve_seed(args: argparse.Namespace) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return args.seed
    try:
        return int(env)
    except ValueError as e:
        raise ArgumentError(f"{SEED_ENV} must be an integer, got '{env}'") from e


def _int_list(text: str, flag: str) -> List[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as e:
        raise ArgumentError(f"{flag}: expected comma-separated integers, got '{text}'") from e


def _sizes(text: str) -> List[Tuple[int, int]]:
    sizes = []
    for token in text.split(","):
        p, sep, q = token.strip().lower().partition("x")
        if not sep or not p.isdigit() or not q.isdigit():
            raise ArgumentError(f"--sizes: expected PxQ tokens, got '{token}'")
        sizes.append((int(p), int(q)))
    return sizes


def _resolve_kappa(flag: Optional[float], losses: List[LossSpec]) -> float:
    """--kappa if given, else the first Huber loss's kappa, else 1.345."""
    huber = [loss.kappa for loss in losses if loss.kind == "huber"]
    kappa = flag if flag is not None else (huber[0] if huber else 1.345)
    mismatched = sorted({k for k in huber if k != kappa})
    if mismatched:
        warnings.warn(f"--kappa={kappa:g} differs from Huber kappa(s) {mismatched} in --losses; "
                      f"the oracle overlay uses {kappa:g}", ConfigWarning, stacklevel=2)
    return kappa


def _experiment_spec(args: argparse.Namespace, seed: int) -> ExperimentSpec:
    corruption = None
    if args.corruption_fraction is not None:
        corruption = CorruptionModel(fraction=args.corruption_fraction, magnitude=args.corruption_magnitude,
                                     seed=seed)
    losses = LossSpec.parse_list(args.losses, default_kappa=args.kappa if args.kappa is not None else 1.345)
    rule = "explicit" if args.lambda_value is not None else args.lambda_rule
    return ExperimentSpec(
        p=args.p,
        q=args.q,
        s0=args.s0,
        eta=args.eta,
        kappa=_resolve_kappa(args.kappa, losses),
        noise=NoiseModel.parse(args.noise, seed=seed),
        corruption=corruption,
        losses=losses,
        n_grid=_int_list(args.n_grid, "--n-grid") if args.n_grid else None,
        replicates=args.replicates,
        base_seed=seed,
        lambda_rule=rule,
        lambda_value=args.lambda_value,
        solver=SolverConfig(
            max_iter=args.max_iter,
            l_init=args.l_init,
            beta=args.beta,
            fixed_point_tol=args.fixed_point_tol,
            box_projection=args.box_projection,
            eta=args.eta,
        ),
    )


def _print_config(title: str, config: Dict[str, Any], quiet: bool):
    if quiet:
        return
    print(f"📊 {title} configuration:")
    print(json.dumps(config, indent=2))


def _print_curve(result: CurveResult):
    for label in result.labels:
        series = result.series(label)
        first, last = series[0], series[-1]
        print(f"✅ {label}: n={first.n} error={first.mean_error:.4g} -> n={last.n} error={last.mean_error:.4g}")
    if result.excluded_replicates:
        print(f"⚠️  excluded replicates: {result.excluded_replicates}")


def _cmd_simulate(args, seed) -> int:
    spec = _experiment_spec(args, seed)
    _print_config("Simulation", config_echo(spec), args.quiet)
    result = run_error_curve(spec, jobs=args.jobs, progress=not args.quiet)
    paths = save_curve(result, args.out)
    _print_curve(result)
    print(f"📁 Files saved: {list(paths.values())}")
    return EXIT_OK


def _cmd_size_study(args, seed) -> int:
    spec = _experiment_spec(args, seed)
    sizes = _sizes(args.sizes)
    _print_config("Size study", {**config_echo(spec), "sizes": sizes}, args.quiet)
    study = run_problem_size_study(spec, sizes, jobs=args.jobs, progress=not args.quiet)
    for (p, q), curve in study.curves.items():
        print(f"📊 p={p} q={q}")
        save_curve(curve, os.path.join(args.out, f"p{p}_q{q}"))
        _print_curve(curve)
    rescaled_path = os.path.join(args.out, "rescaled.csv")
    write_rescaled_csv(study.rescaled, rescaled_path)
    print(f"📁 Rescaled curves: {rescaled_path}")
    return EXIT_OK


def _cmd_compare(args, seed) -> int:
    spec = _experiment_spec(args, seed)
    _print_config("Comparison", {**config_echo(spec), "corrupted": args.corrupted}, args.quiet)
    result = run_klopp_comparison(spec, corrupted=args.corrupted, jobs=args.jobs, progress=not args.quiet)
    paths = save_curve(result, args.out, prefix="comparison")
    _print_curve(result)
    print(f"📁 Files saved: {list(paths.values())}")
    return EXIT_OK


def _cmd_real_data(args, seed) -> int:
    spec = RealDataSpec(
        path=args.path,
        n_train=args.n_train,
        kappa=args.kappa,
        max_iter=args.max_iter,
        lambda_rule="explicit" if args.lambda_value is not None else "one_over_sqrt_n",
        lambda_value=args.lambda_value,
        seed=seed,
        l_init=args.l_init,
        beta=args.beta,
    )
    _print_config("Ratings run", config_echo(spec), args.quiet)
    report = run_real_data(spec)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.txt")
    with open(report_path, "w") as f:
        f.write(report.to_text())
    write_metadata(args.out, config_echo(spec), {"test_error": report.test_error})
    print(f"✅ test_error={report.test_error:.4f} (n_train={report.n_train}, n_test={report.n_test})")
    if report.reference_error is not None:
        print(f"📊 reference {report.reference_table}: {report.reference_error} "
              f"(deviation {report.relative_deviation:+.1%})")
    print(f"📄 Report: {report_path}")
    return EXIT_OK


def _report_suites(results: Sequence[SuiteResult], out: str, name: str, seed: int) -> int:
    all_passed = True
    for r in results:
        marker = "✅" if r.passed else "❌"
        print(f"{marker} {r.name}: {r.trials} trials, {r.violations} violations, worst slack {r.worst_slack:.3g}")
        all_passed = all_passed and r.passed
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"{name}.json")
    with open(path, "w") as f:
        json.dump({"seed": seed, "suites": [vars(r) for r in results]}, f, indent=2)
    print(f"\n📊 {name}: {'PASS' if all_passed else 'FAIL'}")
    return EXIT_OK if all_passed else EXIT_NUMERIC


def _cmd_theory_check(args, seed) -> int:
    if args.trials < 1:
        raise ArgumentError("--trials must be positive")
    return _report_suites(run_theory_suites(args.trials, seed), args.out, "theory_check", seed)


def _cmd_prox_check(args, seed) -> int:
    if args.trials < 1:
        raise ArgumentError("--trials must be positive")
    return _report_suites(run_prox_suites(args.trials, seed), args.out, "prox_check", seed)


COMMANDS = {
    "simulate": _cmd_simulate,
    "size-study": _cmd_size_study,
    "compare-lrps": _cmd_compare,
    "real-data": _cmd_real_data,
    "theory-check": _cmd_theory_check,
    "prox-check": _cmd_prox_check,
}


def _describe_validation(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        loc = [str(part) for part in item.get("loc", ()) if not str(part).isdigit()]
        flag = "--" + loc[0].replace("_", "-") if loc else "input"
        parts.append(f"{flag}: {item.get('msg', 'invalid value')}")
    return "; ".join(parts)


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        return int(e.code or 0)

    _configure_logging(args)
    try:
        return COMMANDS[args.command](args, _resolve_seed(args))
    except NumericError as e:
        print(f"❌ Numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as e:
        print(f"❌ Invalid arguments: {_describe_validation(e)}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, FileNotFoundError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INVALID
