"""
Script to run the desk-scale experiment batch: error curves for both noise
models, the problem-size study and the low-rank plus sparse comparison.
"""

import argparse
import json
import os
import time
from typing import Any, Dict, List

from src.config import ExperimentSpec, LossSpec, NoiseModel, SolverConfig, config_echo
from src.harness import (
    CurveResult,
    run_error_curve,
    run_klopp_comparison,
    run_problem_size_study,
    save_curve,
    write_rescaled_csv,
)
from src.metrics import fit_rate


def base_spec(noise: str, replicates: int, seed: int, max_iter: int) -> ExperimentSpec:
    return ExperimentSpec(
        p=30,
        q=30,
        s0=2,
        noise=NoiseModel.parse(noise, seed=seed),
        losses=[LossSpec.huber(1.345), LossSpec.quadratic()],
        replicates=replicates,
        base_seed=seed,
        solver=SolverConfig(max_iter=max_iter),
    )


def summarize_curve(result: CurveResult) -> Dict[str, Any]:
    """Largest-n errors per loss and the rate fit of the Huber curve."""
    summary: Dict[str, Any] = {"largest_n": result.n_grid[-1], "errors": {}}
    for label in result.labels:
        series = result.series(label)
        summary["errors"][label] = {
            "smallest_n": series[0].mean_error,
            "largest_n": series[-1].mean_error,
        }
        if label.startswith("huber") and len(series) >= 5:
            fit = fit_rate([pt.n for pt in series], [pt.mean_error for pt in series],
                           [pt.oracle_value for pt in series], top=5)
            summary["errors"][label]["rate_fit"] = {
                "slope": fit.slope,
                "r_squared": fit.r_squared,
                "display_constant": fit.display_constant,
            }
    return summary


def run_batch(output_dir: str = "outputs/experiments", replicates: int = 10, seed: int = 0,
              max_iter: int = 1000, jobs: int = None) -> Dict[str, Any]:
    """
    Run every desk-scale experiment and save CSVs plus a JSON summary.

    Args:
        output_dir: Output directory for experiments
        replicates: Replicates per grid point
        seed: Base seed
        max_iter: Solver iterations per fit
        jobs: Worker threads

    Returns:
        Dictionary with experiment summaries
    """
    os.makedirs(output_dir, exist_ok=True)
    results: Dict[str, Any] = {}
    start = time.time()

    for noise in ["student-t:3", "gaussian:1"]:
        name = "curve_" + noise.replace(":", "").replace("-", "")
        print(f"📊 Error curve, noise={noise}")
        spec = base_spec(noise, replicates, seed, max_iter)
        try:
            curve = run_error_curve(spec, jobs=jobs, progress=True)
            save_curve(curve, os.path.join(output_dir, name))
            results[name] = summarize_curve(curve)
            print(f"✅ {name}: {results[name]['errors']}")
        except Exception as e:
            print(f"❌ {name} failed: {e}")
            results[name] = {"error": str(e)}

    print("📊 Problem-size study")
    spec = base_spec("student-t:3", replicates, seed, max_iter)
    try:
        study = run_problem_size_study(spec.model_copy(update={"losses": [LossSpec.huber(1.345)]}), jobs=jobs,
                                       progress=True)
        sizes: List[str] = []
        for (p, q), curve in study.curves.items():
            save_curve(curve, os.path.join(output_dir, "size_study", f"p{p}_q{q}"))
            sizes.append(f"{p}x{q}")
        write_rescaled_csv(study.rescaled, os.path.join(output_dir, "size_study", "rescaled.csv"))
        results["size_study"] = {"sizes": sizes}
        print(f"✅ size study: {sizes}")
    except Exception as e:
        print(f"❌ size study failed: {e}")
        results["size_study"] = {"error": str(e)}

    for noise in ["student-t:3", "gaussian:1"]:
        for corrupted in (False, True):
            name = f"comparison_{noise.replace(':', '').replace('-', '')}_{'corrupted' if corrupted else 'clean'}"
            print(f"📊 Comparison, noise={noise}, corrupted={corrupted}")
            try:
                curve = run_klopp_comparison(base_spec(noise, replicates, seed, max_iter), corrupted=corrupted,
                                             jobs=jobs, progress=True)
                save_curve(curve, os.path.join(output_dir, name), prefix="comparison")
                results[name] = summarize_curve(curve)
                print(f"✅ {name}: {results[name]['errors']}")
            except Exception as e:
                print(f"❌ {name} failed: {e}")
                results[name] = {"error": str(e)}

    summary = {
        "config": config_echo(base_spec("student-t:3", replicates, seed, max_iter)),
        "results": results,
        "elapsed_seconds": time.time() - start,
    }
    summary_file = os.path.join(output_dir, "experiments_summary.json")
    with open(summary_file, "w") as f:
        json.dump(summary, f, indent=2)
    return summary


def main():
    parser = argparse.ArgumentParser(description="Run the desk-scale experiment batch")
    parser.add_argument("--output-dir", default="outputs/experiments", help="Output directory")
    parser.add_argument("--replicates", type=int, default=10, help="Replicates per grid point")
    parser.add_argument("--seed", type=int, default=0, help="Base seed")
    parser.add_argument("--max-iter", type=int, default=1000, help="Solver iterations per fit")
    parser.add_argument("--jobs", type=int, default=os.cpu_count(), help="Worker threads")
    args = parser.parse_args()

    summary = run_batch(args.output_dir, args.replicates, args.seed, args.max_iter, args.jobs)
    failed = [name for name, r in summary["results"].items() if "error" in r]
    print(f"\n🎉 Batch complete in {summary['elapsed_seconds']:.0f}s")
    if failed:
        print(f"⚠️  Failed experiments: {failed}")
    print(f"📄 Summary: {os.path.join(args.output_dir, 'experiments_summary.json')}")


if __name__ == "__main__":
    main()
