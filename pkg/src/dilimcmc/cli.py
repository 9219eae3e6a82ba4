"""Command-line entry points: run an experiment from a configuration file,
diagnose a recorded trace, and inspect a binary subspace file."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, load_config
from .diagnostics import (
    batch_means_se,
    effective_sample_size,
    integrated_autocorrelation_time,
    lag1_by_component,
)
from .lowrank import read_lis_file
from .runner import read_samples_file, read_trace_csv, run_experiment

__all__ = ["main"]


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run_experiment(cfg, output_dir=args.output)
    return 0


def _cmd_diagnose(args) -> int:
    trace = read_trace_csv(args.trace)
    n = trace["iteration"].size
    lo = int(args.burn * n)
    print(f"iterations          {n} (burn-in {lo})")
    print(f"acceptance rate     {trace['accepted'][lo:].mean():.3f}")
    for name in ("misfit", "omf"):
        x = trace[name][lo:]
        tau = integrated_autocorrelation_time(x)
        ess = effective_sample_size(x)
        se = batch_means_se(x) if x.size >= 60 else float("nan")
        print(f"{name:<8} IACT {tau:8.1f}   ESS {ess:10.1f}   "
              f"mean {x.mean():.6g} +- {se:.3g}")
    final_dim = int(trace["lis_dim"][-1])
    print(f"subspace dimension  {final_dim}")
    if args.samples:
        samples, thin = read_samples_file(args.samples)
        keep = samples[int(args.burn * samples.shape[0]):]
        if keep.shape[0] >= 2:
            lag1 = lag1_by_component(keep)
            print(f"samples             {samples.shape[0]} x {samples.shape[1]} "
                  f"(thin {thin})")
            print(f"lag-1 per component max {lag1.max():.4f}   "
                  f"median {np.median(lag1):.4f}")
    return 0


def _cmd_lis_info(args) -> int:
    theta, xi = read_lis_file(args.file)
    n, r = theta.shape
    print(f"parameter dimension {n}")
    print(f"subspace dimension  {r}")
    ortho = np.abs(theta.T @ theta - np.eye(r)).max() if r else 0.0
    print(f"basis orthonormality defect {ortho:.3g}")
    if r:
        print(f"eigenvalues         max {xi.max():.6g}   min {xi.min():.6g}")
        for i, val in enumerate(xi):
            print(f"  [{i:3d}] {val:.6g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dilimcmc",
        description="Likelihood-informed MCMC for function-space inverse problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="path to a key = value configuration file")
    p_run.add_argument("--output", default=None,
                       help="output directory (overrides the config)")
    p_run.set_defaults(func=_cmd_run)

    p_diag = sub.add_parser("diagnose", help="summarize a recorded trace")
    p_diag.add_argument("trace", help="trace CSV written by the run command")
    p_diag.add_argument("--samples", default=None,
                        help="optional binary sample file for per-component stats")
    p_diag.add_argument("--burn", type=float, default=0.2,
                        help="burn-in fraction to discard (default 0.2)")
    p_diag.set_defaults(func=_cmd_diagnose)

    p_lis = sub.add_parser("lis-info", help="inspect a binary subspace file")
    p_lis.add_argument("file")
    p_lis.set_defaults(func=_cmd_lis_info)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
