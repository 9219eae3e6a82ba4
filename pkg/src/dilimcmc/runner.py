"""Experiment orchestration: build a benchmark problem from a configuration,
run the requested sampler, and write the standard output artifacts (binary
sample file, per-iteration trace CSV, optional subspace file, text report).
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .diagnostics import diagnose
from .lowrank import local_gnh_eig, write_lis_file
from .problems import diffusion_problem, elliptic_problem
from .proposals import build_h_langevin, build_pcn
from .samplers import (
    AdaptationSchedule,
    ChainRecord,
    map_estimate,
    run_adaptive_dili,
    run_adaptive_mwg,
    run_fixed,
)

__all__ = ["run_experiment", "write_samples_file", "read_samples_file",
           "write_trace_csv", "read_trace_csv"]

_SAMPLES_MAGIC = b"DILI"
_SAMPLES_VERSION = 1

TRACE_COLUMNS = ("iteration", "misfit", "omf", "alpha", "accepted",
                 "lis_dim", "d_f")


def write_samples_file(path, samples: np.ndarray, thin: int) -> None:
    """Binary sample dump: magic ``DILI``, uint32 version, uint32 parameter
    dimension, uint32 thinning stride, uint32 sample count, then the samples
    row-major as little-endian float64."""
    samples = np.asarray(samples, float)
    count, n = samples.shape
    with open(path, "wb") as fh:
        fh.write(_SAMPLES_MAGIC)
        fh.write(struct.pack("<IIII", _SAMPLES_VERSION, n, thin, count))
        fh.write(samples.astype("<f8").tobytes())


def read_samples_file(path):
    """Inverse of :func:`write_samples_file`; returns ``(samples, thin)``."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SAMPLES_MAGIC:
            raise ValueError(f"not a sample file (magic {magic!r})")
        version, n, thin, count = struct.unpack("<IIII", fh.read(16))
        if version != _SAMPLES_VERSION:
            raise ValueError(f"unsupported sample file version {version}")
        data = np.frombuffer(fh.read(8 * n * count), dtype="<f8")
    return data.reshape(count, n).copy(), thin


def write_trace_csv(path, record: ChainRecord) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i in range(record.n_iter):
            writer.writerow([
                i,
                f"{record.misfit[i]:.12g}",
                f"{record.omf[i]:.12g}",
                f"{record.alpha[i]:.12g}",
                int(record.accepted[i]),
                int(record.lis_dim[i]),
                "" if np.isnan(record.d_f[i]) else f"{record.d_f[i]:.12g}",
            ])


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Read a trace CSV back into column arrays (d_f gaps become NaN)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header!r}")
        rows = list(reader)
    cols = {name: [] for name in TRACE_COLUMNS}
    for row in rows:
        for name, val in zip(TRACE_COLUMNS, row):
            cols[name].append(np.nan if val == "" else float(val))
    out = {name: np.array(vals) for name, vals in cols.items()}
    out["iteration"] = out["iteration"].astype(np.int64)
    out["accepted"] = out["accepted"].astype(bool)
    out["lis_dim"] = out["lis_dim"].astype(np.int64)
    return out


def _build_problem(cfg: ExperimentConfig):
    if cfg.problem == "elliptic":
        return elliptic_problem(n=cfg.grid, snr=cfg.snr)
    return diffusion_problem(n=cfg.steps, sigma=cfg.sigma)


def run_experiment(cfg: ExperimentConfig, output_dir=None, verbose=print):
    """Run one configured experiment end to end.

    Returns ``(record, paths)`` where ``paths`` maps artifact names to the
    files written under the output directory.
    """
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = _build_problem(cfg)
    model = problem.model

    if cfg.start == "map":
        guess = None
        if hasattr(model, "data_initial_guess"):
            guess = model.prior.whiten(model.data_initial_guess()).values
        mres = map_estimate(model, v0=guess)
        if not mres.converged:
            verbose(f"warning: mode search stopped at gradient norm "
                    f"{mres.grad_norm:.3g} after {mres.n_iter} iterations")
        # Re-center the whitening at the mode and start the chain there.
        model = model.recentered(mres.v)
        v0 = np.zeros(model.dim)
        ev0 = model.evaluate(v0)
    else:
        v0 = np.zeros(model.dim)
        ev0 = model.evaluate(v0)

    sched = AdaptationSchedule(
        n_lag=cfg.n_lag, n_b=cfg.n_b, n_max=cfg.n_max, delta_lis=cfg.delta_lis,
        rho_local=cfg.rho_local, rho_global=cfg.rho_global,
        rho_keep=cfg.rho_keep, variance_floor=cfg.variance_floor)

    if cfg.sampler == "dili":
        record = run_adaptive_dili(model, v0, cfg.iterations, kind=cfg.proposal,
                                   dtau_lis=cfg.dtau_lis, dtau_perp=cfg.dtau_perp,
                                   seed=cfg.seed, thin=cfg.thin, schedule=sched)
    elif cfg.sampler == "mwg":
        record = run_adaptive_mwg(model, v0, cfg.iterations, kind=cfg.proposal,
                                  dtau_lis=cfg.dtau_lis, dtau_perp=cfg.dtau_perp,
                                  seed=cfg.seed, thin=cfg.thin, schedule=sched)
    elif cfg.sampler == "pcn":
        ops = build_pcn(cfg.pcn_a, model.dim)
        record = run_fixed(model, ops, v0, cfg.iterations, seed=cfg.seed,
                           thin=cfg.thin)
    else:  # h-langevin, preconditioned by curvature at the start point
        phi, lam = local_gnh_eig(model, ev0, rho_local=cfg.rho_local)
        ops = build_h_langevin(phi, lam, cfg.dtau)
        record = run_fixed(model, ops, v0, cfg.iterations, seed=cfg.seed,
                           thin=cfg.thin)

    paths = {
        "samples": out / "samples.bin",
        "trace": out / "trace.csv",
        "report": out / "report.txt",
    }
    write_samples_file(paths["samples"], record.samples, record.thin)
    write_trace_csv(paths["trace"], record)
    if record.lis_state is not None and record.lis_state.rank:
        paths["lis"] = out / "lis.bin"
        theta_r, xi_r = record.lis_state.lis_slice(cfg.rho_global)
        write_lis_file(paths["lis"], theta_r, xi_r)

    report = diagnose(record, burn_frac=cfg.burn_frac)
    lines = [f"problem             {cfg.problem} (dim {model.dim})",
             f"sampler             {record.label}",
             f"forward evals       {record.n_forward}",
             f"gradient evals      {record.n_gradient}",
             *report.lines()]
    paths["report"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        verbose(line)
    return record, paths
