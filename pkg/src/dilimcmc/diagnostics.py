"""Chain-quality diagnostics: autocorrelations, integrated autocorrelation
time, effective sample size, and batch-means standard errors.

Autocorrelations use the biased (1/n) normalization, which keeps the
empirical autocorrelation sequence positive semi-definite.  The integrated
autocorrelation time uses the initial-monotone-sequence estimator: sums of
adjacent autocorrelation pairs are truncated at the first negative value and
forced non-increasing, which is consistent for reversible chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "autocorrelation",
    "lag1_by_component",
    "integrated_autocorrelation_time",
    "effective_sample_size",
    "batch_means_se",
    "DiagnosticsReport",
    "diagnose",
]


def autocorrelation(x: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Empirical autocorrelation of a scalar series, biased normalization.

    Returns ``acf[0..max_lag]`` with ``acf[0] = 1``.  A (numerically)
    constant series is degenerate: its autocorrelation is returned as all
    ones, which callers should treat as "no information".
    """
    x = np.asarray(x, float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D series with at least two entries")
    n = x.size
    if max_lag is None:
        max_lag = n - 1
    max_lag = min(max_lag, n - 1)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var <= 1e-30 * max(1.0, float(x @ x) / n):
        return np.ones(max_lag + 1)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / n
    return acov / acov[0]


def lag1_by_component(samples: np.ndarray) -> np.ndarray:
    """Lag-1 autocorrelation of every column of a (n_samples, dim) array.

    Degenerate (constant) columns report 1.0.
    """
    x = np.asarray(samples, float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D array with at least two rows")
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    var = np.einsum("ij,ij->j", xc, xc) / n
    cov1 = np.einsum("ij,ij->j", xc[:-1], xc[1:]) / n
    scale = np.maximum(np.einsum("ij,ij->j", x, x) / n, 1.0)
    out = np.ones(x.shape[1])
    ok = var > 1e-30 * scale
    out[ok] = cov1[ok] / var[ok]
    return out


def integrated_autocorrelation_time(x: np.ndarray,
                                    max_lag: int | None = None) -> float:
    """Initial-monotone-sequence estimate of the integrated autocorrelation
    time tau = 1 + 2 sum_k acf(k).

    Returns ``inf`` for a degenerate (constant) series.
    """
    x = np.asarray(x, float)
    if max_lag is None:
        max_lag = x.size - 1
    acf = autocorrelation(x, max_lag)
    if np.all(acf == 1.0):
        return float("inf")
    # pair sums Gamma_m = acf(2m) + acf(2m+1), m = 0, 1, ...
    n_pairs = acf.size // 2
    if n_pairs == 0:
        return 1.0
    gamma = acf[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    # initial positive sequence: truncate at the first non-positive pair
    pos = np.nonzero(gamma <= 0.0)[0]
    m = pos[0] if pos.size else n_pairs
    if m == 0:
        return 1.0
    gamma = np.minimum.accumulate(gamma[:m])  # enforce monotonicity
    return float(max(2.0 * gamma.sum() - 1.0, 1.0))


def effective_sample_size(x: np.ndarray, max_lag: int | None = None) -> float:
    """n / tau with tau the integrated autocorrelation time (0 if degenerate)."""
    x = np.asarray(x, float)
    tau = integrated_autocorrelation_time(x, max_lag)
    return 0.0 if np.isinf(tau) else x.size / tau


def batch_means_se(x: np.ndarray, n_batches: int = 30) -> float:
    """Monte Carlo standard error of the mean by non-overlapping batch means."""
    x = np.asarray(x, float)
    if n_batches < 2:
        raise ValueError("need at least two batches")
    b = x.size // n_batches
    if b < 1:
        raise ValueError("series too short for the requested batch count")
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


@dataclass(frozen=True)
class DiagnosticsReport:
    """Summary diagnostics of one chain run."""

    n_iter: int
    acceptance_rate: float
    misfit_iact: float
    misfit_ess: float
    omf_iact: float
    omf_ess: float
    misfit_mean: float
    misfit_se: float
    lag1_max: float
    lag1_median: float

    def lines(self) -> list[str]:
        return [
            f"iterations          {self.n_iter}",
            f"acceptance rate     {self.acceptance_rate:.3f}",
            f"misfit IACT         {self.misfit_iact:.1f}",
            f"misfit ESS          {self.misfit_ess:.1f}",
            f"mixing-diag IACT    {self.omf_iact:.1f}",
            f"mixing-diag ESS     {self.omf_ess:.1f}",
            f"misfit mean +- se   {self.misfit_mean:.4g} +- {self.misfit_se:.2g}",
            f"max lag-1 autocorr  {self.lag1_max:.4f}",
            f"median lag-1        {self.lag1_median:.4f}",
        ]


def diagnose(record, burn_frac: float = 0.2) -> DiagnosticsReport:
    """Diagnostics of a :class:`~dilimcmc.samplers.ChainRecord` after
    discarding an initial fraction of the run as burn-in."""
    n = record.n_iter
    lo = int(burn_frac * n)
    misfit = record.misfit[lo:]
    omf = record.omf[lo:]
    keep = record.sample_iterations >= lo
    samples = record.samples[keep]
    if samples.shape[0] >= 2:
        lag1 = lag1_by_component(samples)
        lag1_max, lag1_med = float(lag1.max()), float(np.median(lag1))
    else:
        lag1_max = lag1_med = float("nan")
    return DiagnosticsReport(
        n_iter=n,
        acceptance_rate=float(record.accepted[lo:].mean()),
        misfit_iact=integrated_autocorrelation_time(misfit),
        misfit_ess=effective_sample_size(misfit),
        omf_iact=integrated_autocorrelation_time(omf),
        omf_ess=effective_sample_size(omf),
        misfit_mean=float(misfit.mean()),
        misfit_se=batch_means_se(misfit) if misfit.size >= 60 else float("nan"),
        lag1_max=lag1_max,
        lag1_median=lag1_med,
    )
