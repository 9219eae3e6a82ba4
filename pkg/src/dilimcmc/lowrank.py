"""Low-rank machinery for the likelihood-informed subspace (LIS).

Contains the local Gauss-Newton Hessian eigendecomposition, the incremental
update of the sample-averaged Hessian that yields the global LIS, the
low-rank posterior covariance approximation and its re-projection between
bases, the rank-one empirical covariance update, and the Forstner distance
used to monitor LIS convergence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .forward import ForwardModel, ModelEvaluation

__all__ = [
    "local_gnh_eig",
    "ExpectedGnhState",
    "update_lis",
    "forstner_distance",
    "update_cov",
    "project_cov",
    "RunningCovariance",
    "LowRankCovariance",
    "local_laplace_cov",
    "write_lis_file",
    "read_lis_file",
]


class EigenSolverError(RuntimeError):
    pass


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: largest-magnitude entry positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _lanczos_eig(apply_h, n: int, max_rank: int, oversample: int, seed: int):
    """Lanczos with full reorthogonalization on a symmetric PSD operator.

    Runs ``min(n, max_rank + oversample)`` iterations with a seeded start
    vector and returns Ritz pairs in descending order.
    """
    m = min(n, max_rank + oversample)
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    nq = np.linalg.norm(q)
    q /= nq
    Q = np.zeros((n, m))
    alphas = np.zeros(m)
    betas = np.zeros(m)
    k = 0
    for j in range(m):
        Q[:, j] = q
        w = apply_h(q)
        alphas[j] = q @ w
        w -= alphas[j] * q
        if j > 0:
            w -= betas[j - 1] * Q[:, j - 1]
        # full reorthogonalization, twice for safety
        for _ in range(2):
            w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        beta = np.linalg.norm(w)
        k = j + 1
        if beta < 1e-14 * max(1.0, abs(alphas[: k]).max()):
            break
        betas[j] = beta
        q = w / beta
    T = np.diag(alphas[:k]) + np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
    evals, evecs = np.linalg.eigh(T)
    order = np.argsort(evals)[::-1]
    return evals[order], Q[:, :k] @ evecs[:, order]


def local_gnh_eig(model: ForwardModel, evaluation: ModelEvaluation,
                  rho_local: float, max_rank: int | None = None,
                  oversample: int = 10, seed: int = 0,
                  dense_cutoff: int = 500):
    """Truncated eigendecomposition of the whitened Gauss-Newton Hessian.

    Returns ``(Phi, Lam)`` with all retained eigenvalues >= ``rho_local`` and
    orthonormal columns.  The rank never exceeds the number of observations.
    For small problems (``dim <= dense_cutoff``) the operator is assembled
    densely and decomposed exactly; otherwise matrix-free Lanczos with full
    reorthogonalization is used.
    """
    if rho_local <= 0:
        raise ValueError("local truncation threshold must be positive")
    n = model.dim
    cap = min(n, model.obs.size) if max_rank is None else min(max_rank, n)

    if n <= dense_cutoff:
        H = np.column_stack([model.gnh_apply(evaluation, e) for e in np.eye(n)])
        evals, evecs = np.linalg.eigh(0.5 * (H + H.T))
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
    else:
        evals, evecs = _lanczos_eig(
            lambda z: model.gnh_apply(evaluation, z), n, cap, oversample, seed
        )

    keep = evals >= rho_local
    lam = evals[keep]
    phi = _fix_signs(np.ascontiguousarray(evecs[:, keep]))
    return phi, lam


@dataclass
class ExpectedGnhState:
    """Truncated eigendecomposition of the running average of local
    Gauss-Newton Hessians over posterior samples.

    ``theta`` (N x M, orthonormal) and ``xi`` (descending, all >= rho_keep)
    represent the averaged operator; ``count`` is the number of local
    decompositions folded in so far.
    """

    theta: np.ndarray
    xi: np.ndarray
    count: int
    rho_keep: float

    @classmethod
    def empty(cls, dim: int, rho_keep: float = 1e-4) -> "ExpectedGnhState":
        return cls(np.zeros((dim, 0)), np.zeros(0), 0, rho_keep)

    @property
    def rank(self) -> int:
        return self.xi.size

    def lis_slice(self, rho_global: float):
        """Leading part of the decomposition with eigenvalues >= rho_global."""
        r = int(np.sum(self.xi >= rho_global))
        return self.theta[:, :r].copy(), self.xi[:r].copy()


def update_lis(state: ExpectedGnhState, phi: np.ndarray, lam: np.ndarray,
               rho_global: float = 0.1, max_rank: int | None = None):
    """Fold one local Hessian decomposition into the running average.

    For the first sample the state is the local decomposition itself.
    Afterwards the union basis is orthogonalized by Householder QR, the
    averaged operator is diagonalized on that small subspace, and the result
    is truncated at the retention threshold ``state.rho_keep``.

    Returns ``(new_state, theta_r, xi_r)`` where the last two are the LIS
    slice with eigenvalues >= ``rho_global``.
    """
    m = state.count
    if m == 0:
        theta, xi = phi.copy(), lam.copy()
    else:
        stacked = np.concatenate([state.theta, phi], axis=1)
        Q, R = np.linalg.qr(stacked)
        core = np.concatenate([m * state.xi, lam])
        small = (R * core) @ R.T / (m + 1)
        evals, W = np.linalg.eigh(0.5 * (small + small.T))
        order = np.argsort(evals)[::-1]
        evals, W = evals[order], W[:, order]
        keep = evals >= state.rho_keep
        theta = _fix_signs(Q @ W[:, keep])
        xi = evals[keep]

    if max_rank is not None and xi.size > max_rank:
        raise EigenSolverError(
            f"expected-Hessian rank {xi.size} exceeds cap {max_rank}; "
            f"increase the retention threshold (currently {state.rho_keep:g})"
        )
    new_state = ExpectedGnhState(theta, xi, m + 1, state.rho_keep)
    theta_r, xi_r = new_state.lis_slice(rho_global)
    return new_state, theta_r, xi_r


def forstner_distance(theta_a: np.ndarray, xi_a: np.ndarray,
                      theta_b: np.ndarray, xi_b: np.ndarray) -> float:
    """Distance between I + Theta_a Xi_a Theta_a^T and I + Theta_b Xi_b Theta_b^T
    based on log-squared generalized eigenvalues.

    Both operators are identity off the union of the two ranges, so the
    infinite-dimensional pencil reduces to a finite one on that union; the
    omitted directions contribute log^2(1) = 0.
    """
    if xi_a.size == 0 and xi_b.size == 0:
        return 0.0
    stacked = np.concatenate([theta_a, theta_b], axis=1)
    Q, R = np.linalg.qr(stacked)
    # drop numerically dependent columns
    keep = np.abs(np.diag(R)) > 1e-12 * max(1.0, np.abs(np.diag(R)).max())
    V = Q[:, keep]
    k = V.shape[1]
    Ta = V.T @ theta_a
    Tb = V.T @ theta_b
    A = np.eye(k) + (Ta * xi_a) @ Ta.T
    B = np.eye(k) + (Tb * xi_b) @ Tb.T
    # Whiten by B explicitly instead of using the generalized solver: at very
    # large eigenvalue scales roundoff can make B numerically indefinite and
    # break its Cholesky factorization, while its eigendecomposition (with the
    # exact lower bound B >= I enforced) stays well defined.
    bw, bv = np.linalg.eigh(0.5 * (B + B.T))
    bw = np.maximum(bw, 1.0)
    binv_half = (bv / np.sqrt(bw)) @ bv.T
    M = binv_half @ A @ binv_half
    gev = np.linalg.eigvalsh(0.5 * (M + M.T))
    gev = np.maximum(gev, 1e-300)
    return float(np.sqrt(np.sum(np.log(gev) ** 2)))


def update_cov(theta_r: np.ndarray, sigma_r: np.ndarray, sym_tol: float = 1e-8):
    """Diagonalize the projected posterior covariance and reweigh the basis.

    Returns ``(psi_r, d_r)`` with ``psi_r = theta_r @ W`` orthonormal and
    ``d_r`` the eigenvalues of ``sigma_r`` (descending), so that
    ``psi_r (d_r - I) psi_r^T + I`` reconstructs the low-rank posterior
    covariance approximation.
    """
    sigma_r = np.asarray(sigma_r, float)
    if sigma_r.size and np.abs(sigma_r - sigma_r.T).max() > sym_tol:
        raise ValueError("projected covariance is not symmetric")
    if sigma_r.size == 0:
        return theta_r[:, :0], np.zeros(0)
    evals, W = np.linalg.eigh(0.5 * (sigma_r + sigma_r.T))
    order = np.argsort(evals)[::-1]
    return _fix_signs(theta_r @ W[:, order]), evals[order]


def project_cov(theta_r: np.ndarray, sigma_r: np.ndarray,
                theta_new: np.ndarray) -> np.ndarray:
    """Re-project the covariance estimate onto a new LIS basis:
    T (Sigma_r - I) T^T + I with T = Theta_new^T Theta_r."""
    T = theta_new.T @ theta_r
    r = sigma_r.shape[0]
    rp = theta_new.shape[1]
    return T @ (sigma_r - np.eye(r)) @ T.T + np.eye(rp)


class RunningCovariance:
    """Online mean/covariance of projected samples (Welford update).

    Until two samples have been seen the covariance estimate stays at its
    prior initialization, the identity.
    """

    def __init__(self, r: int):
        self.r = r
        self.count = 0
        self.mean = np.zeros(r)
        self._m2 = np.zeros((r, r))

    def push(self, w: np.ndarray) -> None:
        w = np.asarray(w, float)
        self.count += 1
        delta = w - self.mean
        self.mean += delta / self.count
        self._m2 += np.outer(delta, w - self.mean)

    @property
    def covariance(self) -> np.ndarray:
        if self.count < 2:
            return np.eye(self.r)
        return self._m2 / (self.count - 1)

    @classmethod
    def from_moments(cls, sigma: np.ndarray, mean: np.ndarray, count: int
                     ) -> "RunningCovariance":
        """Rebuild the accumulator after a basis change."""
        rc = cls(sigma.shape[0])
        rc.count = count
        rc.mean = np.asarray(mean, float).copy()
        if count >= 2:
            rc._m2 = np.asarray(sigma, float) * (count - 1)
        return rc


@dataclass(frozen=True)
class LowRankCovariance:
    """Whitened covariance of the form I - basis diag(shrink) basis^T.

    With local Hessian eigenpairs (phi_i, lam_i) and shrink factors
    lam_i / (lam_i + 1) this is the local Gaussian (Laplace) approximation of
    the posterior covariance in whitened coordinates.
    """

    basis: np.ndarray
    shrink: np.ndarray

    def apply(self, z: np.ndarray) -> np.ndarray:
        w = self.basis.T @ z
        return z - self.basis @ (self.shrink * w)

    def dense(self) -> np.ndarray:
        n = self.basis.shape[0]
        return np.eye(n) - (self.basis * self.shrink) @ self.basis.T


def local_laplace_cov(phi: np.ndarray, lam: np.ndarray) -> LowRankCovariance:
    """Low-rank form of the local posterior covariance approximation,
    I - sum_i lam_i/(lam_i+1) phi_i phi_i^T."""
    lam = np.asarray(lam, float)
    return LowRankCovariance(np.asarray(phi, float), lam / (lam + 1.0))


# -- binary export of the LIS -----------------------------------------------

_LIS_MAGIC = b"DILI"
_LIS_VERSION = 1


def write_lis_file(path, theta_r: np.ndarray, xi_r: np.ndarray) -> None:
    """Write an LIS basis to the binary interchange format.

    Layout (little endian): magic ``DILI``, uint32 version, uint32 N,
    uint32 r, then the basis column-major as float64, then the eigenvalues.
    """
    theta_r = np.asarray(theta_r, float)
    xi_r = np.asarray(xi_r, float)
    n, r = theta_r.shape
    if xi_r.shape != (r,):
        raise ValueError("basis/eigenvalue shape mismatch")
    with open(path, "wb") as fh:
        fh.write(_LIS_MAGIC)
        fh.write(struct.pack("<III", _LIS_VERSION, n, r))
        fh.write(np.asfortranarray(theta_r).astype("<f8").tobytes(order="F"))
        fh.write(xi_r.astype("<f8").tobytes())


def read_lis_file(path):
    """Read a file written by :func:`write_lis_file`; returns (theta_r, xi_r)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _LIS_MAGIC:
            raise ValueError(f"not an LIS file (magic {magic!r})")
        version, n, r = struct.unpack("<III", fh.read(12))
        if version != _LIS_VERSION:
            raise ValueError(f"unsupported LIS file version {version}")
        theta = np.frombuffer(fh.read(8 * n * r), dtype="<f8").reshape((n, r), order="F")
        xi = np.frombuffer(fh.read(8 * r), dtype="<f8")
    return theta.copy(), xi.copy()
