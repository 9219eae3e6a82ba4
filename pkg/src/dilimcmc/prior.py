"""Gaussian prior factors, whitening transformations, and the posterior
mixing diagnostic (misfit plus squared prior-weighted distance from the mean).

All samplers in this package work in whitened coordinates ``v`` where the
prior is a standard Gaussian.  A :class:`PriorFactor` provides the actions of
the covariance square root ``L`` (with ``L L^T = C``), its transpose, and its
inverse, together with the reference shift that defines the whitening map

    v = L^{-1} (u - u_ref),        u = L v + u_ref,

with ``u_ref = mean + m_ref`` (``m_ref`` defaults to zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FunctionVector",
    "PriorFactor",
    "build_factor",
    "exponential_kernel",
    "brownian_covariance",
    "onsager_machlup",
]

U_SPACE = "u"
V_SPACE = "v"
W_SPACE = "w"
_SPACES = (U_SPACE, V_SPACE, W_SPACE)


@dataclass(frozen=True)
class FunctionVector:
    """Coefficients of a discretized function with a coordinate tag.

    The tag records whether the coefficients live in the native parameter
    space (``"u"``), the whitened space (``"v"``) or the proposal-diagonal
    space (``"w"``).  Mixing tags is a contract violation and raises.
    """

    values: np.ndarray
    space: str = V_SPACE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("FunctionVector requires a 1-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("FunctionVector entries must be finite")
        if self.space not in _SPACES:
            raise ValueError(f"unknown coordinate tag {self.space!r}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def require(self, space: str) -> np.ndarray:
        if self.space != space:
            raise ValueError(
                f"coordinate mismatch: expected {space!r}-space vector, got {self.space!r}"
            )
        return self.values


def _as_values(x, space: str) -> np.ndarray:
    """Accept either a tagged FunctionVector or a bare array."""
    if isinstance(x, FunctionVector):
        return x.require(space)
    return np.asarray(x, dtype=float)


class PriorFactor:
    """Gaussian prior represented through a square-root factor of its covariance.

    Parameters
    ----------
    sqrt : ndarray or None
        Dense factor ``L`` with ``L L^T = C``.  Either ``sqrt`` or the pair
        of callables must be supplied by a subclass.
    mean : ndarray, optional
        Prior mean, default zero.
    m_ref : ndarray, optional
        Reference shift added to the mean in the whitening map, default zero.

    Notes
    -----
    Immutable after construction; all operations are pure, so a factor can be
    shared freely between chains and threads.
    """

    def __init__(self, sqrt: np.ndarray, mean=None, m_ref=None):
        L = np.asarray(sqrt, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("square-root factor must be a square matrix")
        self._L = L
        self._Linv = None  # computed lazily; subclasses may never need it
        self.dim = L.shape[0]
        self.mean = np.zeros(self.dim) if mean is None else np.asarray(mean, float)
        self.m_ref = np.zeros(self.dim) if m_ref is None else np.asarray(m_ref, float)
        if self.mean.shape != (self.dim,) or self.m_ref.shape != (self.dim,):
            raise ValueError("mean/m_ref dimension mismatch")
        self.u_ref = self.mean + self.m_ref
        # v_ref enters the acceptance ratio of prior-reversible proposals.
        if np.any(self.m_ref):
            self.v_ref = self.apply_inv_sqrt(self.m_ref)
        else:
            self.v_ref = np.zeros(self.dim)

    def with_reference(self, m_ref) -> "PriorFactor":
        """Copy of this factor with a new reference shift (shares the
        factor matrices; cheap)."""
        import copy

        other = copy.copy(self)
        other.m_ref = np.asarray(m_ref, float)
        if other.m_ref.shape != (self.dim,):
            raise ValueError("m_ref dimension mismatch")
        other.u_ref = other.mean + other.m_ref
        if np.any(other.m_ref):
            other.v_ref = other.apply_inv_sqrt(other.m_ref)
        else:
            other.v_ref = np.zeros(self.dim)
        return other

    # -- factor actions ------------------------------------------------

    def apply_sqrt(self, v: np.ndarray) -> np.ndarray:
        """Return ``L v``."""
        return self._L @ np.asarray(v, float)

    def apply_sqrt_t(self, x: np.ndarray) -> np.ndarray:
        """Return ``L^T x`` (adjoint of :meth:`apply_sqrt`)."""
        return self._L.T @ np.asarray(x, float)

    def apply_inv_sqrt(self, x: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} x``."""
        if self._Linv is None:
            self._Linv = np.linalg.inv(self._L)
        return self._Linv @ np.asarray(x, float)

    def covariance(self) -> np.ndarray:
        """Dense covariance ``L L^T`` (test/diagnostic use)."""
        return self._L @ self._L.T

    # -- whitening -----------------------------------------------------

    def whiten(self, u) -> FunctionVector:
        """Map a native-space vector to whitened coordinates."""
        uv = _as_values(u, U_SPACE)
        if uv.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {uv.shape}")
        return FunctionVector(self.apply_inv_sqrt(uv - self.u_ref), V_SPACE)

    def unwhiten(self, v) -> FunctionVector:
        """Inverse of :meth:`whiten`."""
        vv = _as_values(v, V_SPACE)
        if vv.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {vv.shape}")
        return FunctionVector(self.apply_sqrt(vv) + self.u_ref, U_SPACE)

    def sample(self, rng: np.random.Generator) -> FunctionVector:
        """Draw from the prior (in native coordinates, ignoring m_ref)."""
        xi = rng.standard_normal(self.dim)
        return FunctionVector(self.apply_sqrt(xi) + self.mean, U_SPACE)


class BrownianFactor(PriorFactor):
    """Exact triangular factor of the Brownian-motion covariance min(t_i, t_j).

    On the grid ``t_i = i * dt`` (i = 1..n) the covariance factors exactly as
    ``L[i, j] = sqrt(dt)`` for ``j <= i``, the cumulative-sum operator.  The
    actions below avoid materializing L.
    """

    def __init__(self, n: int, dt: float, mean=None, m_ref=None):
        if n < 1 or dt <= 0:
            raise ValueError("need n >= 1 and dt > 0")
        self.dt = float(dt)
        self._sdt = np.sqrt(self.dt)
        L = np.tril(np.full((n, n), self._sdt))
        super().__init__(L, mean=mean, m_ref=m_ref)

    def apply_sqrt(self, v):
        return self._sdt * np.cumsum(np.asarray(v, float))

    def apply_sqrt_t(self, x):
        return self._sdt * np.cumsum(np.asarray(x, float)[::-1])[::-1]

    def apply_inv_sqrt(self, x):
        return np.diff(np.asarray(x, float), prepend=0.0) / self._sdt


def exponential_kernel(points: np.ndarray, sigma: float, s0: float) -> np.ndarray:
    """Exponential covariance kernel sigma^2 exp(-|s - s'| / (2 s0)) on a point set."""
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[0] < pts.shape[1]:
        pts = pts.T
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return sigma**2 * np.exp(-d / (2.0 * s0))


def brownian_covariance(n: int, dt: float) -> np.ndarray:
    """Dense min(t_i, t_j) covariance on t_i = i*dt (test/oracle use)."""
    t = dt * np.arange(1, n + 1)
    return np.minimum.outer(t, t)


def build_factor(spec, mean=None, m_ref=None, clip_ratio: float = 1e-12) -> PriorFactor:
    """Construct a :class:`PriorFactor` from a covariance specification.

    Parameters
    ----------
    spec
        One of:

        - a dense SPD matrix,
        - ``("exponential", points, sigma, s0)`` for the exponential kernel,
        - ``("brownian", n, dt)`` for Brownian motion (exact triangular factor).
    clip_ratio : float
        Eigenvalues below ``clip_ratio * max_eigenvalue`` are clipped to that
        floor before square-rooting; kernel matrices are numerically
        semi-definite.  Strongly negative eigenvalues raise.
    """
    if isinstance(spec, tuple):
        kind = spec[0]
        if kind == "brownian":
            _, n, dt = spec
            return BrownianFactor(int(n), float(dt), mean=mean, m_ref=m_ref)
        if kind == "exponential":
            _, points, sigma, s0 = spec
            cov = exponential_kernel(points, float(sigma), float(s0))
            return build_factor(cov, mean=mean, m_ref=m_ref, clip_ratio=clip_ratio)
        raise ValueError(f"unknown covariance spec kind {kind!r}")

    cov = np.asarray(spec, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.allclose(cov, cov.T, atol=1e-10 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance matrix is not symmetric")
    evals, evecs = np.linalg.eigh(cov)
    top = evals[-1]
    if top <= 0:
        raise ValueError(f"covariance is not positive definite (largest eigenvalue {top:g})")
    floor = clip_ratio * top
    bad = evals < -1e-8 * top
    if np.any(bad):
        i = int(np.argmin(evals))
        raise ValueError(
            f"covariance is not positive semi-definite: eigenvalue {evals[i]:g} at index {i}"
        )
    evals = np.maximum(evals, floor)
    # Symmetric square root: L = U sqrt(D) U^T, so L = L^T and L L^T = C.
    L = (evecs * np.sqrt(evals)) @ evecs.T
    return PriorFactor(L, mean=mean, m_ref=m_ref)


def onsager_machlup(prior: PriorFactor, v, misfit: float) -> float:
    """Scalar mixing diagnostic: misfit plus the squared whitened distance
    from the prior mean, ``eta + ||v + v_ref||^2``.

    ``misfit`` is the already-evaluated data-misfit at the same point.
    """
    vv = _as_values(v, V_SPACE)
    if vv.shape != (prior.dim,):
        raise ValueError(f"dimension mismatch: expected {prior.dim}, got {vv.shape}")
    d = vv + prior.v_ref
    return float(misfit) + float(d @ d)
