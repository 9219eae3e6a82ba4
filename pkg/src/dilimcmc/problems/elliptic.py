"""Two-dimensional elliptic inverse problem: recover a log-transmissivity
field from sparse pressure observations.

The PDE is -div(kappa grad p) = f on the unit square with zero-flux boundary
conditions, closed by the constraint that the boundary integral of p
vanishes.  The discretization is bilinear finite elements on a regular
n x n grid with the parameter (log kappa) piecewise constant per element, so
the parameter dimension is n^2.  The forcing is a fixed combination of four
Gaussian sources/sinks; pressure is observed at a 5 x 5 sensor grid.

The sparse factorization of the (self-adjoint) augmented system is computed
once per forward solve and reused for every tangent and adjoint solve at
that point, which makes Gauss-Newton Hessian actions cheap.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..forward import ForwardModel, ForwardSolveError, ObservationSet
from ..prior import build_factor

__all__ = ["EllipticModel", "elliptic_problem"]

# Element stiffness of a bilinear square element with unit coefficient
# (counterclockwise node ordering; independent of the mesh size in 2-D).
_K_UNIT = np.array([
    [4.0, -1.0, -2.0, -1.0],
    [-1.0, 4.0, -1.0, -2.0],
    [-2.0, -1.0, 4.0, -1.0],
    [-1.0, -2.0, -1.0, 4.0],
]) / 6.0

_SOURCES = (
    ((0.3, 0.3), 2.0),
    ((0.7, 0.3), -3.0),
    ((0.7, 0.7), -2.0),
    ((0.3, 0.7), 3.0),
)
_SOURCE_STD = 0.05


def _forcing(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Superposition of four Gaussian plumes (two sources, two sinks)."""
    f = np.zeros_like(x)
    for (cx, cy), w in _SOURCES:
        f += w * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * _SOURCE_STD**2))
    return f


class EllipticModel(ForwardModel):
    """Bilinear-FEM elliptic model with per-element log-conductivity."""

    def __init__(self, n: int, prior, obs: ObservationSet | None,
                 sensor_grid: int = 5):
        super().__init__(prior, obs)
        if prior.dim != n * n:
            raise ValueError(f"prior dimension {prior.dim} != n^2 = {n * n}")
        self.n = n
        self.h = 1.0 / n
        np1 = n + 1
        self.n_nodes = np1 * np1

        # Element -> node connectivity (counterclockwise).
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        i = i.ravel(order="F")
        j = j.ravel(order="F")
        self.elem_dofs = np.column_stack([
            j * np1 + i,
            j * np1 + i + 1,
            (j + 1) * np1 + i + 1,
            (j + 1) * np1 + i,
        ])

        # Fixed sparsity pattern of the stiffness block.
        self._rows = np.repeat(self.elem_dofs, 4, axis=1).ravel()
        self._cols = np.tile(self.elem_dofs, (1, 4)).ravel()
        self._k_flat = np.tile(_K_UNIT.ravel(order="F"), (n * n, 1))

        # Constraint row/column: trapezoidal weights of the boundary integral.
        # Every boundary node carries weight h: interior edge nodes get h/2
        # from each adjacent segment, corners h/2 from each of two edges.
        c = np.zeros(self.n_nodes)
        gx, gy = np.meshgrid(np.arange(np1), np.arange(np1), indexing="ij")
        on_boundary = (gx == 0) | (gx == n) | (gy == 0) | (gy == n)
        c[(gy * np1 + gx)[on_boundary]] = self.h
        self._constraint = c
        self._aug_dim = self.n_nodes + 1

        # Load vector: element-midpoint quadrature of the forcing.
        xm = (i + 0.5) * self.h
        ym = (j + 0.5) * self.h
        fe = _forcing(xm, ym) * self.h**2 / 4.0
        self._load = np.zeros(self._aug_dim)
        np.add.at(self._load, self.elem_dofs, fe[:, None])

        # Sensor interpolation matrix: an s x s interior grid at
        # (i/(s+1), j/(s+1)); the benchmark default is the 5 x 5 grid.
        g = sensor_grid + 1
        pts = [(a / g, b / g) for b in range(1, sensor_grid + 1)
               for a in range(1, sensor_grid + 1)]
        self.sensor_points = np.array(pts)
        self._S = self._interp_matrix(self.sensor_points)

    def _interp_matrix(self, points: np.ndarray) -> sp.csr_matrix:
        np1 = self.n + 1
        rows, cols, vals = [], [], []
        for k, (x, y) in enumerate(points):
            ex = min(int(x / self.h), self.n - 1)
            ey = min(int(y / self.h), self.n - 1)
            s = x / self.h - ex
            t = y / self.h - ey
            nodes = [ey * np1 + ex, ey * np1 + ex + 1,
                     (ey + 1) * np1 + ex + 1, (ey + 1) * np1 + ex]
            w = [(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t]
            rows += [k] * 4
            cols += nodes
            vals += w
        return sp.csr_matrix((vals, (rows, cols)),
                             shape=(len(points), self._aug_dim))

    def _assemble(self, kappa: np.ndarray) -> sp.csc_matrix:
        data = (kappa[:, None] * self._k_flat).ravel()
        rows = np.concatenate([self._rows, np.arange(self.n_nodes),
                               np.full(self.n_nodes, self.n_nodes)])
        cols = np.concatenate([self._cols, np.full(self.n_nodes, self.n_nodes),
                               np.arange(self.n_nodes)])
        data = np.concatenate([data, self._constraint, self._constraint])
        return sp.coo_matrix((data, (rows, cols)),
                             shape=(self._aug_dim, self._aug_dim)).tocsc()

    # -- forward-model primitives ---------------------------------------

    def _forward(self, u):
        if np.abs(u).max() > 50.0:
            raise ForwardSolveError("log-conductivity out of range (|u| > 50)")
        kappa = np.exp(u)
        M = self._assemble(kappa)
        try:
            lu = splu(M)
        except RuntimeError as exc:  # singular augmented system
            raise ForwardSolveError(f"stiffness factorization failed: {exc}") from exc
        p = lu.solve(self._load)
        if not np.all(np.isfinite(p)):
            raise ForwardSolveError("non-finite pressure solution")
        # Per-element K_unit @ p_e, reused by tangent and adjoint solves.
        p_e = p[self.elem_dofs]
        kp = p_e @ _K_UNIT.T
        state = {"kappa": kappa, "lu": lu, "p": p, "kp": kp}
        return self._S @ p, state

    def _jac_apply(self, state, du):
        dkappa = state["kappa"] * np.asarray(du, float)
        rhs = np.zeros(self._aug_dim)
        np.add.at(rhs, self.elem_dofs, -dkappa[:, None] * state["kp"])
        return self._S @ state["lu"].solve(rhs)

    def _jac_t_apply(self, state, w):
        lam = state["lu"].solve(self._S.T @ np.asarray(w, float))
        lam_e = lam[self.elem_dofs]
        return -state["kappa"] * np.einsum("ij,ij->i", lam_e, state["kp"])

    def element_midpoints(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="ij")
        return np.column_stack([
            (i.ravel(order="F") + 0.5) * self.h,
            (j.ravel(order="F") + 0.5) * self.h,
        ])


def elliptic_midpoint_prior(n: int, sigma_u: float = 1.25, s0: float = 0.0625):
    """Exponential-kernel prior evaluated at the element midpoints."""
    h = 1.0 / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pts = np.column_stack([
        (i.ravel(order="F") + 0.5) * h,
        (j.ravel(order="F") + 0.5) * h,
    ])
    return build_factor(("exponential", pts, sigma_u, s0))


def elliptic_problem(n: int = 40, snr: float = 10.0, sigma_u: float = 1.25,
                     s0: float = 0.0625, truth_seed: int = 2026,
                     noise_seed: int = 1, add_noise: bool = True,
                     sensor_grid: int = 5):
    """Build the elliptic benchmark with synthetic data.

    The ground truth is a fixed-seed prior draw scaled by 1.2 (slightly
    outside the bulk of the prior); the noise level is set from the
    signal-to-noise ratio as sigma = max |noise-free output| / snr.  Returns
    the lazily imported ``SyntheticProblem`` bundle.
    """
    from . import SyntheticProblem

    prior = elliptic_midpoint_prior(n, sigma_u, s0)
    bare = EllipticModel(n, prior, None, sensor_grid=sensor_grid)
    rng = np.random.default_rng(truth_seed)
    u_true = 1.2 * prior.apply_sqrt(rng.standard_normal(prior.dim))
    d_true = bare.forward_u(u_true)
    sigma = float(np.abs(d_true).max() / snr)
    y = d_true.copy()
    if add_noise:
        y += sigma * np.random.default_rng(noise_seed).standard_normal(d_true.size)
    obs = ObservationSet(y, sigma**2, meta={"sensors": bare.sensor_points})
    model = EllipticModel(n, prior, obs, sensor_grid=sensor_grid)
    return SyntheticProblem(model=model, u_true=u_true,
                            v_true=prior.whiten(u_true).values,
                            d_true=d_true, sigma=sigma)
