"""Forward-model contract shared by every inverse problem in this package.

A model wraps a forward map F, an observation set, and a prior factor, and
exposes everything the samplers need in whitened coordinates:

- ``evaluate(v)``      -> outputs, data misfit, and (lazily) the whitened
                          gradient of the misfit,
- ``gnh_apply(ev, z)`` -> matrix-free action of the Gauss-Newton misfit
                          Hessian at the evaluation point,
- finite-difference checks used by the test suites.

Subclasses implement the three primitive maps ``_forward``, ``_jac_apply``
and ``_jac_t_apply`` in native (u) coordinates; whitening is handled here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .prior import FunctionVector, PriorFactor, V_SPACE, _as_values

__all__ = ["ObservationSet", "ModelEvaluation", "ForwardModel", "LinearModel",
           "jacobian_fd_check", "gradient_fd_check"]


class ForwardSolveError(RuntimeError):
    """Raised when the underlying forward solver fails; carries diagnostics."""


@dataclass(frozen=True)
class ObservationSet:
    """Observed data with diagonal Gaussian noise.

    ``noise_var`` is the (positive) diagonal of the noise covariance; both
    benchmark problems use sigma^2 I.  ``meta`` records sensor locations or
    observation times.
    """

    y: np.ndarray
    noise_var: np.ndarray
    meta: Any = None

    def __post_init__(self):
        y = np.asarray(self.y, float)
        nv = np.broadcast_to(np.asarray(self.noise_var, float), y.shape).copy()
        if np.any(nv <= 0) or not np.all(np.isfinite(nv)):
            raise ValueError("noise variances must be positive and finite")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise_var", nv)

    @property
    def size(self) -> int:
        return self.y.size


class ModelEvaluation:
    """Forward evaluation at a whitened point: outputs, misfit, cached state.

    The whitened gradient is computed on first access through one adjoint
    solve and cached, so random-walk proposals never pay for it.
    """

    def __init__(self, model: "ForwardModel", v: np.ndarray, outputs: np.ndarray,
                 state: Any):
        self.model = model
        self.v = v
        self.outputs = outputs
        self.state = state
        r = outputs - model.obs.y
        self.residual = r
        self.misfit = 0.5 * float(r @ (r / model.obs.noise_var))
        self._grad_v = None

    @property
    def grad_v(self) -> np.ndarray:
        """Whitened misfit gradient L^T J^T C_obs^{-1} (F(u) - y)."""
        if self._grad_v is None:
            self.model.n_gradient += 1
            wr = self.residual / self.model.obs.noise_var
            gu = self.model._jac_t_apply(self.state, wr)
            self._grad_v = self.model.prior.apply_sqrt_t(gu)
        return self._grad_v


class ForwardModel:
    """Base class tying together forward map, observations, and prior.

    Subclasses provide, in native coordinates:

    - ``_forward(u) -> (outputs, state)``
    - ``_jac_apply(state, du) -> d_outputs``
    - ``_jac_t_apply(state, w) -> J^T w``

    Instances count forward/gradient evaluations (``n_forward``,
    ``n_gradient``) so cost contracts are testable.  Configuration is
    immutable; per-evaluation scratch lives in the evaluation's state.
    """

    def __init__(self, prior: PriorFactor, obs: ObservationSet):
        self.prior = prior
        self.obs = obs
        self.n_forward = 0
        self.n_gradient = 0

    # subclass primitives ------------------------------------------------
    def _forward(self, u: np.ndarray):
        raise NotImplementedError

    def _jac_apply(self, state, du: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jac_t_apply(self, state, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # public contract ----------------------------------------------------
    @property
    def dim(self) -> int:
        return self.prior.dim

    def with_prior(self, prior: PriorFactor) -> "ForwardModel":
        """Shallow copy bound to a different prior factor (same geometry and
        observations); evaluation counters start at zero."""
        import copy

        if prior.dim != self.prior.dim:
            raise ValueError("prior dimension mismatch")
        other = copy.copy(self)
        other.prior = prior
        other.n_forward = 0
        other.n_gradient = 0
        return other

    def recentered(self, v_center: np.ndarray) -> "ForwardModel":
        """Copy whose whitening reference sits at the given whitened point
        (typically the posterior mode), so the point maps to v = 0.

        Prior-reversible proposals contract toward v = 0; re-centering makes
        that the high-probability region.  The reference shift enters the
        acceptance ratio through the prior's ``v_ref``.
        """
        u_center = self.prior.unwhiten(np.asarray(v_center, float)).values
        return self.with_prior(self.prior.with_reference(u_center - self.prior.mean))

    def forward_u(self, u: np.ndarray) -> np.ndarray:
        """Outputs at a native-space point (data synthesis; no caching)."""
        outputs, _ = self._forward(np.asarray(u, float))
        return outputs

    def evaluate(self, v) -> ModelEvaluation:
        """Evaluate the model at a whitened point."""
        vv = _as_values(v, V_SPACE)
        if vv.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {vv.shape}")
        u = self.prior.unwhiten(vv).values
        self.n_forward += 1
        outputs, state = self._forward(u)
        return ModelEvaluation(self, vv, outputs, state)

    def gnh_apply(self, evaluation: ModelEvaluation, z: np.ndarray) -> np.ndarray:
        """Action of the whitened Gauss-Newton misfit Hessian at the
        evaluation point: L^T J^T C_obs^{-1} J L z.

        One Jacobian-vector and one adjoint-vector product; the data residual
        never enters.
        """
        if evaluation.model is not self:
            raise ValueError("evaluation does not belong to this model")
        du = self.prior.apply_sqrt(np.asarray(z, float))
        dout = self._jac_apply(evaluation.state, du)
        back = self._jac_t_apply(evaluation.state, dout / self.obs.noise_var)
        return self.prior.apply_sqrt_t(back)

    def jac_whitened(self, evaluation: ModelEvaluation, z: np.ndarray) -> np.ndarray:
        """Whitened Jacobian action J L z (finite-difference checks)."""
        du = self.prior.apply_sqrt(np.asarray(z, float))
        return self._jac_apply(evaluation.state, du)


class LinearModel(ForwardModel):
    """Forward map F(u) = G u; Hessian is constant and densely checkable."""

    def __init__(self, G: np.ndarray, prior: PriorFactor, obs: ObservationSet):
        super().__init__(prior, obs)
        self.G = np.asarray(G, float)
        if self.G.shape != (obs.size, prior.dim):
            raise ValueError("operator shape does not match observations/prior")

    def _forward(self, u):
        return self.G @ u, None

    def _jac_apply(self, state, du):
        return self.G @ du

    def _jac_t_apply(self, state, w):
        return self.G.T @ w

    def dense_whitened_gnh(self) -> np.ndarray:
        """Dense L^T G^T C_obs^{-1} G L (oracle for eigendecomposition tests)."""
        GL = np.column_stack(
            [self.G @ self.prior.apply_sqrt(e) for e in np.eye(self.dim)]
        )
        return GL.T @ (GL / self.obs.noise_var[:, None])


def jacobian_fd_check(model: ForwardModel, v: np.ndarray, z: np.ndarray,
                      eps: float = 1e-5):
    """Relative error between a central finite difference of F along the
    whitened direction z and the Jacobian action J L z.

    Returns ``(rel_error, exact_norm_zero)``; when the Jacobian action has
    zero norm the first entry is the absolute error and the flag is set.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, float)
    z = np.asarray(z, float)
    ev = model.evaluate(v)
    jz = model.jac_whitened(ev, z)
    fp = model.evaluate(v + eps * z).outputs
    fm = model.evaluate(v - eps * z).outputs
    fd = (fp - fm) / (2.0 * eps)
    denom = np.linalg.norm(jz)
    err = np.linalg.norm(fd - jz)
    if denom == 0.0:
        return err, True
    return err / denom, False


def gradient_fd_check(model: ForwardModel, v: np.ndarray, z: np.ndarray,
                      eps: float = 1e-5) -> float:
    """Relative error of the whitened gradient against a central difference
    of the misfit along direction z."""
    v = np.asarray(v, float)
    z = np.asarray(z, float)
    g = model.evaluate(v).grad_v
    ep = model.evaluate(v + eps * z).misfit
    em = model.evaluate(v - eps * z).misfit
    fd = (ep - em) / (2.0 * eps)
    dg = float(g @ z)
    scale = max(abs(fd), abs(dg), 1e-300)
    return abs(fd - dg) / scale
