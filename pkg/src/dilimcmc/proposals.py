"""Operator-weighted MCMC proposals on whitened function space.

A proposal moves the whitened state v by

    v' = A v - G grad_eta(v) + B xi,      xi ~ N(0, I),

where A, B, G share an orthonormal eigenbasis.  Here the basis splits into a
finite likelihood-informed block (explicit N x r basis with per-direction
eigenvalue triples) and its orthogonal complement (scalar eigenvalues), so
all applications cost O(N r) and the complement basis is never materialized.

The module provides the well-definedness validation (boundedness, the
partial-update consistency rule, and the square-summability condition that
guarantees dimension independence), the general log acceptance ratio, its
simplified form for prior-reversible operators, and constructors for the
six proposal families used by the samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProposalOperators",
    "ValidationResult",
    "validate",
    "propose",
    "acceptance_log_ratio",
    "acceptance_log_ratio_simplified",
    "condition4_sum",
    "ProposalContractError",
    "build_li_prior",
    "build_li_langevin",
    "build_mgli",
    "build_pcn",
    "build_h_langevin",
    "PROPOSAL_KINDS",
]

PROPOSAL_KINDS = ("pcn-rw", "h-langevin", "li-prior", "li-langevin",
                  "mgli-prior", "mgli-langevin")


class ProposalContractError(RuntimeError):
    """A proposal moved the state in a direction its operators froze."""


@dataclass(frozen=True)
class ProposalOperators:
    """Spectral representation of the proposal operators A, B, G.

    ``basis`` is an N x r matrix with orthonormal columns; ``a``, ``b``,
    ``g`` are the eigenvalue triples on those columns, and the ``*_perp``
    scalars are the (uniform) eigenvalues on the orthogonal complement.
    """

    basis: np.ndarray
    a: np.ndarray
    b: np.ndarray
    g: np.ndarray
    a_perp: float
    b_perp: float
    g_perp: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        basis = np.asarray(self.basis, float)
        if basis.ndim != 2:
            raise ValueError("basis must be an N x r matrix")
        r = basis.shape[1]
        for name in ("a", "b", "g"):
            arr = np.asarray(getattr(self, name), float)
            if arr.shape != (r,):
                raise ValueError(f"{name} must have length {r}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "basis", basis)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def needs_gradient(self) -> bool:
        return bool(np.any(self.g != 0.0)) or self.g_perp != 0.0

    @property
    def is_prior_reversible(self) -> bool:
        """True when A^2 + B^2 = I on every moving direction and G = 0, in
        which case the simplified acceptance ratio applies exactly."""
        if self.needs_gradient:
            return False
        ok_lis = np.all(np.abs(self.a**2 + self.b**2 - 1.0) <= 1e-12)
        perp_frozen = self.b_perp == 0.0 and self.a_perp == 1.0
        ok_perp = perp_frozen or abs(self.a_perp**2 + self.b_perp**2 - 1.0) <= 1e-12
        return bool(ok_lis and ok_perp)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = ()
    condition4_tail: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(ops: ProposalOperators, bound: float = 1e8,
             b_floor: float = 1e-14) -> ValidationResult:
    """Check the well-definedness conditions for operator-weighted proposals.

    The four conditions are: (1) all eigenvalues real and bounded; (2) any
    direction with b_i = 0 must have a_i = 1 and g_i = 0 (partial update);
    (3) nonzero b_i bounded away from zero; (4) sum (a_i^2 + b_i^2 - 1)^2
    finite, which in the discretization limit requires a^2 + b^2 = 1 on the
    complement.  Returns all violations found (empty tuple means valid).
    """
    violations = []
    triples = np.stack([ops.a, ops.b, ops.g]) if ops.rank else np.zeros((3, 0))
    if not np.all(np.isfinite(triples)) or (triples.size and np.abs(triples).max() > bound):
        violations.append(("condition-1", "eigenvalues not finite/bounded"))
    perp = (ops.a_perp, ops.b_perp, ops.g_perp)
    if not all(np.isfinite(perp)) or max(abs(x) for x in perp) > bound:
        violations.append(("condition-1", "complement eigenvalues not finite/bounded"))

    zero_b = ops.b == 0.0
    bad2 = zero_b & ((ops.a != 1.0) | (ops.g != 0.0))
    if np.any(bad2):
        i = int(np.argmax(bad2))
        violations.append(("condition-2",
                           f"index {i}: b=0 but (a, g)=({ops.a[i]:g}, {ops.g[i]:g})"))
    if ops.b_perp == 0.0 and (ops.a_perp != 1.0 or ops.g_perp != 0.0):
        violations.append(("condition-2",
                           f"complement: b=0 but (a, g)=({ops.a_perp:g}, {ops.g_perp:g})"))

    nz = ops.b[~zero_b]
    if nz.size and np.abs(nz).min() < b_floor:
        violations.append(("condition-3", "nonzero b not bounded away from zero"))
    if ops.b_perp != 0.0 and abs(ops.b_perp) < b_floor:
        violations.append(("condition-3", "complement b not bounded away from zero"))

    tail = (ops.a_perp**2 + ops.b_perp**2 - 1.0) ** 2
    perp_frozen = ops.b_perp == 0.0 and ops.a_perp == 1.0
    if not perp_frozen and tail > 1e-24:
        violations.append(("condition-4",
                           f"complement a^2+b^2-1 = {ops.a_perp**2 + ops.b_perp**2 - 1.0:g}: "
                           "the square sum grows with the discretization dimension"))
    return ValidationResult(tuple(violations), tail)


def condition4_sum(ops: ProposalOperators, dim: int) -> float:
    """Finite-dimensional sum (a_i^2 + b_i^2 - 1)^2 over all directions."""
    lis = float(np.sum((ops.a**2 + ops.b**2 - 1.0) ** 2))
    tail = (dim - ops.rank) * (ops.a_perp**2 + ops.b_perp**2 - 1.0) ** 2
    return lis + tail


def _split(ops: ProposalOperators, x: np.ndarray):
    """Coefficients on the LIS basis and the complement remainder of x."""
    w = ops.basis.T @ x
    return w, x - ops.basis @ w


def propose(v: np.ndarray, grad: np.ndarray | None, ops: ProposalOperators,
            rng: np.random.Generator) -> np.ndarray:
    """Draw a candidate v' = A v - G grad + B xi.

    Uses a single N-dimensional standard normal draw split into its LIS and
    complement parts, so the complement basis is never formed.
    """
    v = np.asarray(v, float)
    if ops.needs_gradient and grad is None:
        raise ValueError(f"proposal {ops.label!r} requires the whitened gradient")
    w, v_perp = _split(ops, v)
    xi = rng.standard_normal(v.size)
    xw, xi_perp = _split(ops, xi)

    out = ops.a_perp * v_perp + ops.basis @ (ops.a * w)
    out += ops.b_perp * xi_perp + ops.basis @ (ops.b * xw)
    if ops.needs_gradient:
        gw, g_perp = _split(ops, np.asarray(grad, float))
        out -= ops.basis @ (ops.g * gw) + ops.g_perp * g_perp
    return out


def _check_frozen(ops: ProposalOperators, v, vp, tol=1e-10):
    """Directions with b = 0 are conditioned on and must not move."""
    dw, d_perp = _split(ops, np.asarray(vp, float) - np.asarray(v, float))
    frozen = ops.b == 0.0
    if np.any(frozen) and np.abs(dw[frozen]).max() > tol:
        raise ProposalContractError(
            "state moved along a frozen LIS direction "
            f"(max displacement {np.abs(dw[frozen]).max():g})"
        )
    if ops.b_perp == 0.0 and np.linalg.norm(d_perp) > tol:
        raise ProposalContractError(
            f"state moved in the frozen complement (norm {np.linalg.norm(d_perp):g})"
        )


def _rho(ops: ProposalOperators, v, vp, misfit, grad, v_ref):
    """One side of the general log acceptance ratio.

    All inner products are restricted to the subspace where b != 0; frozen
    directions are conditioned on and cancel exactly.
    """
    val = -misfit - float(np.asarray(v_ref, float) @ v)

    w, v_perp = _split(ops, v)
    wp, vp_perp = _split(ops, vp)
    moving = ops.b != 0.0
    if np.any(moving):
        a, b = ops.a[moving], ops.b[moving]
        coeff = (a**2 + b**2 - 1.0) / b**2
        val -= 0.5 * float(np.sum(coeff * w[moving] ** 2))
    if ops.b_perp != 0.0:
        c_perp = (ops.a_perp**2 + ops.b_perp**2 - 1.0) / ops.b_perp**2
        if c_perp != 0.0:
            val -= 0.5 * c_perp * float(v_perp @ v_perp)

    if ops.needs_gradient:
        gw, g_perp = _split(ops, np.asarray(grad, float))
        if np.any(moving):
            a, b, g = ops.a[moving], ops.b[moving], ops.g[moving]
            bg = g * gw[moving] / b
            step = (wp[moving] - a * w[moving]) / b
            val -= float(bg @ step) + 0.5 * float(bg @ bg)
        if ops.g_perp != 0.0 and ops.b_perp != 0.0:
            bg = (ops.g_perp / ops.b_perp) * g_perp
            step = (vp_perp - ops.a_perp * v_perp) / ops.b_perp
            val -= float(bg @ step) + 0.5 * float(bg @ bg)
    return val


def acceptance_log_ratio(v, vp, eval_v, eval_vp, ops: ProposalOperators,
                         v_ref=None) -> float:
    """General log acceptance ratio rho(v', v) - rho(v, v').

    ``eval_v`` / ``eval_vp`` are the model evaluations at the current and
    candidate points (gradients are only accessed when G != 0).
    """
    v = np.asarray(v, float)
    vp = np.asarray(vp, float)
    v_ref = np.zeros(v.size) if v_ref is None else v_ref
    _check_frozen(ops, v, vp)
    grad_v = eval_v.grad_v if ops.needs_gradient else None
    grad_vp = eval_vp.grad_v if ops.needs_gradient else None
    forth = _rho(ops, v, vp, eval_v.misfit, grad_v, v_ref)
    back = _rho(ops, vp, v, eval_vp.misfit, grad_vp, v_ref)
    return back - forth


def acceptance_log_ratio_simplified(v, vp, eval_v, eval_vp, v_ref=None) -> float:
    """Simplified ratio eta(v) - eta(v') + <v_ref, v - v'>, exact whenever
    A^2 + B^2 = I on all moving directions and G = 0."""
    v = np.asarray(v, float)
    vp = np.asarray(vp, float)
    val = eval_v.misfit - eval_vp.misfit
    if v_ref is not None and np.any(v_ref):
        val += float(np.asarray(v_ref, float) @ (v - vp))
    return val


# -- constructors ------------------------------------------------------------

def _cn_scalar(dtau: float) -> float:
    """Crank-Nicolson mixing scalar (2 - dtau) / (2 + dtau)."""
    if dtau <= 0:
        raise ValueError("time step must be positive")
    return (2.0 - dtau) / (2.0 + dtau)


def build_li_prior(psi_r: np.ndarray, d_r: np.ndarray, dtau_lis: float,
                   dtau_perp: float) -> ProposalOperators:
    """Proposal with a Crank-Nicolson step of the covariance-preconditioned
    Langevin SDE on the likelihood-informed block and a pCN step on the
    complement; leaves the (shifted) prior invariant."""
    d_r = np.asarray(d_r, float)
    if dtau_lis <= 0 or dtau_perp <= 0:
        raise ValueError("time steps must be positive")
    a = (2.0 - dtau_lis * d_r) / (2.0 + dtau_lis * d_r)
    b = np.sqrt(np.maximum(1.0 - a**2, 0.0))
    a_perp = _cn_scalar(dtau_perp)
    return ProposalOperators(psi_r, a, b, np.zeros_like(a), a_perp,
                             np.sqrt(1.0 - a_perp**2), 0.0, label="li-prior")


def build_li_langevin(psi_r: np.ndarray, d_r: np.ndarray, dtau_lis: float,
                      dtau_perp: float, step_cap: float = 1.5
                      ) -> ProposalOperators:
    """Explicit Langevin discretization on the likelihood-informed block
    (gradient used there), pCN on the complement.

    The per-direction step dtau * d_i is clamped at ``step_cap``: beyond
    dtau * d_i = 2 the explicit discretization has |a_i| >= 1 and the chain
    diverges (inflated early-adaptation variance estimates would otherwise
    destabilize the sampler).  The clamp changes only the proposal, never
    the stationary distribution.
    """
    d_r = np.asarray(d_r, float)
    if dtau_lis <= 0 or dtau_perp <= 0:
        raise ValueError("time steps must be positive")
    if not 0 < step_cap < 2:
        raise ValueError("step_cap must lie in (0, 2)")
    s = np.minimum(dtau_lis * d_r, step_cap)
    a = 1.0 - s
    b = np.sqrt(2.0 * s)
    g = s
    a_perp = _cn_scalar(dtau_perp)
    return ProposalOperators(psi_r, a, b, g, a_perp,
                             np.sqrt(1.0 - a_perp**2), 0.0, label="li-langevin")


def build_mgli(psi_r: np.ndarray, d_r: np.ndarray, dtau_lis: float,
               dtau_perp: float, langevin: bool):
    """Metropolis-within-Gibbs pair: an update of the likelihood-informed
    coefficients holding the complement fixed, and vice versa.

    Returns ``(lis_ops, cs_ops)``.  The LIS block uses the prior-reversible
    or Langevin triple; the complement update is a pure pCN move that leaves
    the LIS coefficients untouched.
    """
    base = (build_li_langevin if langevin else build_li_prior)(
        psi_r, d_r, dtau_lis, dtau_perp)
    r = base.rank
    lis_ops = ProposalOperators(psi_r, base.a, base.b, base.g,
                                a_perp=1.0, b_perp=0.0, g_perp=0.0,
                                label="mgli-langevin-lis" if langevin else "mgli-prior-lis")
    cs_ops = ProposalOperators(psi_r, np.ones(r), np.zeros(r), np.zeros(r),
                               a_perp=base.a_perp, b_perp=base.b_perp, g_perp=0.0,
                               label="mgli-cs")
    return lis_ops, cs_ops


def build_pcn(a: float, dim: int) -> ProposalOperators:
    """Prior-preconditioned Crank-Nicolson random walk: v' = a v + sqrt(1-a^2) xi."""
    if not -1.0 < a < 1.0:
        raise ValueError("pCN mixing parameter must lie in (-1, 1)")
    empty = np.zeros(0)
    return ProposalOperators(np.zeros((dim, 0)), empty, empty, empty,
                             a_perp=float(a), b_perp=float(np.sqrt(1.0 - a**2)),
                             g_perp=0.0, label="pcn-rw")


def build_h_langevin(psi_m: np.ndarray, d_m: np.ndarray, dtau: float
                     ) -> ProposalOperators:
    """Explicit Langevin proposal preconditioned by the inverse of
    (misfit Hessian at the posterior mode + identity), using a low-rank
    Hessian decomposition (psi_m, d_m).

    Per direction with Hessian eigenvalue lam: a = 1 - dtau/(lam+1),
    b = sqrt(2 dtau / (lam+1)), g = dtau/(lam+1); off the basis lam = 0.
    Not dimension independent (a^2 + b^2 - 1 = dtau^2/(lam+1)^2 > 0
    everywhere); kept as a benchmark.
    """
    if dtau <= 0:
        raise ValueError("time step must be positive")
    d_m = np.asarray(d_m, float)
    shrink = 1.0 / (d_m + 1.0)
    a = 1.0 - dtau * shrink
    b = np.sqrt(2.0 * dtau * shrink)
    g = dtau * shrink
    return ProposalOperators(psi_m, a, b, g,
                             a_perp=1.0 - dtau, b_perp=float(np.sqrt(2.0 * dtau)),
                             g_perp=dtau, label="h-langevin")
