"""Markov chain drivers: Metropolis-Hastings stepping, posterior-mode search,
fixed-proposal chains, and the two adaptive likelihood-informed samplers.

The adaptive samplers interleave three activities:

1. ordinary MH steps with the current operator-weighted proposal,
2. periodic enrichment of the expected Gauss-Newton-Hessian basis with local
   curvature information (every ``n_lag`` iterations, until the basis
   stabilizes or the adaptation budget ``n_max`` is exhausted),
3. periodic refresh of the empirical posterior covariance restricted to that
   basis (every ``n_b`` iterations), which sets the per-direction time steps.

Both drivers return a :class:`ChainRecord` with thinned samples and full
per-iteration traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .forward import ForwardModel, ModelEvaluation
from .lowrank import (
    ExpectedGnhState,
    RunningCovariance,
    forstner_distance,
    local_gnh_eig,
    project_cov,
    update_cov,
    update_lis,
)
from .prior import onsager_machlup
from .proposals import (
    ProposalOperators,
    acceptance_log_ratio,
    acceptance_log_ratio_simplified,
    build_li_langevin,
    build_li_prior,
    build_mgli,
    propose,
)

__all__ = [
    "MapResult",
    "map_estimate",
    "mh_step",
    "ChainRecord",
    "AdaptationSchedule",
    "run_fixed",
    "run_adaptive_dili",
    "run_adaptive_mwg",
]


# -- posterior mode ----------------------------------------------------------

@dataclass(frozen=True)
class MapResult:
    """Outcome of the posterior-mode search (in whitened coordinates)."""

    v: np.ndarray
    evaluation: ModelEvaluation
    objective: float
    grad_norm: float
    n_iter: int
    converged: bool


def map_estimate(model: ForwardModel, v0=None, max_iter: int = 200,
                 tol: float = 1e-6, cg_tol: float = 1e-3,
                 max_step_halvings: int = 60) -> MapResult:
    """Find the posterior mode by an inexact Gauss-Newton iteration.

    Minimizes ``eta(v) + 0.5 ||v + v_ref||^2`` over whitened coordinates.
    Each step solves ``(H_gn + I) d = -(grad eta + v + v_ref)`` matrix-free
    with conjugate gradients and backtracks on the objective.  The returned
    result carries ``converged=False`` (rather than raising) when the
    gradient tolerance is not met within ``max_iter`` iterations.
    """
    n = model.dim
    v_ref = model.prior.v_ref
    v = np.zeros(n) if v0 is None else np.array(v0, float)

    def objective(ev):
        d = ev.v + v_ref
        return ev.misfit + 0.5 * float(d @ d)

    ev = model.evaluate(v)
    grad = ev.grad_v + v + v_ref
    # Relative tolerance, capped so a pathologically steep starting point
    # (gradient norm >> 1/tol) cannot make the test vacuous.
    gtol = tol * max(1.0, min(float(np.linalg.norm(grad)), 1.0 / tol))
    n_iter = 0
    converged = np.linalg.norm(grad) <= gtol
    while not converged and n_iter < max_iter:
        n_iter += 1
        op = LinearOperator(
            (n, n), matvec=lambda z, _ev=ev: model.gnh_apply(_ev, z) + z)
        d, _ = cg(op, -grad, rtol=cg_tol, maxiter=2 * n)
        if not np.all(np.isfinite(d)) or float(d @ grad) >= 0.0:
            # fall back to steepest descent, clipped to a searchable length
            d = -grad
        dn = float(np.linalg.norm(d))
        if dn > np.sqrt(n):
            d = d * (np.sqrt(n) / dn)
        f0 = objective(ev)
        step = 1.0
        for _ in range(max_step_halvings):
            try:
                trial = model.evaluate(v + step * d)
            except Exception:
                step *= 0.5
                continue
            if objective(trial) <= f0 + 1e-4 * step * float(grad @ d):
                break
            step *= 0.5
        else:
            break  # line search failed; report non-convergence below
        v = v + step * d
        ev = trial
        grad = ev.grad_v + v + v_ref
        converged = np.linalg.norm(grad) <= gtol
    return MapResult(v, ev, objective(ev), float(np.linalg.norm(grad)),
                     n_iter, bool(converged))


# -- single MH step ----------------------------------------------------------

def mh_step(model: ForwardModel, current: ModelEvaluation,
            ops: ProposalOperators, rng: np.random.Generator):
    """One Metropolis-Hastings step; returns ``(evaluation, alpha, accepted)``.

    Costs exactly one forward evaluation; the gradient at the candidate is
    only computed for gradient-using proposals (and is reused by the next
    step when the candidate is accepted).
    """
    v = current.v
    grad = current.grad_v if ops.needs_gradient else None
    vp = propose(v, grad, ops, rng)
    cand = model.evaluate(vp)
    v_ref = model.prior.v_ref
    if ops.is_prior_reversible:
        logr = acceptance_log_ratio_simplified(v, vp, current, cand, v_ref)
    else:
        logr = acceptance_log_ratio(v, vp, current, cand, ops, v_ref)
    alpha = float(np.exp(min(logr, 0.0)))
    if rng.random() < alpha:
        return cand, alpha, True
    return current, alpha, False


# -- chain bookkeeping -------------------------------------------------------

@dataclass
class ChainRecord:
    """Thinned samples plus full per-iteration traces of one chain."""

    samples: np.ndarray          # (n_kept, N) whitened states
    sample_iterations: np.ndarray
    misfit: np.ndarray
    omf: np.ndarray              # mixing diagnostic trace
    alpha: np.ndarray
    accepted: np.ndarray
    lis_dim: np.ndarray
    d_f: np.ndarray              # basis-change distance; NaN off update steps
    thin: int
    label: str = ""
    lis_state: ExpectedGnhState | None = None
    psi_r: np.ndarray | None = None
    d_r: np.ndarray | None = None
    n_forward: int = 0
    n_gradient: int = 0

    @property
    def n_iter(self) -> int:
        return self.misfit.size

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted))


class _Trace:
    def __init__(self, n_iter: int, dim: int, thin: int):
        self.misfit = np.empty(n_iter)
        self.omf = np.empty(n_iter)
        self.alpha = np.empty(n_iter)
        self.accepted = np.zeros(n_iter, dtype=bool)
        self.lis_dim = np.zeros(n_iter, dtype=np.int64)
        self.d_f = np.full(n_iter, np.nan)
        self.thin = thin
        kept = n_iter // thin
        self.samples = np.empty((kept, dim))
        self.sample_iterations = np.empty(kept, dtype=np.int64)
        self._k = 0

    def record(self, i, model, ev, alpha, accepted, lis_dim, d_f=np.nan):
        self.misfit[i] = ev.misfit
        self.omf[i] = onsager_machlup(model.prior, ev.v, ev.misfit)
        self.alpha[i] = alpha
        self.accepted[i] = accepted
        self.lis_dim[i] = lis_dim
        self.d_f[i] = d_f
        if (i + 1) % self.thin == 0 and self._k < self.samples.shape[0]:
            self.samples[self._k] = ev.v
            self.sample_iterations[self._k] = i
            self._k += 1

    def finish(self, model, label, **extra) -> ChainRecord:
        return ChainRecord(
            samples=self.samples[: self._k],
            sample_iterations=self.sample_iterations[: self._k],
            misfit=self.misfit, omf=self.omf, alpha=self.alpha,
            accepted=self.accepted, lis_dim=self.lis_dim, d_f=self.d_f,
            thin=self.thin, label=label,
            n_forward=model.n_forward, n_gradient=model.n_gradient, **extra)


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def run_fixed(model: ForwardModel, ops: ProposalOperators, v0, n_iter: int,
              seed=0, thin: int = 10) -> ChainRecord:
    """Run a chain with a fixed proposal (no adaptation)."""
    rng = _as_rng(seed)
    trace = _Trace(n_iter, model.dim, thin)
    ev = model.evaluate(np.asarray(v0, float))
    for i in range(n_iter):
        ev, alpha, accepted = mh_step(model, ev, ops, rng)
        trace.record(i, model, ev, alpha, accepted, ops.rank)
    return trace.finish(model, ops.label)


# -- adaptive drivers --------------------------------------------------------

@dataclass(frozen=True)
class AdaptationSchedule:
    """Tuning knobs of the adaptive likelihood-informed samplers.

    ``n_lag``    iterations between basis-enrichment attempts,
    ``n_b``      iterations between empirical-covariance refreshes,
    ``n_max``    basis updates budgeted before adaptation stops,
    ``delta_lis`` basis-change distance below which the basis is frozen,
    ``rho_local`` / ``rho_global`` / ``rho_keep``
                 truncation thresholds for the local curvature decomposition,
                 the global basis slice, and the retained expectation basis,
    ``variance_floor``
                 lower bound on empirical posterior variances used to build
                 proposal operators (prevents permanently frozen directions
                 early in the run; variances are also capped at the whitened
                 prior variance of one),
    ``max_rank`` cap on the retained basis rank (None = observation count).
    """

    n_lag: int = 200
    n_b: int = 50
    n_max: int = 1000
    delta_lis: float = 1e-5
    rho_local: float = 0.1
    rho_global: float = 0.1
    rho_keep: float = 1e-4
    variance_floor: float = 1e-2
    max_rank: int | None = None


class _LisAdapter:
    """Shared adaptation state machine for the two adaptive drivers."""

    def __init__(self, model, ev0, schedule: AdaptationSchedule, seed=0):
        self.model = model
        self.sched = schedule
        self.frozen = False
        self.n_updates = 0
        # Seed the basis with local curvature at the starting point.
        phi, lam = local_gnh_eig(model, ev0, schedule.rho_local,
                                 max_rank=schedule.max_rank, seed=seed)
        state = ExpectedGnhState.empty(model.dim, rho_keep=schedule.rho_keep)
        self.state, self.theta, self.xi = update_lis(
            state, phi, lam, rho_global=schedule.rho_global,
            max_rank=schedule.max_rank)
        # Seed the projected covariance with the Gaussian approximation at
        # the starting point, diag(1/(xi + 1)): proposals are then sized to
        # the posterior from the first iteration (an identity start makes
        # every informed move far too large when the data are tight, and a
        # stuck chain can freeze adaptation prematurely).  The seed counts
        # as two pseudo-samples and washes out as real samples accumulate.
        self.cov = RunningCovariance.from_moments(
            np.diag(1.0 / (self.xi + 1.0)), np.zeros(self.theta.shape[1]),
            count=2)
        self._small_streak = 0

    @property
    def lis_dim(self) -> int:
        return self.theta.shape[1]

    def observe(self, v: np.ndarray):
        """Accumulate the LIS coefficients of the current state."""
        if not self.frozen:
            self.cov.push(self.theta.T @ v)

    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        """Current (psi_r, d_r) pair from the accumulated covariance."""
        psi, d = update_cov(self.theta, self.cov.covariance)
        # Clamp to [floor, 1]: in whitened coordinates the data can only
        # contract the unit prior variance, so empirical estimates above one
        # are transients (e.g. drift of a still-equilibrating chain) that
        # would make the informed Langevin steps overshoot.
        return psi, np.clip(d, self.sched.variance_floor, 1.0)

    def enrich(self, ev) -> float:
        """Fold local curvature at ``ev`` into the basis; returns the
        basis-change distance (NaN if adaptation already stopped)."""
        if self.frozen:
            return np.nan
        phi, lam = local_gnh_eig(self.model, ev, self.sched.rho_local,
                                 max_rank=self.sched.max_rank,
                                 seed=self.n_updates + 1)
        old_theta, old_xi = self.theta, self.xi
        self.state, self.theta, self.xi = update_lis(
            self.state, phi, lam, rho_global=self.sched.rho_global,
            max_rank=self.sched.max_rank)
        d_f = forstner_distance(old_theta, old_xi, self.theta, self.xi)
        # Transfer second-moment information to the new basis.
        sigma_new = project_cov(old_theta, self.cov.covariance, self.theta)
        mean_new = self.theta.T @ (old_theta @ self.cov.mean)
        self.cov = RunningCovariance.from_moments(sigma_new, mean_new,
                                                  self.cov.count)
        self.n_updates += 1
        # Freeze on two *consecutive* small basis changes (a single small
        # distance can be an artifact of a chain that has not moved yet) or
        # when the update budget is exhausted.
        self._small_streak = (self._small_streak + 1
                              if d_f < self.sched.delta_lis else 0)
        if self._small_streak >= 2 or self.n_updates >= self.sched.n_max:
            self.frozen = True
        return d_f


def _builder(kind: str):
    if kind == "li-prior":
        return build_li_prior
    if kind == "li-langevin":
        return build_li_langevin
    raise ValueError(f"unknown likelihood-informed proposal kind {kind!r}")


def run_adaptive_dili(model: ForwardModel, v0, n_iter: int,
                      kind: str = "li-prior", dtau_lis: float = 0.1,
                      dtau_perp: float = 0.5, seed=0, thin: int = 10,
                      schedule: AdaptationSchedule | None = None) -> ChainRecord:
    """Adaptive chain with joint likelihood-informed/complement updates.

    One forward evaluation per iteration (plus curvature work on update
    steps).  ``kind`` selects the likelihood-informed block: ``"li-prior"``
    (prior-reversible) or ``"li-langevin"`` (gradient-using).
    """
    sched = schedule or AdaptationSchedule()
    rng = _as_rng(seed)
    build = _builder(kind)
    trace = _Trace(n_iter, model.dim, thin)

    ev = model.evaluate(np.asarray(v0, float))
    adapter = _LisAdapter(model, ev, sched, seed=0)
    psi, d = adapter.operators()
    ops = build(psi, d, dtau_lis, dtau_perp)

    for i in range(n_iter):
        ev, alpha, accepted = mh_step(model, ev, ops, rng)
        adapter.observe(ev.v)
        d_f = np.nan
        rebuild = False
        if not adapter.frozen and (i + 1) % sched.n_lag == 0:
            d_f = adapter.enrich(ev)
            rebuild = True
        if (i + 1) % sched.n_b == 0 or rebuild:
            psi, d = adapter.operators()
            ops = build(psi, d, dtau_lis, dtau_perp)
        trace.record(i, model, ev, alpha, accepted, adapter.lis_dim, d_f)

    psi, d = adapter.operators()
    return trace.finish(model, f"dili-{kind}", lis_state=adapter.state,
                        psi_r=psi, d_r=d)


def run_adaptive_mwg(model: ForwardModel, v0, n_iter: int,
                     kind: str = "li-prior", dtau_lis: float = 0.1,
                     dtau_perp: float = 0.5, seed=0, thin: int = 10,
                     schedule: AdaptationSchedule | None = None) -> ChainRecord:
    """Adaptive Metropolis-within-Gibbs chain.

    Each iteration performs two conditional updates — the likelihood-informed
    coefficients with the complement held exactly fixed, then the complement
    with the coefficients held fixed — at two forward evaluations per
    iteration.  The recorded ``alpha``/``accepted`` aggregate both sub-steps.
    """
    sched = schedule or AdaptationSchedule()
    rng = _as_rng(seed)
    langevin = kind == "li-langevin"
    if kind not in ("li-prior", "li-langevin"):
        raise ValueError(f"unknown likelihood-informed proposal kind {kind!r}")
    trace = _Trace(n_iter, model.dim, thin)

    ev = model.evaluate(np.asarray(v0, float))
    adapter = _LisAdapter(model, ev, sched, seed=0)
    psi, d = adapter.operators()
    lis_ops, cs_ops = build_mgli(psi, d, dtau_lis, dtau_perp, langevin)

    for i in range(n_iter):
        ev, a1, acc1 = mh_step(model, ev, lis_ops, rng)
        ev, a2, acc2 = mh_step(model, ev, cs_ops, rng)
        adapter.observe(ev.v)
        d_f = np.nan
        rebuild = False
        if not adapter.frozen and (i + 1) % sched.n_lag == 0:
            d_f = adapter.enrich(ev)
            rebuild = True
        if (i + 1) % sched.n_b == 0 or rebuild:
            psi, d = adapter.operators()
            lis_ops, cs_ops = build_mgli(psi, d, dtau_lis, dtau_perp, langevin)
        trace.record(i, model, ev, 0.5 * (a1 + a2), acc1 or acc2,
                     adapter.lis_dim, d_f)

    psi, d = adapter.operators()
    return trace.finish(model, f"mwg-{kind}", lis_state=adapter.state,
                        psi_r=psi, d_r=d)
