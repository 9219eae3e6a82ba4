"""Building the likelihood-informed subspace (LIS) step by step.

The data inform only a low-dimensional subspace of the whitened parameter
space: the dominant eigenspace of the expected prior-preconditioned
Gauss-Newton Hessian.  This script assembles that subspace by hand on a
small elliptic inverse problem — local curvature decompositions at a few
posterior samples, folded into a running expectation — and inspects how
the basis stabilizes.

Run:  python3 demos/02_subspace_construction.py  (~30 s)
"""

import numpy as np

from dilimcmc import (
    ExpectedGnhState,
    build_li_prior,
    elliptic_problem,
    forstner_distance,
    local_gnh_eig,
    map_estimate,
    run_fixed,
    update_lis,
)

prob = elliptic_problem(n=12)
model = prob.model
print(f"elliptic problem: {model.dim} parameters, {model.obs.size} sensors")

# --- posterior mode and the local subspace there ----------------------------
res = map_estimate(model, v0=np.zeros(model.dim))
model = model.recentered(res.v)
ev = model.evaluate(np.zeros(model.dim))
phi, lam = local_gnh_eig(model, ev, rho_local=0.1)
print(f"\nlocal curvature at the mode: {lam.size} directions with "
      f"eigenvalue >= 0.1, largest {lam[0]:.1f}")

# --- average local decompositions along a short chain -----------------------
# The operator constructors take per-direction posterior *variances*; the
# Gaussian approximation at the mode gives 1/(lambda + 1).
ops = build_li_prior(phi, 1.0 / (lam + 1.0), 0.5, 0.5)
state = ExpectedGnhState.empty(model.dim, rho_keep=1e-4)
state, theta_r, xi_r = update_lis(state, phi, lam, rho_global=0.1)

prev = (theta_r, xi_r)
rec = run_fixed(model, ops, np.zeros(model.dim), 1000, seed=1, thin=50)
print("\n update | LIS dim | basis change d_F")
for k, v in enumerate(rec.samples):
    ev = model.evaluate(v)
    phi, lam = local_gnh_eig(model, ev, rho_local=0.1)
    state, theta_r, xi_r = update_lis(state, phi, lam, rho_global=0.1)
    d_f = forstner_distance(*prev, theta_r, xi_r)
    prev = (theta_r, xi_r)
    print(f" {k + 1:6d} | {xi_r.size:7d} | {d_f:.3e}")

print(f"\nretained expectation basis rank: {state.theta.shape[1]}")
print("leading expected eigenvalues:",
      np.array2string(state.xi[:6], precision=2))
print("\nThe change distance shrinks as the running average converges; the")
print("adaptive drivers automate exactly this loop and freeze the basis")
print("once the distance falls below a threshold.")
