"""Sampler shoot-out on the conditioned-diffusion problem.

A nonlinear SDE path is inferred from 20 noisy point observations.  Three
samplers target the same posterior:

  * pCN           — prior-reversible random walk, dimension-independent
                    but slow to traverse the data-informed directions;
  * H-Langevin    — Langevin move preconditioned with the local curvature
                    at the mode (fast locally, degrades with dimension);
  * MGLI-Langevin — Metropolis-within-Gibbs over the adaptively built
                    likelihood-informed subspace and its complement.

Run:  python3 demos/03_diffusion_samplers.py  (~1 min)
"""

import numpy as np

from dilimcmc import (
    build_h_langevin,
    build_pcn,
    diffusion_problem,
    integrated_autocorrelation_time,
    local_gnh_eig,
    map_estimate,
    run_adaptive_mwg,
    run_fixed,
)

prob = diffusion_problem(n=500)
model = prob.model
print(f"conditioned diffusion: {model.dim} path increments, "
      f"{model.obs.size} observations, noise sigma {prob.sigma:.2f}")

# All samplers start from the posterior mode, found from a data-driven
# initial guess (the zero path sits on an unstable drift equilibrium).
v0 = model.prior.whiten(model.data_initial_guess()).values
res = map_estimate(model, v0=v0)
print(f"posterior mode: misfit {res.evaluation.misfit:.2f} "
      f"after {res.n_iter} Gauss-Newton steps")

n_iter, burn = 20_000, 4_000


def report(name, rec):
    iact = integrated_autocorrelation_time(rec.omf[burn:])
    print(f"  {name:14s} acceptance {rec.acceptance_rate:.2f}   "
          f"objective IACT {iact:6.1f}")


print(f"\n{n_iter} iterations each:")

mc = model.recentered(res.v)
report("pCN", run_fixed(mc, build_pcn(0.96, model.dim),
                        np.zeros(model.dim), n_iter, seed=5))

mc = model.recentered(res.v)
ev = mc.evaluate(np.zeros(model.dim))
phi, lam = local_gnh_eig(mc, ev, rho_local=0.1, dense_cutoff=0)
report("H-Langevin", run_fixed(mc, build_h_langevin(phi, lam, 0.1),
                               np.zeros(model.dim), n_iter, seed=5))

mc = model.recentered(res.v)
rec = run_adaptive_mwg(mc, np.zeros(model.dim), n_iter, kind="li-langevin",
                       seed=5)
report("MGLI-Langevin", rec)
print(f"\nadapted subspace dimension: {int(rec.lis_dim[-1])} "
      f"of {model.dim}")
print("The subspace sampler takes informed Langevin steps only where the")
print("data matter and cheap prior-reversible steps everywhere else, so it")
print("mixes far faster than pCN at the same budget.  H-Langevin can still")
print("compete at this resolution; refine the path (n=1000 and beyond) and")
print("its acceptance rate collapses while the other two are unaffected.")
