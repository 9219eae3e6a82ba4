"""Chain drivers: mode search against the analytic linear-Gaussian posterior,
Metropolis-Hastings cost contracts, reproducibility, and the adaptation
state machine.
"""

import numpy as np
import pytest

from dilimcmc import (
    AdaptationSchedule,
    build_pcn,
    map_estimate,
    mh_step,
    run_adaptive_dili,
    run_adaptive_mwg,
    run_fixed,
)

from test_forward import make_linear


def analytic_posterior(model):
    """[DERIVED] whitened posterior of a linear-Gaussian model:
    mean (H+I)^{-1} (L^T G^T C^{-1} (y - G u_ref) - v_ref), cov (H+I)^{-1}."""
    H = model.dense_whitened_gnh()
    n = model.dim
    Lm = np.column_stack([model.prior.apply_sqrt(e) for e in np.eye(n)])
    rhs = Lm.T @ model.G.T @ ((model.obs.y - model.G @ model.prior.u_ref)
                              / model.obs.noise_var) - model.prior.v_ref
    cov = np.linalg.inv(H + np.eye(n))
    return cov @ rhs, cov


class TestMapEstimate:
    def test_matches_analytic_mean(self):
        model = make_linear(n=6, m=4, seed=60)
        mean, _ = analytic_posterior(model)
        res = map_estimate(model)
        assert res.converged
        assert np.allclose(res.v, mean, atol=1e-5)

    def test_with_reference_shift(self):
        model = make_linear(n=5, m=3, seed=61).recentered(
            np.array([0.4, -0.2, 1.0, 0.0, 0.3]))
        mean, _ = analytic_posterior(model)
        res = map_estimate(model)
        assert res.converged
        assert np.allclose(res.v, mean, atol=1e-5)

    def test_reports_non_convergence(self):
        model = make_linear(n=6, m=4, seed=62)
        res = map_estimate(model, max_iter=0)
        assert not res.converged


class TestMhStep:
    def test_single_forward_eval_per_step(self):
        model = make_linear(n=4, m=2, seed=63)
        ops = build_pcn(0.8, 4)
        ev = model.evaluate(np.zeros(4))
        base = model.n_forward
        rng = np.random.default_rng(0)
        for _ in range(50):
            ev, _, _ = mh_step(model, ev, ops, rng)
        assert model.n_forward == base + 50
        assert model.n_gradient == 0  # pCN never touches the gradient

    def test_alpha_in_unit_interval(self):
        model = make_linear(n=4, m=2, seed=64)
        ops = build_pcn(0.5, 4)
        ev = model.evaluate(np.zeros(4))
        rng = np.random.default_rng(1)
        alphas = [mh_step(model, ev, ops, rng)[1] for _ in range(100)]
        assert all(0.0 <= a <= 1.0 for a in alphas)


class TestRunFixed:
    def test_reproducible(self):
        model = make_linear(n=4, m=2, seed=65)
        r1 = run_fixed(model, build_pcn(0.8, 4), np.zeros(4), 200, seed=3)
        r2 = run_fixed(make_linear(n=4, m=2, seed=65), build_pcn(0.8, 4),
                       np.zeros(4), 200, seed=3)
        assert np.array_equal(r1.misfit, r2.misfit)
        assert np.array_equal(r1.samples, r2.samples)

    def test_trace_shapes_and_thinning(self):
        model = make_linear(n=4, m=2, seed=66)
        rec = run_fixed(model, build_pcn(0.8, 4), np.zeros(4), 100, thin=7)
        assert rec.n_iter == 100
        assert rec.samples.shape == (14, 4)
        assert np.array_equal(rec.sample_iterations, 7 * np.arange(1, 15) - 1)
        assert rec.omf.shape == (100,)

    def test_posterior_moments_short(self):
        # [DERIVED] chain means approach the analytic posterior (loose; the
        # full six-proposal exactness check lives in the acceptance suite).
        model = make_linear(n=2, m=2, seed=67)
        mean, cov = analytic_posterior(model)
        rec = run_fixed(model, build_pcn(0.7, 2), mean, 40000, seed=4, thin=2)
        est = rec.samples[2000:].mean(axis=0)
        assert np.allclose(est, mean, atol=4 * np.sqrt(np.diag(cov)) / 20)


class TestAdaptiveDrivers:
    def test_dili_runs_and_records(self):
        model = make_linear(n=8, m=4, seed=68)
        sched = AdaptationSchedule(n_lag=25, n_b=10, n_max=3, delta_lis=0.0)
        rec = run_adaptive_dili(model, np.zeros(8), 120, seed=5,
                                schedule=sched)
        assert rec.lis_state is not None
        assert rec.psi_r is not None
        # basis-change distances recorded exactly at the update iterations
        upd = np.nonzero(~np.isnan(rec.d_f))[0]
        assert np.array_equal(upd, [24, 49, 74])  # frozen after n_max = 3
        assert np.all(rec.lis_dim > 0)

    def test_dili_freezes_on_small_distance(self):
        # a linear model has a constant Hessian: updates change nothing, so
        # a loose threshold freezes adaptation after two consecutive small
        # basis-change distances.
        model = make_linear(n=8, m=4, seed=69)
        sched = AdaptationSchedule(n_lag=20, n_b=10, n_max=100, delta_lis=1e-3)
        rec = run_adaptive_dili(model, np.zeros(8), 200, seed=6,
                                schedule=sched)
        assert np.count_nonzero(~np.isnan(rec.d_f)) == 2

    def test_mwg_two_evals_per_iteration(self):
        model = make_linear(n=8, m=4, seed=70)
        sched = AdaptationSchedule(n_lag=50, n_max=1, delta_lis=0.0)
        rec = run_adaptive_mwg(model, np.zeros(8), 60, seed=7, schedule=sched)
        # one initial evaluation plus exactly two per iteration
        assert rec.n_forward == 1 + 2 * 60

    def test_mwg_reproducible(self):
        args = dict(seed=8, schedule=AdaptationSchedule(n_lag=30, n_max=2))
        r1 = run_adaptive_mwg(make_linear(n=6, m=3, seed=71), np.zeros(6),
                              100, **args)
        r2 = run_adaptive_mwg(make_linear(n=6, m=3, seed=71), np.zeros(6),
                              100, **args)
        assert np.array_equal(r1.samples, r2.samples)
        assert np.array_equal(r1.d_f, r2.d_f, equal_nan=True)

    def test_unknown_kind_rejected(self):
        model = make_linear(n=4, m=2, seed=72)
        with pytest.raises(ValueError, match="kind"):
            run_adaptive_dili(model, np.zeros(4), 10, kind="nope")
