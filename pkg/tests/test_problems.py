"""Benchmark problems: discretization identities, adjoint consistency, and
synthetic-data conventions.

Adjoint consistency is the inner-product test <J z, w> = <z, J^T w>
([DERIVED]); limits with known closed forms are checked exactly.
"""

import numpy as np
import pytest

from dilimcmc import (
    diffusion_problem,
    elliptic_problem,
    gradient_fd_check,
    jacobian_fd_check,
)
from dilimcmc.forward import ForwardSolveError
from dilimcmc.problems.diffusion import DiffusionModel
from dilimcmc.prior import build_factor


def adjoint_consistency(model, v, seed=0):
    """Max relative error of <J L z, w> vs <z, L^T J^T w> over 5 pairs."""
    rng = np.random.default_rng(seed)
    ev = model.evaluate(v)
    worst = 0.0
    for _ in range(5):
        z = rng.standard_normal(model.dim)
        w = rng.standard_normal(model.obs.size)
        jz = model.jac_whitened(ev, z)
        jtw = model.prior.apply_sqrt_t(model._jac_t_apply(ev.state, w))
        a, b = float(jz @ w), float(z @ jtw)
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-30))
    return worst


@pytest.fixture(scope="module")
def elliptic_prob():
    return elliptic_problem(n=10)


@pytest.fixture(scope="module")
def diffusion_prob():
    return diffusion_problem(n=200)


class TestElliptic:
    @pytest.fixture()
    def prob(self, elliptic_prob):
        return elliptic_prob

    def test_dimensions(self, prob):
        assert prob.model.dim == 100
        assert prob.model.obs.size == 25

    def test_pressure_constraint(self, prob):
        # [DERIVED] the boundary integral of the solution vanishes.
        ev = prob.model.evaluate(prob.v_true)
        p = ev.state["p"]
        assert abs(prob.model._constraint @ p[:-1]) < 1e-10 * np.abs(p).max()

    def test_uniform_conductivity_scaling(self, prob):
        # [DERIVED] p(kappa = c) = p(kappa = 1) / c, so outputs scale as 1/c.
        m = prob.model
        d1 = m.forward_u(np.zeros(100))
        d2 = m.forward_u(np.full(100, np.log(3.0)))
        assert np.allclose(d2, d1 / 3.0, atol=1e-12)

    def test_adjoint_consistency(self, prob):
        assert adjoint_consistency(prob.model, prob.v_true) < 1e-12

    def test_finite_difference_checks(self, prob):
        rng = np.random.default_rng(1)
        v = 0.5 * rng.standard_normal(100)
        rel, _ = jacobian_fd_check(prob.model, v, rng.standard_normal(100))
        assert rel < 1e-6
        assert gradient_fd_check(prob.model, v, rng.standard_normal(100)) < 1e-6

    def test_noise_free_truth_has_zero_misfit(self):
        prob = elliptic_problem(n=8, add_noise=False)
        assert prob.model.evaluate(prob.v_true).misfit < 1e-16

    def test_snr_sets_noise_level(self, prob):
        # [TRIVIAL] sigma = max |noise-free output| / SNR
        assert np.isclose(prob.sigma, np.abs(prob.d_true).max() / 10.0)
        prob50 = elliptic_problem(n=8, snr=50.0)
        prob10 = elliptic_problem(n=8, snr=10.0)
        assert prob50.sigma < prob10.sigma

    def test_out_of_range_parameter_raises(self, prob):
        with pytest.raises(ForwardSolveError):
            prob.model.forward_u(np.full(100, 60.0))

    def test_sensor_grid(self, prob):
        pts = prob.model.sensor_points
        assert pts.shape == (25, 2)
        assert np.isclose(pts.min(), 1 / 6) and np.isclose(pts.max(), 5 / 6)


class TestDiffusion:
    @pytest.fixture()
    def prob(self, diffusion_prob):
        return diffusion_prob

    def test_dimensions(self, prob):
        assert prob.model.dim == 200
        assert prob.model.obs.size == 20
        assert np.allclose(prob.model.obs.meta["times"],
                           np.arange(1, 21) * 0.5)

    def test_zero_drift_limit(self):
        # [DERIVED] with beta = 0 the state equals the driving path, so the
        # outputs are the path at the observation indices.
        n = 100
        prior = build_factor(("brownian", n, 0.1))
        obs_idx = 10 * np.arange(1, 11)
        m = DiffusionModel(prior, None, 0.1, beta=0.0, obs_idx=obs_idx)
        u = np.random.default_rng(2).standard_normal(n).cumsum()
        assert np.allclose(m.forward_u(u), u[obs_idx - 1], atol=1e-14)

    def test_path_recursion(self, prob):
        # [DERIVED] one step of the recursion recomputed in numpy.
        m = prob.model
        p = m.path(prob.u_true)
        beta, dt = m.beta, m.dt
        q = p[:-1] ** 2
        drift = beta * p[:-1] * (1 - q) / (1 + q)
        du = np.diff(prob.u_true, prepend=0.0)
        assert np.allclose(p[1:], p[:-1] + drift * dt + du, atol=1e-12)

    def test_adjoint_consistency(self, prob):
        assert adjoint_consistency(prob.model, prob.v_true, seed=3) < 1e-12

    def test_finite_difference_checks(self, prob):
        rng = np.random.default_rng(4)
        rel, _ = jacobian_fd_check(prob.model, prob.v_true,
                                   rng.standard_normal(200))
        assert rel < 1e-6
        assert gradient_fd_check(prob.model, prob.v_true,
                                 rng.standard_normal(200)) < 1e-5

    def test_noise_free_truth_has_zero_misfit(self):
        prob = diffusion_problem(n=100, add_noise=False)
        assert prob.model.evaluate(prob.v_true).misfit < 1e-16

    def test_data_initial_guess_reaches_data_basin(self, prob):
        v0 = prob.model.prior.whiten(prob.model.data_initial_guess()).values
        guess_misfit = prob.model.evaluate(v0).misfit
        zero_misfit = prob.model.evaluate(np.zeros(200)).misfit
        assert guess_misfit < zero_misfit / 10

    def test_requires_divisible_observation_count(self):
        with pytest.raises(ValueError, match="multiple"):
            diffusion_problem(n=130, n_obs=20)
