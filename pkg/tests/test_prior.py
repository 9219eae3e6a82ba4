"""Prior factors, whitening maps, and the mixing diagnostic.

Oracle notes: matrix identities are checked against dense numpy linear
algebra ([DERIVED]); closed-form kernel values are asserted directly
([TRIVIAL]).
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dilimcmc import (
    FunctionVector,
    brownian_covariance,
    build_factor,
    exponential_kernel,
    onsager_machlup,
)
from dilimcmc.prior import BrownianFactor


def random_spd(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T + n * np.eye(n))


class TestFunctionVector:
    def test_space_tag_round_trip(self):
        fv = FunctionVector(np.arange(3.0), "u")
        assert fv.require("u") is fv.values
        with pytest.raises(ValueError, match="coordinate mismatch"):
            fv.require("v")

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            FunctionVector(np.ones((2, 2)))
        with pytest.raises(ValueError):
            FunctionVector(np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            FunctionVector(np.ones(2), "q")


class TestPriorFactor:
    def test_factor_reconstructs_covariance(self):
        # [DERIVED] L L^T must equal the input covariance.
        C = random_spd(7, seed=0)
        prior = build_factor(C)
        assert np.allclose(prior.covariance(), C, atol=1e-10)
        assert np.allclose(prior.apply_sqrt(prior.apply_sqrt_t(np.eye(7))), C)

    def test_whiten_unwhiten_inverse(self):
        prior = build_factor(random_spd(5, seed=1), mean=np.arange(5.0))
        u = np.array([0.3, -1.2, 4.0, 0.0, 2.5])
        v = prior.whiten(u)
        assert v.space == "v"
        back = prior.unwhiten(v)
        assert np.allclose(back.values, u, atol=1e-10)

    def test_whiten_requires_native_tag(self):
        prior = build_factor(np.eye(3))
        with pytest.raises(ValueError, match="coordinate mismatch"):
            prior.whiten(FunctionVector(np.zeros(3), "v"))

    def test_reference_shift(self):
        # [DERIVED] v_ref = L^{-1} m_ref and the reference point whitens to 0.
        prior = build_factor(random_spd(4, seed=2), mean=np.ones(4))
        m_ref = np.array([0.5, -1.0, 2.0, 0.1])
        shifted = prior.with_reference(m_ref)
        assert np.allclose(shifted.apply_sqrt(shifted.v_ref), m_ref, atol=1e-10)
        assert np.allclose(shifted.whiten(shifted.u_ref).values, 0.0, atol=1e-10)
        # original factor is untouched
        assert np.allclose(prior.v_ref, 0.0)

    def test_sample_moments(self):
        # [DERIVED] empirical covariance of prior draws approaches L L^T.
        C = random_spd(3, seed=3, scale=0.5)
        prior = build_factor(C, mean=np.array([1.0, -2.0, 0.0]))
        rng = np.random.default_rng(42)
        draws = np.array([prior.sample(rng).values for _ in range(20000)])
        assert np.allclose(draws.mean(axis=0), prior.mean, atol=0.1)
        assert np.allclose(np.cov(draws.T), C, atol=0.2)

    def test_rejects_invalid_covariance(self):
        with pytest.raises(ValueError, match="not symmetric"):
            build_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError, match="positive"):
            build_factor(np.diag([1.0, -1.0]))


class TestBrownianFactor:
    def test_matches_dense_covariance(self):
        # [DERIVED] cumulative-sum factor reproduces min(t_i, t_j).
        n, dt = 17, 0.3
        prior = build_factor(("brownian", n, dt))
        assert isinstance(prior, BrownianFactor)
        assert np.allclose(prior.covariance(), brownian_covariance(n, dt))

    def test_fast_actions_match_dense(self):
        n, dt = 11, 0.05
        prior = build_factor(("brownian", n, dt))
        L = np.tril(np.full((n, n), np.sqrt(dt)))
        rng = np.random.default_rng(0)
        x = rng.standard_normal(n)
        assert np.allclose(prior.apply_sqrt(x), L @ x)
        assert np.allclose(prior.apply_sqrt_t(x), L.T @ x)
        assert np.allclose(prior.apply_inv_sqrt(x), np.linalg.solve(L, x))


class TestKernels:
    def test_exponential_kernel_values(self):
        # [TRIVIAL] sigma^2 on the diagonal, sigma^2 exp(-d / (2 s0)) off it.
        pts = np.array([[0.0, 0.0], [0.3, 0.4]])
        K = exponential_kernel(pts, sigma=2.0, s0=0.1)
        assert np.allclose(np.diag(K), 4.0)
        assert np.isclose(K[0, 1], 4.0 * np.exp(-0.5 / 0.2))

    def test_kernel_factor_is_usable(self):
        pts = np.linspace(0, 1, 30)[:, None]
        prior = build_factor(("exponential", pts, 1.25, 0.0625))
        assert np.allclose(prior.covariance(),
                           exponential_kernel(pts, 1.25, 0.0625), atol=1e-8)


class TestOnsagerMachlup:
    def test_formula(self):
        # [TRIVIAL] misfit + ||v + v_ref||^2, no half on the quadratic.
        prior = build_factor(np.eye(3), m_ref=np.array([1.0, 0.0, 0.0]))
        v = np.array([0.5, -0.5, 2.0])
        expect = 1.7 + float((v + prior.v_ref) @ (v + prior.v_ref))
        assert np.isclose(onsager_machlup(prior, v, 1.7), expect)


@settings(deadline=None, max_examples=40)
@given(hnp.arrays(np.float64, st.integers(2, 8),
                  elements=st.floats(-50, 50)))
def test_whitening_round_trip_property(u):
    prior = build_factor(random_spd(u.size, seed=u.size),
                         mean=np.full(u.size, 0.7))
    back = prior.unwhiten(prior.whiten(u)).values
    assert np.allclose(back, u, atol=1e-8 * max(1.0, np.abs(u).max()))
