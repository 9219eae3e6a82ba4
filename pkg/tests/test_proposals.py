"""Operator-weighted proposals: validation rules, the draw itself, both
acceptance-ratio evaluators, and the named constructors.

The key oracle is dense detailed balance ([DERIVED]): the log acceptance
ratio must equal log pi(v') q(v' -> v) - log pi(v) q(v -> v') computed with
explicit Gaussian transition densities, for gradient-free and gradient-using
operators alike.
"""

import numpy as np
import pytest

from dilimcmc import (
    ProposalOperators,
    acceptance_log_ratio,
    acceptance_log_ratio_simplified,
    build_h_langevin,
    build_li_langevin,
    build_li_prior,
    build_mgli,
    build_pcn,
    condition4_sum,
    propose,
    validate,
)
from dilimcmc.proposals import ProposalContractError

from test_forward import make_linear


def basis(n, r, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, r)))
    return Q


def dense_operators(ops, n):
    """Dense A, B, G from the spectral representation ([TRIVIAL] expansion)."""
    P = ops.basis @ ops.basis.T
    Pc = np.eye(n) - P
    def dense(vals, perp):
        return (ops.basis * vals) @ ops.basis.T + perp * Pc
    return (dense(ops.a, ops.a_perp), dense(ops.b, ops.b_perp),
            dense(ops.g, ops.g_perp))


class TestValidate:
    def test_pcn_is_valid(self):
        assert validate(build_pcn(0.7, 10)).ok

    def test_li_builders_are_valid(self):
        psi = basis(8, 3)
        d = np.array([2.0, 1.0, 0.3])
        assert validate(build_li_prior(psi, d, 0.5, 0.2)).ok
        assert validate(build_li_langevin(psi, d, 0.3, 0.2)).ok
        for ops in build_mgli(psi, d, 0.5, 0.2, langevin=False):
            assert validate(ops).ok

    def test_frozen_direction_rule(self):
        # b = 0 demands a = 1 and g = 0.
        ops = ProposalOperators(basis(6, 1), np.array([0.5]), np.array([0.0]),
                                np.array([0.0]), 1.0, 0.1)
        bad = validate(ops)
        assert not bad.ok
        assert bad.violations[0][0] == "condition-2"

    def test_unbounded_rejected(self):
        ops = ProposalOperators(basis(6, 1), np.array([np.inf]),
                                np.array([1.0]), np.array([0.0]), 1.0, 0.0)
        assert any(v[0] == "condition-1" for v in validate(ops).violations)

    def test_h_langevin_fails_square_summability(self):
        # [PAPER]-direction check: the curvature-preconditioned Langevin
        # benchmark has (a_perp^2 + b_perp^2 - 1)^2 = dtau^4 per direction,
        # so the sum grows linearly with dimension.
        dtau = 0.3
        ops = build_h_langevin(basis(10, 2), np.array([4.0, 1.0]), dtau)
        res = validate(ops)
        assert any(v[0] == "condition-4" for v in res.violations)
        n = 1000
        tail = condition4_sum(ops, n)
        assert np.isclose(tail, (n - 2) * dtau**4 +
                          np.sum((ops.a**2 + ops.b**2 - 1.0) ** 2))


class TestPropose:
    def test_matches_dense_affine_map(self):
        # [DERIVED] the split O(Nr) draw equals v' = A v - G grad + B xi
        # with dense operators and the same normal draw.
        n = 9
        ops = build_li_langevin(basis(n, 3, seed=1),
                                np.array([1.5, 0.8, 0.4]), 0.3, 0.2)
        A, B, G = dense_operators(ops, n)
        rng = np.random.default_rng(5)
        v = rng.standard_normal(n)
        grad = rng.standard_normal(n)
        xi = np.random.default_rng(99).standard_normal(n)
        vp = propose(v, grad, ops, np.random.default_rng(99))
        assert np.allclose(vp, A @ v - G @ grad + B @ xi, atol=1e-12)

    def test_gradient_required(self):
        ops = build_li_langevin(basis(6, 2), np.array([1.0, 0.5]), 0.3, 0.2)
        with pytest.raises(ValueError, match="gradient"):
            propose(np.zeros(6), None, ops, np.random.default_rng(0))

    def test_pcn_moments(self):
        # [DERIVED] v' = a v + sqrt(1-a^2) xi has mean a v, var 1-a^2.
        ops = build_pcn(0.6, 4)
        rng = np.random.default_rng(7)
        v = np.array([1.0, -2.0, 0.5, 0.0])
        draws = np.array([propose(v, None, ops, rng) for _ in range(20000)])
        assert np.allclose(draws.mean(axis=0), 0.6 * v, atol=0.03)
        assert np.allclose(draws.var(axis=0), 1 - 0.36, atol=0.03)

    def test_mgli_sub_steps_freeze_their_block(self):
        psi = basis(8, 2, seed=2)
        lis_ops, cs_ops = build_mgli(psi, np.array([1.0, 0.4]), 0.5, 0.3,
                                     langevin=False)
        rng = np.random.default_rng(3)
        v = rng.standard_normal(8)
        vp = propose(v, None, lis_ops, rng)
        # complement untouched by the LIS sub-step
        perp = lambda x: x - psi @ (psi.T @ x)
        assert np.allclose(perp(vp), perp(v), atol=1e-12)
        vq = propose(v, None, cs_ops, rng)
        assert np.allclose(psi.T @ vq, psi.T @ v, atol=1e-12)


class TestAcceptanceRatio:
    def _balance_oracle(self, model, ops, seed):
        """Dense detailed-balance reference for the log acceptance ratio."""
        n = model.dim
        A, B, G = dense_operators(ops, n)
        rng = np.random.default_rng(seed)
        v = 0.5 * rng.standard_normal(n)
        ev = model.evaluate(v)
        vp = propose(v, ev.grad_v if ops.needs_gradient else None, ops, rng)
        evp = model.evaluate(vp)

        v_ref = model.prior.v_ref
        def log_pi(e):
            return -e.misfit - 0.5 * float(e.v @ e.v) - float(v_ref @ e.v)
        B2inv = np.linalg.inv(B @ B)
        def log_q(e_from, to):
            mu = A @ e_from.v - G @ e_from.grad_v
            d = to - mu
            return -0.5 * float(d @ (B2inv @ d))
        expect = (log_pi(evp) + log_q(evp, v)) - (log_pi(ev) + log_q(ev, vp))
        got = acceptance_log_ratio(v, vp, ev, evp, ops, v_ref)
        return got, expect

    @pytest.mark.parametrize("seed", range(5))
    def test_general_ratio_detailed_balance_gradient_free(self, seed):
        # [DERIVED] all directions moving, G = 0, nonzero reference shift.
        model = make_linear(n=6, m=3, seed=40)
        model = model.recentered(0.3 * np.ones(6))
        ops = build_li_prior(basis(6, 2, seed=41), np.array([1.2, 0.5]),
                             0.4, 0.3)
        got, expect = self._balance_oracle(model, ops, seed)
        assert np.isclose(got, expect, atol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_general_ratio_detailed_balance_with_gradient(self, seed):
        model = make_linear(n=6, m=3, seed=42)
        ops = build_li_langevin(basis(6, 2, seed=43), np.array([1.0, 0.4]),
                                0.3, 0.25)
        got, expect = self._balance_oracle(model, ops, seed)
        assert np.isclose(got, expect, atol=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_h_langevin_detailed_balance(self, seed):
        model = make_linear(n=5, m=3, seed=44)
        ops = build_h_langevin(basis(5, 2, seed=45), np.array([3.0, 1.0]), 0.2)
        got, expect = self._balance_oracle(model, ops, seed)
        assert np.isclose(got, expect, atol=1e-9)

    def test_simplified_equals_general_for_prior_reversible(self):
        # [PAPER] the simplified form is exact when A^2 + B^2 = I, G = 0.
        model = make_linear(n=7, m=4, seed=46).recentered(
            0.2 * np.arange(7.0))
        ops = build_li_prior(basis(7, 3, seed=47),
                             np.array([2.0, 1.0, 0.3]), 0.6, 0.2)
        rng = np.random.default_rng(48)
        for _ in range(20):
            v = rng.standard_normal(7)
            ev = model.evaluate(v)
            vp = propose(v, None, ops, rng)
            evp = model.evaluate(vp)
            g = acceptance_log_ratio(v, vp, ev, evp, ops, model.prior.v_ref)
            s = acceptance_log_ratio_simplified(v, vp, ev, evp,
                                                model.prior.v_ref)
            assert abs(g - s) <= 1e-12 * max(1.0, abs(s))

    def test_frozen_displacement_raises(self):
        ops, _ = build_mgli(basis(6, 2, seed=49), np.array([1.0, 0.5]),
                            0.5, 0.3, langevin=False)
        model = make_linear(n=6, m=3, seed=50)
        v = np.zeros(6)
        vp = np.ones(6)  # moves the frozen complement
        ev, evp = model.evaluate(v), model.evaluate(vp)
        with pytest.raises(ProposalContractError):
            acceptance_log_ratio(v, vp, ev, evp, ops)


class TestBuilders:
    def test_li_prior_triple(self):
        # [PAPER] a = (2 - dtau d)/(2 + dtau d), a^2 + b^2 = 1, g = 0.
        d = np.array([3.0, 0.5])
        ops = build_li_prior(basis(6, 2), d, 0.4, 0.2)
        assert np.allclose(ops.a, (2 - 0.4 * d) / (2 + 0.4 * d))
        assert np.allclose(ops.a**2 + ops.b**2, 1.0)
        assert np.isclose(ops.a_perp**2 + ops.b_perp**2, 1.0)
        assert ops.is_prior_reversible

    def test_li_langevin_triple(self):
        # [PAPER] a = 1 - dtau d, b = sqrt(2 dtau d), g = dtau d.
        d = np.array([2.0, 0.8])
        ops = build_li_langevin(basis(6, 2), d, 0.3, 0.2)
        assert np.allclose(ops.a, 1 - 0.3 * d)
        assert np.allclose(ops.b, np.sqrt(0.6 * d))
        assert np.allclose(ops.g, 0.3 * d)
        assert not ops.is_prior_reversible

    def test_li_langevin_step_clamp(self):
        # dtau * d = 2.5 would give |a| > 1; the clamp keeps the triple stable.
        ops = build_li_langevin(basis(6, 1), np.array([5.0]), 0.5, 0.2)
        assert np.isclose(ops.a[0], 1.0 - 1.5)
        assert np.isclose(ops.b[0], np.sqrt(3.0))
        assert np.isclose(ops.g[0], 1.5)
        assert validate(ops).ok

    def test_h_langevin_triple(self):
        # [PAPER] per direction: a = 1 - dtau/(lam+1), b = sqrt(2 dtau/(lam+1)),
        # g = dtau/(lam+1); off-basis lam = 0.
        lam = np.array([4.0, 1.0])
        ops = build_h_langevin(basis(8, 2), lam, 0.2)
        s = 1.0 / (lam + 1.0)
        assert np.allclose(ops.a, 1 - 0.2 * s)
        assert np.allclose(ops.b, np.sqrt(0.4 * s))
        assert np.allclose(ops.g, 0.2 * s)
        assert np.isclose(ops.a_perp, 0.8)
        assert np.isclose(ops.b_perp, np.sqrt(0.4))
        assert np.isclose(ops.g_perp, 0.2)

    def test_pcn_bounds(self):
        with pytest.raises(ValueError):
            build_pcn(1.0, 5)
        with pytest.raises(ValueError):
            build_li_prior(basis(4, 1), np.array([1.0]), -0.1, 0.2)
