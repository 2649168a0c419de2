"""Exponential-weight integrals, observation diagonals, Beta function."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import specrec as sr
from specrec.errors import IllPosedModeError
from _util import rel_err, ulp_close

mp.mp.dps = 40

B1 = sr.ConstantWeight(1.0)

# frozen from the 40-digit oracle 1 - exp(-1)
ONE_MINUS_E_INV = 0.6321205588285577


class TestWeightFunctions:
    def test_constant(self):
        b = sr.ConstantWeight(2.5)
        assert b.value_at_zero == 2.5
        assert b.sign_certificate
        assert not b.is_zero
        assert sr.ConstantWeight(0.0).is_zero
        assert not sr.ConstantWeight(-1.0).sign_certificate

    def test_polynomial(self):
        b = sr.PolynomialWeight([1.0, 2.0])
        assert b.value_at_zero == 1.0
        assert b(1.0) == 3.0
        assert b.sign_certificate
        assert not sr.PolynomialWeight([1.0, -2.0]).sign_certificate

    def test_tabulated(self):
        b = sr.TabulatedWeight([0.0, 1.0, 2.0], [1.0, 3.0, 0.0])
        assert b(0.5) == 2.0
        assert b.sign_certificate
        with pytest.raises(sr.InvalidParameterError):
            sr.TabulatedWeight([0.0, 0.0], [1.0, 1.0])

    def test_fingerprints_distinguish(self):
        assert sr.ConstantWeight(1.0).fingerprint() \
            != sr.ConstantWeight(2.0).fingerprint()
        assert sr.ConstantWeight(1.0).fingerprint() \
            == sr.ConstantWeight(1.0).fingerprint()


class TestExpWeightIntegral:
    def test_lam_zero_constant(self):
        assert sr.exp_weight_integral(0.0, 2.0, B1) == 2.0

    def test_closed_form(self):
        got = sr.exp_weight_integral(-1.0, 1.0, B1)
        assert abs(got - ONE_MINUS_E_INV) < 1e-15

    def test_series_limit(self):
        # oracle: 40-digit evaluation of (exp(T*lam) - 1)/lam at lam = -1e-12
        want = float((mp.exp(mp.mpf("-1e-12")) - 1) / mp.mpf("-1e-12"))
        got = sr.exp_weight_integral(-1e-12, 1.0, B1)
        assert rel_err(got, want) < 1e-13

    @pytest.mark.parametrize("lam,T", [(-3.0, 2.0), (-0.1, 0.5), (2.0, 1.0)])
    def test_polynomial_vs_quadrature_oracle(self, lam, T):
        coeffs = [1.0, 2.0, -1.0, 0.5]
        b = sr.PolynomialWeight(coeffs)
        want = float(mp.quad(
            lambda t: (coeffs[0] + coeffs[1]*t + coeffs[2]*t**2
                       + coeffs[3]*t**3) * mp.exp(lam * t), [0, T]))
        assert rel_err(sr.exp_weight_integral(lam, T, b), want) < 1e-13

    def test_tabulated_vs_quadrature_oracle(self):
        b = sr.TabulatedWeight([0.0, 0.5, 1.0], [1.0, 2.0, 0.5])
        want = float(mp.quad(lambda t: (1 + 2*t) * mp.exp(-2*t), [0, mp.mpf("0.5")])
                     + mp.quad(lambda t: (3.5 - 3*t) * mp.exp(-2*t),
                               [mp.mpf("0.5"), 1]))
        assert rel_err(sr.exp_weight_integral(-2.0, 1.0, b), want) < 1e-12

    def test_tabulated_must_cover(self):
        b = sr.TabulatedWeight([0.0, 0.5], [1.0, 1.0])
        with pytest.raises(sr.InvalidParameterError):
            sr.exp_weight_integral(-1.0, 1.0, b)

    def test_invalid_horizon(self):
        with pytest.raises(sr.InvalidParameterError):
            sr.exp_weight_integral(-1.0, 0.0, B1)

    @settings(deadline=None, max_examples=40)
    @given(lam=st.floats(-40.0, 2.0), T=st.floats(0.05, 4.0))
    def test_constant_vs_oracle(self, lam, T):
        want = float(mp.quad(lambda t: mp.exp(mp.mpf(lam) * t), [0, mp.mpf(T)]))
        assert rel_err(sr.exp_weight_integral(lam, T, B1), want) < 1e-13

    def test_taylor_stability_near_zero(self):
        # 4-term Taylor expansion of the integral for b = 1
        for z in (1e-4, -1e-4, 1e-6, 1e-8, 1e-10):
            T = 1.0
            lam = z / T
            taylor = T * (1 + z/2 + z**2/6 + z**3/24)
            got = sr.exp_weight_integral(lam, T, B1)
            assert rel_err(got, taylor) < 1e-13


class TestTailWeight:
    def test_empty_interval(self):
        assert sr.tail_weight(-7.3, 1.0, 1.0, B1) == 0.0

    def test_lam_zero(self):
        assert sr.tail_weight(0.0, 0.5, 1.0, B1) == 0.5

    def test_full_interval_matches_integral(self):
        got = sr.tail_weight(-1.0, 0.0, 1.0, B1)
        assert abs(got - ONE_MINUS_E_INV) < 1e-15

    def test_polynomial_shift(self):
        b = sr.PolynomialWeight([1.0, 2.0, -1.0])
        want = float(mp.quad(
            lambda t: (1 + 2*t - t**2) * mp.exp(-3 * (t - mp.mpf("0.7"))),
            [mp.mpf("0.7"), 2]))
        assert rel_err(sr.tail_weight(-3.0, 0.7, 2.0, b), want) < 1e-13

    def test_out_of_range(self):
        with pytest.raises(sr.InvalidParameterError):
            sr.tail_weight(-1.0, -0.1, 1.0, B1)
        with pytest.raises(sr.InvalidParameterError):
            sr.tail_weight(-1.0, 1.5, 1.0, B1)

    @settings(deadline=None, max_examples=40)
    @given(lam=st.floats(-20.0, 1.0), s=st.floats(0.01, 0.99))
    def test_additivity(self, lam, s):
        # int_0^T = int_0^s + e^{s*lam} * int_s^T for constant weight
        T = 1.0
        whole = sr.exp_weight_integral(lam, T, B1)
        head = sr.exp_weight_integral(lam, s, B1)
        tail = sr.tail_weight(lam, s, T, B1)
        assert rel_err(head + math.exp(s * lam) * tail, whole) < 1e-12


class TestModeWeights:
    def test_cancellation_to_one(self):
        # oracle: exp(-1) + (1 - exp(-1)) = 1 by the closed-form sum
        op = sr.diagonal_operator([-1.0])
        w = sr.mode_weights(op, 1.0, B1, 1.0)
        assert ulp_close(w.betas[0], 1.0, 4)

    def test_trivial_weights(self):
        op = sr.diagonal_operator([0.0])
        w = sr.mode_weights(op, 0.0, B1, 2.0)
        assert w.betas[0] == 2.0
        assert w.phi0s[0] == 2.0

    def test_k_weights_constant_only(self):
        op = sr.diagonal_operator([-1.0])
        w = sr.mode_weights(op, 0.0, B1, 1.0)
        assert abs(w.ks[0] - ONE_MINUS_E_INV) < 1e-15
        wp = sr.mode_weights(op, 0.0, sr.PolynomialWeight([1.0]), 1.0)
        assert wp.ks is None

    def test_identity_decomposition(self):
        op = sr.build_second_order(8, 1.0, 0.0, "dirichlet")
        w = sr.mode_weights(op, 0.7, B1, 1.3)
        decay = np.exp(1.3 * op.eigenvalues)
        assert np.array_equal(w.betas, 0.7 * decay + w.phi0s)

    def test_positivity_certificate(self):
        # nonnegative weight, nonnegative a, dissipative modes -> positive betas
        op = sr.build_second_order(12, 1.0, 0.5, "dirichlet")
        for b in (B1, sr.PolynomialWeight([0.5, 1.0]),
                  sr.TabulatedWeight([0.0, 2.0], [1.0, 0.5])):
            assert b.sign_certificate
            w = sr.mode_weights(op, 0.3, b, 2.0)
            assert np.all(w.betas > 0)

    def test_monotone_in_eigenvalue(self):
        op = sr.build_second_order(10, 1.0, 0.0, "dirichlet")
        w = sr.mode_weights(op, 0.0, B1, 1.0)
        # eigenvalues decrease with j, so phi0 must too
        assert np.all(np.diff(w.phi0s) < 0)


class TestInverseDiagonal:
    def test_lam_zero_gives_inverse_horizon(self):
        op = sr.diagonal_operator([0.0])
        w = sr.mode_weights(op, 0.0, B1, 2.0)
        assert sr.phi_T_inverse_diagonal(w)[0] == 0.5

    def test_matches_closed_form(self):
        # oracle: lam/(exp(T*lam) - 1) at 40 digits = 1.581976706869326...
        op = sr.diagonal_operator([-1.0])
        w = sr.mode_weights(op, 0.0, B1, 1.0)
        got = sr.phi_T_inverse_diagonal(w)[0]
        assert rel_err(got, 1.5819767068693264) < 1e-15

    def test_unit_beta(self):
        op = sr.diagonal_operator([-1.0])
        w = sr.mode_weights(op, 1.0, B1, 1.0)
        assert ulp_close(sr.phi_T_inverse_diagonal(w)[0], 1.0, 4)

    def test_ill_posed_mode_flagged(self):
        # constructed kernel: a = -int b e^{-lam (T-t)} dt makes beta_1 = 0
        op = sr.diagonal_operator([-1.0, -4.0])
        a = -math.exp(1.0) * sr.exp_weight_integral(-1.0, 1.0, B1)
        w = sr.mode_weights(op, a, B1, 1.0)
        with pytest.raises(IllPosedModeError) as err:
            sr.phi_T_inverse_diagonal(w)
        assert err.value.modes == [1]


class TestBetaFunction:
    def test_unit(self):
        assert sr.beta_function(1.0, 1.0) == pytest.approx(1.0, rel=1e-14)

    def test_half_half_is_pi(self):
        assert sr.beta_function(0.5, 0.5) == pytest.approx(math.pi, rel=1e-13)

    def test_integers(self):
        # 1!*2!/4! = 1/12
        assert sr.beta_function(2.0, 3.0) == pytest.approx(1.0 / 12.0, rel=1e-13)

    def test_rejects_nonpositive(self):
        with pytest.raises(sr.InvalidParameterError):
            sr.beta_function(0.0, 1.0)
        with pytest.raises(sr.InvalidParameterError):
            sr.beta_function(1.0, -2.0)

    @settings(deadline=None, max_examples=60)
    @given(x=st.floats(1e-3, 10.0), y=st.floats(1e-3, 10.0))
    def test_accuracy_against_mpmath(self, x, y):
        want = float(mp.beta(mp.mpf(x), mp.mpf(y)))
        assert rel_err(sr.beta_function(x, y), want) < 1e-12
