"""Densities, transforms, semigroup and local-time moments.

Oracles are independent of the library's integration code: scipy's QUADPACK
``quad``/``dblquad`` over the closed-form densities, or textbook Gaussian
identities.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import erf

from skewloc.analytic import (
    ProcessParams,
    gaussian_kernel,
    joint_density_bm,
    joint_density_obm,
    localtime_moment,
    obm_density,
    semigroup_apply,
    skew_cdf,
    skew_density,
    stationary_average,
    std_normal_cdf,
    std_normal_pdf,
    transform_H,
    transition_cdf,
    transition_density,
)
from skewloc.errors import ConfigError, DivergenceError, NumericalError
from skewloc.kernels import (
    abs_increment_kernel,
    constant_kernel,
    crossing_kernel,
    weighted_crossing_kernel,
)
from skewloc.quadrature import QuadratureConfig

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
betas = st.floats(-0.95, 0.95)
scales = st.floats(0.3, 4.0)


def one(y):
    return np.ones_like(np.asarray(y, dtype=float))


# -- ProcessParams -------------------------------------------------------------


class TestProcessParams:
    @pytest.mark.parametrize("beta", [1.0, -1.0, 1.5, float("nan")])
    def test_beta_outside_open_interval_rejected(self, beta):
        with pytest.raises(ConfigError, match="open interval"):
            ProcessParams.skew(beta)

    @pytest.mark.parametrize("pair", [(0.0, 1.0), (1.0, -2.0), (float("inf"), 1.0)])
    def test_bad_sigmas_rejected(self, pair):
        with pytest.raises(ConfigError):
            ProcessParams.oscillating(*pair)

    def test_beta_sigma(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        assert p.beta_sigma == pytest.approx(-1.0 / 3.0)
        assert p.local_time_factor == pytest.approx(4.0 / 3.0)

    @given(betas)
    def test_canonical_round_trip_is_exact(self, beta):
        p = ProcessParams.skew(beta)
        osc = p.to_oscillating()
        assert (osc.sigma_minus, osc.sigma_plus) == (1 + beta, 1 - beta)
        assert osc.to_skew().beta == beta

    @given(scales, scales)
    def test_derived_beta_in_open_interval(self, a, b):
        beta = ProcessParams.oscillating(a, b).beta_sigma
        assert -1 < beta < 1

    def test_threshold_belongs_to_plus_side(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        assert p.sigma(0.0) == 2.0
        assert p.sigma(-1e-300) == 1.0


# -- normal CDF ----------------------------------------------------------------


class TestNormal:
    def test_examples(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(40.0) == pytest.approx(1.0, abs=1e-15)
        # high-precision reference for Phi(1)
        assert std_normal_cdf(1.0) == pytest.approx(0.841344746068543, abs=1e-14)

    @given(st.floats(-30, 30))
    def test_symmetry(self, x):
        assert std_normal_cdf(x) + std_normal_cdf(-x) == pytest.approx(1.0, abs=1e-15)

    @given(st.floats(-8, 8))
    def test_matches_erf(self, x):
        assert std_normal_cdf(x) == pytest.approx(0.5 * (1 + erf(x / math.sqrt(2))), abs=1e-14)

    def test_pdf(self):
        assert std_normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
        assert gaussian_kernel(4.0, 0.0) == pytest.approx(1 / math.sqrt(8 * math.pi))


# -- densities -----------------------------------------------------------------


class TestSkewDensity:
    def test_examples(self):
        assert skew_density(0.0, 1.0, 0.0, 0.0) == pytest.approx(0.398942280, abs=1e-9)
        assert skew_density(0.5, 1.0, 0.0, 1.0) == pytest.approx(1.5 * std_normal_pdf(1.0))
        assert skew_density(0.5, 1.0, 0.0, 1.0) == pytest.approx(0.362956, abs=1e-6)

    def test_sign_convention_at_zero(self):
        # sgn(0) = 0: the skew term vanishes at y = 0
        assert skew_density(0.7, 1.0, 0.3, 0.0) == pytest.approx(std_normal_pdf(0.3))

    @pytest.mark.parametrize("beta", [-0.9, 0.0, 0.9])
    @pytest.mark.parametrize("x", [-2.0, 0.0, 3.0])
    def test_normalised(self, beta, x):
        f = lambda y: skew_density(beta, 1.0, x, y)
        total = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 0, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("t", [0.0, -1.0])
    def test_nonpositive_time_rejected(self, t):
        with pytest.raises(ValueError):
            skew_density(0.1, t, 0.0, 0.0)

    @given(betas, st.floats(0.05, 4), st.floats(-3, 3), st.floats(-5, 5))
    def test_non_negative(self, beta, t, x, y):
        assert skew_density(beta, t, x, y) >= 0

    @given(betas, st.floats(0.1, 3), st.floats(-3, 3), st.floats(-4, 4))
    def test_cdf_is_integral_of_density(self, beta, t, x, y):
        f = lambda z: skew_density(beta, t, x, z)
        ref = integrate.quad(f, -np.inf, min(y, 0.0))[0] + (integrate.quad(f, 0.0, y)[0] if y > 0 else 0.0)
        assert skew_cdf(beta, t, x, y) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("beta,x", [(0.5, 0.3), (-0.6, -1.0), (0.2, 1.5)])
    def test_chapman_kolmogorov(self, beta, x):
        s, t = 0.4, 0.7
        for y in (-1.2, 0.4, 2.0):
            f = lambda z: skew_density(beta, s, x, z) * skew_density(beta, t, z, y)
            lhs = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 0, np.inf)[0]
            assert lhs == pytest.approx(skew_density(beta, s + t, x, y), abs=1e-6)


class TestObmDensity:
    def test_equal_sigmas_is_bm(self):
        p = ProcessParams.oscillating(1.0, 1.0)
        x, y = np.meshgrid(np.linspace(-3, 3, 13), np.linspace(-4, 4, 17))
        np.testing.assert_allclose(obm_density(p, 0.7, x, y), skew_density(0.0, 0.7, x, y), rtol=1e-14)

    def test_example_at_threshold(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        assert obm_density(p, 1.0, 0.0, 1e-14) == pytest.approx(0.5 * (1 - 1 / 3) * std_normal_pdf(0.0), abs=1e-6)
        assert obm_density(p, 1.0, 0.0, 1e-14) == pytest.approx(0.132981, abs=1e-6)

    @pytest.mark.parametrize("sm,sp,x", [(1.0, 2.0, 0.5), (2.0, 3.0, -1.0), (0.5, 1.5, 0.0)])
    def test_normalised(self, sm, sp, x):
        p = ProcessParams.oscillating(sm, sp)
        f = lambda y: obm_density(p, 1.0, x, y)
        total = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 0, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-10)

    @given(scales, scales, st.floats(0.1, 3), st.floats(-4, 4), st.floats(-4, 4))
    def test_interplay_identity(self, sm, sp, t, x, y):
        p = ProcessParams.oscillating(sm, sp)
        lhs = obm_density(p, t, x, y) * p.sigma(y)
        rhs = skew_density(p.beta_sigma, t, x / p.sigma(x), y / p.sigma(y))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)

    @given(scales, scales, st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5))
    def test_centered_coordinates_ignore_threshold(self, sm, sp, x, y, r):
        p0 = ProcessParams.oscillating(sm, sp)
        pr = ProcessParams.oscillating(sm, sp, r)
        assert transition_density(pr, 1.0, x, y) == transition_density(p0, 1.0, x, y)
        assert transition_cdf(pr, 1.0, x, y) == transition_cdf(p0, 1.0, x, y)

    @pytest.mark.parametrize("sm,sp,x", [(1.0, 2.0, 0.5), (2.0, 3.0, -0.4)])
    def test_cdf_matches_quadrature(self, sm, sp, x):
        p = ProcessParams.oscillating(sm, sp)
        for y in (-2.0, -0.1, 0.0, 0.3, 3.0):
            f = lambda z: obm_density(p, 0.5, x, z)
            ref = integrate.quad(f, -np.inf, min(y, 0.0))[0] + (integrate.quad(f, 0.0, y)[0] if y > 0 else 0.0)
            assert transition_cdf(p, 0.5, x, y) == pytest.approx(ref, abs=1e-9)


class TestJointDensities:
    def test_examples(self):
        assert joint_density_bm(1.0, 0.0, -1.0) == 0.0
        assert joint_density_bm(1.0, 0.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi))
        assert joint_density_bm(1.0, 0.0, 1.0) == pytest.approx(0.241971, abs=1e-6)

    def test_bm_normalised(self):
        total = integrate.dblquad(lambda ell, y: joint_density_bm(1.0, y, ell), -np.inf, np.inf, 0, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_obm_reduces_to_bm(self):
        p = ProcessParams.oscillating(1.0, 1.0)
        y, ell = np.meshgrid([-2.0, -0.3, 0.5, 1.7], [0.1, 0.8, 2.5])
        np.testing.assert_allclose(joint_density_obm(p, 1.0, y, ell), joint_density_bm(1.0, y, ell), rtol=1e-14)

    def test_obm_normalised(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        f = lambda ell, y: joint_density_obm(p, 1.0, y, ell)
        total = integrate.dblquad(f, -np.inf, 0, 0, np.inf)[0] + integrate.dblquad(f, 0, np.inf, 0, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_obm_mean_local_time_matches_moment(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        f = lambda ell, y: ell * joint_density_obm(p, 1.0, y, ell)
        mean = integrate.dblquad(f, -np.inf, 0, 0, np.inf)[0] + integrate.dblquad(f, 0, np.inf, 0, np.inf)[0]
        assert localtime_moment(p, one, 1, 0.0) == pytest.approx(mean, abs=1e-8)

    def test_obm_rejects_threshold(self):
        with pytest.raises(ValueError):
            joint_density_obm(ProcessParams.oscillating(1.0, 2.0), 1.0, 0.0, 1.0)


# -- transforms ----------------------------------------------------------------


class TestTransform:
    def test_abs_increment_from_zero(self, bm):
        assert transform_H(bm, abs_increment_kernel(), 0.0) == pytest.approx(SQRT_2_OVER_PI, abs=1e-9)

    @given(st.floats(-5, 5))
    def test_constant_kernel_normalised(self, x):
        p = ProcessParams.oscillating(1.0, 2.0)
        assert transform_H(p, constant_kernel(), x) == pytest.approx(1.0, abs=1e-9)

    def test_weighted_crossing_minus_abs_increment_vanishes(self, obm_params):
        # grid avoids the null set {0} where the two kernels differ pointwise
        x = np.array([-4.0, -1.3, -0.2, 1e-3, 0.4, 1.1, 3.5])
        diff = transform_H(obm_params, weighted_crossing_kernel(), x) - transform_H(obm_params, abs_increment_kernel(), x)
        np.testing.assert_allclose(diff, 0.0, atol=1e-8)

    @pytest.mark.parametrize("x", [-1.5, 0.2, 2.0])
    def test_matches_scipy_quad(self, x):
        p = ProcessParams.oscillating(2.0, 3.0)
        k = crossing_kernel()
        f = lambda y: k(x, y) * obm_density(p, 1.0, x, y)
        ref = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 0, np.inf)[0]
        assert transform_H(p, k, x) == pytest.approx(ref, abs=1e-9)

    def test_two_function_form(self, bm):
        h = crossing_kernel()
        g = abs_increment_kernel()
        x = 0.4
        f = lambda y: h(x, y) * g(x, y) * obm_density(bm, 1.0, x, y)
        ref = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 0, np.inf)[0]
        assert transform_H(bm, h.product(g), x) == pytest.approx(ref, abs=1e-9)


class TestStationaryAverage:
    def test_abs_increment_transform_averages_to_one(self, obm_params):
        g = abs_increment_kernel()
        val = stationary_average(obm_params, lambda x: transform_H(obm_params, g, x))
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_integral(self, bm):
        assert stationary_average(bm, lambda x: np.exp(-x * x / 2)) == pytest.approx(math.sqrt(2 * math.pi), abs=1e-9)

    def test_second_moment_functional(self, bm):
        val = stationary_average(bm, lambda x: localtime_moment(bm, one, 2, x))
        assert val == pytest.approx(8 / (3 * math.sqrt(2 * math.pi)), abs=1e-6)

    def test_skew_weight(self):
        p = ProcessParams.skew(0.5)
        # <mu_beta, e^{-x^2/2}> = sqrt(2 pi)/2 (1.5 + 0.5)
        assert stationary_average(p, lambda x: np.exp(-x * x / 2)) == pytest.approx(math.sqrt(2 * math.pi), abs=1e-9)
        assert stationary_average(p, lambda x: np.exp(-x * x / 2) * (x > 0)) == pytest.approx(
            1.5 * math.sqrt(2 * math.pi) / 2, abs=1e-9
        )

    def test_divergence_detected(self, bm):
        with pytest.raises((DivergenceError, NumericalError)):
            stationary_average(bm, lambda x: np.ones_like(x))


class TestSemigroup:
    def test_constant(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        assert semigroup_apply(p, 2.0, one, 0.3) == pytest.approx(1.0, abs=1e-9)

    def test_symmetric_half_line(self, bm):
        assert semigroup_apply(bm, 1.0, lambda y: float(y >= 0), 0.0) == pytest.approx(0.5, abs=1e-9)

    def test_stationarity(self):
        p = ProcessParams.oscillating(1.0, 2.0)
        fn = lambda y: np.exp(-((y - 0.3) ** 2)) * (1 + 0.5 * np.sin(y))
        base = stationary_average(p, fn)
        moved = stationary_average(p, lambda x: semigroup_apply(p, 0.8, fn, x))
        assert moved == pytest.approx(base, abs=1e-6)

    def test_centered_function_decays(self):
        # For <lambda, fn> = 0 the semigroup decays like t^{-3/2}; check the
        # empirical decay exponent over t in {4, 16, 64}.
        p = ProcessParams.oscillating(1.0, 2.0)
        raw = lambda y: np.exp(-y * y)
        mass = stationary_average(p, raw)
        ref = lambda y: np.exp(-((y - 1.0) ** 2) / 4)
        ref_mass = stationary_average(p, ref)
        fn = lambda y: raw(y) - mass / ref_mass * ref(y)
        assert abs(stationary_average(p, fn)) < 1e-10
        ts = np.array([4.0, 16.0, 64.0])
        vals = np.array([abs(semigroup_apply(p, t, fn, 0.5)) for t in ts])
        slopes = np.diff(np.log(vals)) / np.diff(np.log(ts))
        # local exponents steepen towards -3/2
        assert np.all(slopes < -1.2), slopes
        assert slopes[1] < slopes[0]
        assert slopes[-1] == pytest.approx(-1.5, abs=0.1)


# -- local-time moments ----------------------------------------------------------


class TestLocaltimeMoment:
    @pytest.mark.parametrize("x", [-2.0, -0.3, 0.0, 0.5, 2.0])
    def test_identity_has_zero_first_moment(self, obm_params, x):
        assert localtime_moment(obm_params, lambda y: y, 1, x) == pytest.approx(0.0, abs=1e-8)

    def test_second_moment_bm(self, bm):
        assert localtime_moment(bm, one, 2, 0.0) == pytest.approx(1.0, abs=1e-10)

    def test_first_moment_is_abs_increment_transform(self, obm_params):
        x = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(
            localtime_moment(obm_params, one, 1, x),
            transform_H(obm_params, abs_increment_kernel(), x),
            atol=1e-8,
        )

    @pytest.mark.parametrize("x,p", [(0.7, 1), (-1.2, 2), (2.0, 2), (0.3, 0)])
    def test_bm_against_hitting_time_quadrature(self, bm, x, p):
        # E[L^p f(W_1)] by first passage at tau (Levy density) followed by the
        # from-zero law over 1 - tau, where |W| + L ~ sqrt(s) Maxwell and
        # L/(|W| + L) ~ U(0, 1). Independent of the library's substitutions.
        f = np.cos  # even, so the restart sign does not matter
        r = np.linspace(0, 12, 1201)[1:]
        u_nodes, u_weights = np.polynomial.legendre.leggauss(40)
        u = 0.5 * (u_nodes + 1)
        wu = 0.5 * u_weights
        maxwell = math.sqrt(2 / math.pi) * r**2 * np.exp(-r * r / 2)

        def from_zero(s):
            R, U = np.meshgrid(r, u, indexing="ij")
            S = math.sqrt(s) * R
            vals = (S * U) ** p * f(S * (1 - U))
            return integrate.simpson((vals @ wu) * maxwell, x=r)

        if p == 0:
            ref = integrate.quad(lambda y: f(y) * skew_density(0.0, 1.0, x, y), -np.inf, np.inf)[0]
        else:
            # substitute tau = 1 - v^2 near the end point, keep the t^{-3/2} factor explicit
            def integrand(t):
                return abs(x) / math.sqrt(2 * math.pi * t**3) * math.exp(-x * x / (2 * t)) * from_zero(1 - t)

            ref = integrate.quad(integrand, 0, 1, epsabs=1e-10, limit=200)[0]
        assert localtime_moment(bm, f, p, x) == pytest.approx(ref, abs=1e-7)

    def test_skew_scaling(self):
        # E[L_1] from 0 is sqrt(2/pi) for every beta
        for beta in (-0.5, 0.0, 0.5):
            val = localtime_moment(ProcessParams.skew(beta), one, 1, 0.0)
            assert val == pytest.approx(SQRT_2_OVER_PI, abs=1e-9)


def test_quadrature_config_validation():
    with pytest.raises(ConfigError):
        QuadratureConfig(tail_sigmas=5)
    with pytest.raises(ConfigError):
        QuadratureConfig(abs_tol=0)
