import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from nvmix.special_functions import (DomainError, PoleError, SingularityError, bessel_k,
                                     complex_pow, gamma, gamma_modulus_floor, log_gamma)


def mp_gamma_integral(z):
    """Gamma(z) = int_0^inf t^(z-1) e^-t dt by mpmath quadrature (Re z > 0)."""
    z = mpmath.mpc(z)
    return complex(mpmath.quad(lambda t: t ** (z - 1) * mpmath.exp(-t), [0, 1, 10, mpmath.inf]))


def mp_bessel_integral(lam, x):
    """K_lam(x) = 1/2 int_0^inf u^(lam-1) exp(-x/2 (u + 1/u)) du."""
    f = lambda u: u ** (lam - 1) * mpmath.exp(-x / 2 * (u + 1 / u))
    return float(mpmath.quad(f, [0, 1, mpmath.inf]) / 2)


class TestLogGamma:
    def test_one(self):
        assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_half(self):
        assert log_gamma(0.5).real == pytest.approx(0.5723649429247001, rel=1e-14)
        assert abs(log_gamma(0.5).imag) < 1e-15

    def test_integral_oracle(self):
        z = 0.9 - 0.9j
        ref = mp_gamma_integral(z)
        got = np.exp(log_gamma(z))
        assert abs(got - ref) / abs(ref) < 1e-12
        # recurrence
        assert abs(log_gamma(z + 1) - (np.log(z) + log_gamma(z))) < 1e-13

    @pytest.mark.parametrize("z", [0, -1, -2, -7, -1 + 1e-15])
    def test_poles(self, z):
        with pytest.raises(PoleError):
            log_gamma(z)

    def test_near_pole_is_fine(self):
        z = -2 + 1e-6
        assert np.isfinite(log_gamma(z))

    def test_relative_accuracy_vs_mpmath(self):
        rng = np.random.default_rng(3)
        r = rng.uniform(0, 50, 300)
        th = rng.uniform(-math.pi, math.pi, 300)
        zs = r * np.exp(1j * th)
        zs = zs[zs.real > -5]
        got = gamma(zs)
        for z, g in zip(zs, got):
            ref = complex(mpmath.gamma(mpmath.mpc(z)))
            assert abs(g - ref) <= 1e-12 * abs(ref), z

    def test_matches_scipy_branch(self):
        rng = np.random.default_rng(4)
        z = rng.uniform(-5, 50, 500) + 1j * rng.uniform(-50, 50, 500)
        assert np.max(np.abs(log_gamma(z) - special.loggamma(z))) < 1e-12

    def test_conjugation(self):
        rng = np.random.default_rng(5)
        z = rng.uniform(-5, 20, 200) + 1j * rng.uniform(0.1, 40, 200)
        assert np.allclose(log_gamma(np.conj(z)), np.conj(log_gamma(z)), rtol=0, atol=1e-13)

    def test_recurrence_grid(self):
        re, im = np.meshgrid(np.linspace(0.1, 5, 25), np.linspace(-30, 30, 61))
        z = (re + 1j * im).ravel()
        g1 = np.exp(log_gamma(z + 1))
        rel = np.abs(g1 - z * np.exp(log_gamma(z))) / np.abs(g1)
        assert rel.max() <= 1e-10

    @pytest.mark.parametrize("z", [0.3 + 0.2j, -2.5 + 1j, 0.7 - 4j, -4.2 - 0.5j])
    def test_reflection(self, z):
        lhs = gamma(z) * gamma(1 - z)
        rhs = math.pi / np.sin(math.pi * z)
        assert abs(lhs - rhs) <= 1e-12 * abs(rhs)

    def test_lower_bound_floor(self):
        re, im = np.meshgrid(np.linspace(-2, 1, 31), np.r_[-np.linspace(1, 40, 40), np.linspace(1, 40, 40)])
        w = (re + 1j * im).ravel()
        assert np.all(np.abs(gamma(w)) > gamma_modulus_floor(w))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.1, 5), st.floats(-30, 30))
    def test_recurrence_property(self, a, b):
        z = complex(a, b)
        g1 = np.exp(log_gamma(z + 1))
        assert abs(g1 - z * np.exp(log_gamma(z))) <= 1e-10 * abs(g1)


class TestBesselK:
    def test_half_order_closed_form(self):
        assert bessel_k(0.5, 2.0) == pytest.approx(math.sqrt(math.pi / 4) * math.exp(-2), rel=1e-13)
        assert bessel_k(0.5, 2.0) == pytest.approx(0.1199377, abs=1e-7)

    def test_integral_oracle(self):
        ref = mp_bessel_integral(1, 1)
        assert bessel_k(1.0, 1.0) == pytest.approx(ref, rel=1e-12)
        assert bessel_k(1.0, 1.0) == pytest.approx(0.6019072, abs=5e-8)

    def test_order_symmetry(self):
        assert bessel_k(-1.0, 1.0) == bessel_k(1.0, 1.0)

    @pytest.mark.parametrize("lam", [-3.3, -1.0, 0.0, 0.4, 1.0, 2.5, 7.0, 15.0])
    @pytest.mark.parametrize("x", [0.05, 0.7, 1.0, 4.0, 20.0, 50.0])
    def test_recurrence_and_scipy(self, lam, x):
        lhs = bessel_k(lam + 1, x)
        rhs = bessel_k(lam - 1, x) + 2 * lam / x * bessel_k(lam, x)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        assert bessel_k(lam, x) == pytest.approx(special.kv(lam, x), rel=1e-11)

    def test_positive_and_decreasing(self):
        for lam in (0.0, 1.0, 3.5):
            vals = np.array([bessel_k(lam, x) for x in np.linspace(0.1, 30, 60)])
            assert np.all(vals > 0)
            assert np.all(np.diff(vals) < 0)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            bessel_k(1.0, x)


class TestComplexPow:
    def test_unit_base(self):
        assert complex_pow(1 + 0j, 3.7 - 2j) == 1

    def test_i_squared(self):
        assert complex_pow(1j, 2) == pytest.approx(-1, abs=1e-15)

    def test_modulus_formula(self):
        mu, u = 0.5, 1.0
        base = -1j * mu * u + u * u / 2
        z = -0.1 - 0.9j
        ref = (math.exp(z.real / 2 * math.log(mu ** 2 * u ** 2 + u ** 4 / 4))
               * math.exp(z.imag * math.atan(2 * mu / u)))
        assert abs(complex_pow(base, z)) == pytest.approx(ref, rel=1e-14)
        # conjugated base: arctan(-2 mu / u)
        ref_c = (math.exp(z.real / 2 * math.log(mu ** 2 * u ** 2 + u ** 4 / 4))
                 * math.exp(z.imag * math.atan(-2 * mu / u)))
        assert abs(complex_pow(np.conj(base), z)) == pytest.approx(ref_c, rel=1e-14)

    def test_zero(self):
        with pytest.raises(SingularityError):
            complex_pow(0j, 0.5)
