import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from erlogse.errors import ConfigurationError, DomainError
from erlogse.log_regularization import (
    F_keps, ModelParams, RegularizationParams, energy, energy_density, energy_regularized,
    explicit_rhs, f_keps, nonlinear_term,
)
from erlogse.spectral_grid import Grid1D, SpectralField

KS = range(2, 11)
EPSS = (1e-2, 1e-4)


def quad_F(rho, params):
    """Independent antiderivative of f_keps from 0, split at the junction."""
    e2 = params.eps**2
    f = lambda r: f_keps(r, params)
    inner, _ = quad(f, 0.0, min(rho, e2), epsabs=0, epsrel=1e-13, limit=200)
    if rho <= e2:
        return inner
    outer, _ = quad(f, e2, rho, epsabs=0, epsrel=1e-13, limit=200)
    return inner + outer


def sample_points(eps):
    e2 = eps**2
    return np.linspace(0.02, 0.98, 20) * e2, e2 * np.geomspace(1.05, 1.0 / e2, 20)


class TestParams:
    @pytest.mark.parametrize("eps,k", [(0.0, 2), (1.0, 2), (1e-3, 1), (1e-3, 17), (1e-3, 2.5)])
    def test_rejects(self, eps, k):
        with pytest.raises(ConfigurationError):
            RegularizationParams(eps, k)

    def test_negative_density(self):
        with pytest.raises(DomainError):
            f_keps(-1e-3, RegularizationParams(1e-2))
        with pytest.raises(DomainError):
            F_keps(np.array([0.1, -0.2]), RegularizationParams(1e-2))


class TestBranches:
    @pytest.mark.parametrize("k", KS)
    @pytest.mark.parametrize("eps", EPSS)
    def test_log_outside(self, k, eps):
        p = RegularizationParams(eps, k)
        _, outer = sample_points(eps)
        assert np.array_equal(f_keps(outer, p), np.log(outer))
        assert f_keps(eps**2, p) == np.log(eps**2)

    def test_closed_form_k2(self):
        p = RegularizationParams(0.1, 2)
        rho = 0.004
        s = 1 - rho / 0.01
        assert f_keps(rho, p) == pytest.approx(np.log(0.01) - 1.5 * s**2 - s, rel=1e-15)
        expect = rho * (np.log(0.01) - 1 - s - s**2 / 2)
        assert F_keps(rho, p) == pytest.approx(expect, rel=1e-15)

    def test_values_at_origin(self):
        p = RegularizationParams(1e-2, 3)
        assert F_keps(0.0, p) == 0.0
        assert np.isfinite(f_keps(0.0, p))
        assert energy_density(0.0) == 0.0

    def test_scalar_and_array_agree(self):
        p = RegularizationParams(1e-2, 4)
        rho = np.array([0.0, 3e-5, 1e-4, 0.5])
        np.testing.assert_array_equal(F_keps(rho, p), [F_keps(float(r), p) for r in rho])


class TestAntiderivative:
    @pytest.mark.parametrize("k", KS)
    @pytest.mark.parametrize("eps", EPSS)
    def test_matches_quadrature(self, k, eps):
        p = RegularizationParams(eps, k)
        for pts in sample_points(eps):
            for rho in pts:
                ref = quad_F(rho, p)
                assert abs(F_keps(rho, p) - ref) <= 1e-10 * abs(ref)


class TestJunction:
    @pytest.mark.parametrize("k", KS)
    @pytest.mark.parametrize("eps", EPSS)
    def test_one_sided_derivatives_agree(self, k, eps):
        p = RegularizationParams(eps, k)
        with mpmath.workdps(60):
            e2 = mpmath.mpf(eps) ** 2
            F = lambda r: F_keps(r, p)
            for m in range(0, k + 1):
                left = mpmath.diff(F, e2, m, direction=-1, h=e2 * mpmath.mpf(10) ** -15)
                right = mpmath.diff(F, e2, m, direction=1, h=e2 * mpmath.mpf(10) ** -15)
                scale = max(abs(right), e2 ** (1 - m))
                assert abs(left - right) <= 1e-8 * scale, (m, left, right)

    def test_first_derivative_is_f(self):
        p = RegularizationParams(1e-2, 5)
        with mpmath.workdps(40):
            for rho in (mpmath.mpf("3e-5"), mpmath.mpf("0.3")):
                d = mpmath.diff(lambda r: F_keps(r, p), rho)
                assert abs(d - f_keps(rho, p)) < mpmath.mpf(10) ** -25


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 0.5), st.integers(2, 10), st.floats(0.0, 1.0))
def test_inner_branch_is_monotone_and_bounded(eps, k, frac):
    p = RegularizationParams(eps, k)
    rho = frac * eps**2
    # f is increasing and never exceeds ln eps^2 below the threshold
    assert f_keps(rho, p) <= np.log(eps**2) + 1e-12
    assert f_keps(rho, p) <= f_keps(min(rho * 1.01 + 1e-300, eps**2), p) + 1e-12


class TestNonlinearTerm:
    def test_sign_and_linear_case(self):
        p = RegularizationParams(1e-3)
        u = np.array([0.5 + 0.5j, 2.0])
        out = nonlinear_term(u, p, -1.0)
        np.testing.assert_allclose(out, 1j * u * np.log(np.abs(u) ** 2))
        assert np.all(nonlinear_term(u, p, 0.0) == 0)

    def test_explicit_rhs_wraps(self):
        g = Grid1D(0, 1, 4)
        u = SpectralField(g, np.ones(4))
        assert np.allclose(explicit_rhs(u, RegularizationParams(1e-3), ModelParams()).values, 0)


class TestEnergy:
    def test_gausson_energy(self):
        # E = ||u_x||^2 - int(rho ln rho - rho) for u = exp(-x^2/2); closed form
        g = Grid1D(-10, 10, 256)
        u = SpectralField(g, np.exp(-g.nodes**2 / 2))
        kinetic = np.sqrt(np.pi) / 2
        potential = -(-np.sqrt(np.pi) / 2 - np.sqrt(np.pi))  # int rho ln rho = -sqrt(pi)/2
        assert energy(u, ModelParams()) == pytest.approx(kinetic + potential, rel=1e-12)

    def test_regularized_energy_error_is_small(self):
        g = Grid1D(-10, 10, 256)
        u = SpectralField(g, np.exp(-g.nodes**2 / 2))
        m = ModelParams()
        e1 = energy(u, m) - energy_regularized(u, RegularizationParams(1e-2), m)
        e2 = energy(u, m) - energy_regularized(u, RegularizationParams(1e-3), m)
        assert 0 < abs(e2) < abs(e1) < 1e-3
