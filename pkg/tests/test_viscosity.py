import numpy as np
import pytest

from stokes_darcy_dd.viscosity import CrossModelParams, nu, nu_prime_coeff

SHEAR_THINNING = CrossModelParams(nu_inf=0.5, nu_0=1.5, K=1.0, r=1.5)
LINEAR = CrossModelParams(nu_inf=0.5, nu_0=1.5, K=1.0, r=2.0)


def test_zero_shear_gives_nu0():
    assert nu(0.0, SHEAR_THINNING) == pytest.approx(1.5)


def test_unit_shear():
    assert nu(1.0, SHEAR_THINNING) == pytest.approx(1.0)


@pytest.mark.parametrize("d", [0.0, 1e-9, 0.3, 1.0, 7.0])
def test_linear_limit_is_constant(d):
    assert nu(d, LINEAR) == pytest.approx(1.0, abs=1e-15)
    assert nu_prime_coeff(d, LINEAR) == 0.0


def test_newton_coefficient_hand_value():
    assert nu_prime_coeff(1.0, SHEAR_THINNING) == pytest.approx(-0.125)


def _fd(d, p, delta):
    return (nu(d + delta, p) - nu(d - delta, p)) / (2 * delta)


def test_newton_coefficient_matches_finite_difference_at_4():
    fd = _fd(4.0, SHEAR_THINNING, 1e-4)
    assert nu_prime_coeff(4.0, SHEAR_THINNING) * 4.0 == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("r", [1.2, 1.35, 1.5, 1.9])
def test_newton_coefficient_sweep(r):
    p = CrossModelParams(nu_inf=1.0, nu_0=10.0, K=1.0, r=r)
    for d in np.geomspace(10 * p.eps_reg * 1e4, 50.0, 15):
        delta = 1e-4 * d
        fd = _fd(d, p, delta)
        assert abs(nu_prime_coeff(d, p) * d - fd) <= 1e-6 * abs(fd)


def test_monotone_and_bounded():
    d = np.linspace(0.0, 30.0, 301)
    for r in (1.2, 1.5, 1.8):
        p = SHEAR_THINNING.replace(r=r)
        v = nu(d, p)
        assert np.all(np.diff(v) <= 0)
        assert np.all((v >= p.nu_inf) & (v <= p.nu_0))


def test_regularization_keeps_coefficient_finite():
    c = nu_prime_coeff(np.array([0.0, 1e-300]), SHEAR_THINNING)
    assert np.all(np.isfinite(c))


@pytest.mark.parametrize("kw", [dict(nu_inf=0.0), dict(nu_0=0.1), dict(K=0.0), dict(r=1.0)])
def test_invalid_parameters(kw):
    with pytest.raises(ValueError):
        CrossModelParams(**kw)
