import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit import (
    DomainError,
    free_heat_kernel,
    green_radial_g,
    half_space_green_estimate,
    half_space_hk_estimate,
    jump_density_j,
    make_spec,
    p_estimate,
    pure_power,
)
from sbmkit.kernels import (
    check_transience,
    riesz_constant,
    stable_half_space_green,
    stable_jump_constant,
    transience_status,
)


def cauchy_kernel(d, t, r):
    c = math.gamma((d + 1) / 2) / math.pi ** ((d + 1) / 2)
    return c * t * (t * t + r * r) ** (-(d + 1) / 2)


def test_stable_constants_match_mpmath():
    mp.mp.dps = 30
    for d in (1, 2, 3):
        for a in (0.6, 1.0, 1.4):
            A = a * mp.mpf(2) ** (a - 1) * mp.gamma((d + a) / 2) / (mp.pi ** (d / 2) * mp.gamma(1 - a / 2))
            assert stable_jump_constant(d, a) == pytest.approx(float(A), rel=1e-14)
    assert stable_jump_constant(1, 1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    assert riesz_constant(3, 1.0) == pytest.approx(1 / (2 * math.pi**2), rel=1e-14)


def test_jump_density_by_direct_subordination():
    """mpmath quadrature of the Gaussian against the stable Levy density."""
    mp.mp.dps = 20
    b = 0.35
    spec = pure_power(2 * b)
    for d, r in ((1, 0.3), (2, 1.0), (3, 4.0)):
        f = lambda t: (4 * mp.pi * t) ** (-d / 2) * mp.exp(-r * r / (4 * t)) * b / mp.gamma(1 - b) * t ** (-1 - b)
        ref = float(mp.quad(f, [0, r * r / 4, r * r, mp.inf]))
        assert jump_density_j(spec, d, r) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_mixture_jump_density(mixture, d):
    r = np.logspace(-3, 3, 31)
    exact = 0.5 * (stable_jump_constant(d, 0.6) * r ** (-d - 0.6) + stable_jump_constant(d, 1.4) * r ** (-d - 1.4))
    np.testing.assert_allclose(jump_density_j(mixture, d, r), exact, rtol=1e-6)


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.4])
def test_green_riesz(alpha):
    r = np.logspace(-3, 3, 25)
    g = green_radial_g(pure_power(alpha), 3, r)
    np.testing.assert_allclose(g, riesz_constant(3, alpha) * r ** (alpha - 3), rtol=1e-5)


def test_green_d2_cauchy():
    r = np.logspace(-2, 2, 9)
    np.testing.assert_allclose(green_radial_g(pure_power(1.0), 2, r), riesz_constant(2, 1.0) / r, rtol=1e-5)


def test_green_needs_transience(cauchy):
    with pytest.raises(DomainError):
        green_radial_g(cauchy, 1, 1.0)


def test_transience(cauchy, mixture):
    assert check_transience(cauchy, 3)
    assert not check_transience(cauchy, 1)
    assert check_transience(mixture, 2)
    assert transience_status(pure_power(1.5), 1) == "recurrent"
    assert transience_status(pure_power(0.5), 1) == "transient"


@pytest.mark.parametrize("d", [1, 2, 3])
def test_free_heat_kernel_cauchy(cauchy, d):
    for t in (0.1, 1.0, 10.0):
        r = t * np.linspace(0, 20, 11)
        np.testing.assert_allclose(free_heat_kernel(cauchy, d, t, r), cauchy_kernel(d, t, r), rtol=1e-6)


def test_free_heat_kernel_examples(cauchy):
    assert free_heat_kernel(cauchy, 1, 1.0, 0.0) == pytest.approx(1 / math.pi, rel=1e-8)
    assert free_heat_kernel(cauchy, 1, 2.0, 2.0) == pytest.approx(2 / (8 * math.pi), rel=1e-8)


def test_free_heat_kernel_mass(mixture):
    """The radial density integrates to one."""
    t = 1.0
    r = np.logspace(-4, 4, 801)
    p = free_heat_kernel(mixture, 1, t, r)
    # tail beyond 1e4 follows t j(r), which for d=1 and index 0.3 decays like r^-1.6
    mass = 2 * trapezoid(p * r, np.log(r)) + 2 * p[0] * r[0]
    assert mass == pytest.approx(1.0, abs=2e-3)


def test_p_estimate_examples(cauchy):
    assert p_estimate(cauchy, 1, 1.0, 0.0) == pytest.approx(1.0)
    assert p_estimate(cauchy, 1, 1.0, 10.0) == pytest.approx(1e-2)


def test_half_space_hk_estimate_examples(cauchy):
    # each boundary factor is sqrt(Phi(0.01)) = 0.1; the volume branch is 1
    assert half_space_hk_estimate(cauchy, 1, 1.0, [0.01], [0.01]) == pytest.approx(1e-2)
    # deep points: both boundary factors are 1
    assert half_space_hk_estimate(cauchy, 2, 1.0, [0, 5.0], [0, 5.0]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        half_space_hk_estimate(cauchy, 1, 1.0, [-0.1], [1.0])


def test_half_space_green_estimate(cauchy):
    est = half_space_green_estimate(cauchy, 2, [0.0, 1.0], [0.0, 2.0])
    assert est.regime == "two_sided"
    assert est.value == pytest.approx(1.0)
    with pytest.raises(DomainError):
        # Cauchy in d = 1 sits exactly on the critical index
        half_space_green_estimate(cauchy, 1, [1.0], [2.0])
    d1 = half_space_green_estimate(pure_power(1.5), 1, [1.0], [2.0])
    assert d1.regime == "d1_recurrent"


def test_stable_half_space_green_far_from_boundary():
    g = stable_half_space_green(3, 1.0, [0, 0, 1e6], [0, 0, 1e6 + 1])
    assert g == pytest.approx(riesz_constant(3, 1.0), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(
    xd=st.floats(0.01, 10),
    yd=st.floats(0.01, 10),
    lat=st.floats(0.1, 5),
    scale=st.floats(0.1, 10),
)
def test_stable_half_space_green_symmetry_and_scaling(xd, yd, lat, scale):
    x, y = np.array([0.0, xd]), np.array([lat, yd])
    a = 1.2
    g = stable_half_space_green(2, a, x, y)
    assert stable_half_space_green(2, a, y, x) == pytest.approx(g, rel=1e-10)
    assert stable_half_space_green(2, a, scale * x, scale * y) == pytest.approx(scale ** (a - 2) * g, rel=1e-8)
    assert g < riesz_constant(2, a) * np.linalg.norm(x - y) ** (a - 2)


@settings(max_examples=25, deadline=None)
@given(r=st.floats(1e-3, 1e3), k=st.floats(1.01, 4))
def test_jump_density_decreasing_property(mixture, r, k):
    assert jump_density_j(mixture, 2, k * r) < jump_density_j(mixture, 2, r)


def test_log_families_kernels_finite():
    spec = make_spec("power_over_log", alpha=0.5, beta=0.3)
    r = np.logspace(-3, 3, 13)
    j = jump_density_j(spec, 1, r)
    assert np.all(np.isfinite(j)) and np.all(j > 0)
    assert np.all(np.diff(j) < 0)
