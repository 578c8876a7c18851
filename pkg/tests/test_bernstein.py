import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit import (
    BernsteinSpec,
    CertificationError,
    ParameterError,
    ScalingCertificate,
    capital_phi,
    capital_phi_inv,
    certify,
    check_bernstein_sanity,
    conjugate,
    estimate_scaling_indices,
    eval_phi,
    eval_phi_prime,
    example_families,
    make_spec,
    pure_power,
    rescale,
)
from sbmkit.bernstein import EXAMPLE_FAMILIES, FAMILIES

# raw (unnormalized) formulas evaluated in high precision
RAW = {
    "sum_of_powers": lambda x, a, b: x**a + x**b,
    "power_of_shifted": lambda x, a, b: (x + x**b) ** a,
    "power_log": lambda x, a, b: x**a * mp.log(1 + x) ** b,
    "power_over_log": lambda x, a, b: x**a / mp.log(1 + x) ** b,
    "log_cosh": lambda x, a: mp.log(mp.cosh(mp.sqrt(x))) ** a,
    "log_sinh": lambda x, a: mp.log(mp.sinh(mp.sqrt(x)) / mp.sqrt(x)) ** a,
}


def hp_phi(family, params, lam):
    mp.mp.dps = 40
    f = RAW[family]
    args = [params[k] for k in FAMILIES[family]]
    return float(f(mp.mpf(lam), *args) / f(mp.mpf(1), *args))


@pytest.mark.parametrize("family", list(EXAMPLE_FAMILIES))
def test_examples_normalized_and_match_high_precision(family):
    spec = make_spec(family, **EXAMPLE_FAMILIES[family])
    assert eval_phi(spec, 1.0) == pytest.approx(1.0, rel=1e-14)
    lam = np.logspace(-6, 6, 25)
    ours = eval_phi(spec, lam)
    ref = np.array([hp_phi(family, EXAMPLE_FAMILIES[family], x) for x in lam])
    np.testing.assert_allclose(ours, ref, rtol=1e-11)


def test_pure_power_values(cauchy):
    assert eval_phi(cauchy, 4.0) == pytest.approx(2.0, rel=1e-15)
    assert eval_phi_prime(cauchy, 1.0) == pytest.approx(0.5, rel=1e-8)


def test_mixture_derivative(mixture):
    # d/dlam (lam^0.3 + lam^0.7)/2 at 1
    assert eval_phi_prime(mixture, 1.0) == pytest.approx(0.5, rel=1e-8)
    lam = np.logspace(-4, 4, 17)
    exact = (0.3 * lam**-0.7 + 0.7 * lam**-0.3) / 2
    np.testing.assert_allclose(eval_phi_prime(mixture, lam), exact, rtol=1e-7)


def test_log_cosh_normalization():
    spec = make_spec("log_cosh", alpha=0.5)
    mp.mp.dps = 30
    assert spec.scale == pytest.approx(float(1 / mp.log(mp.cosh(1)) ** 0.5), rel=1e-14)


def test_conjugate(cauchy, mixture):
    lam = np.logspace(-3, 3, 13)
    np.testing.assert_allclose(eval_phi(conjugate(cauchy), lam), np.sqrt(lam), rtol=1e-13)
    np.testing.assert_allclose(
        eval_phi(conjugate(mixture), lam), 2 * lam / (lam**0.3 + lam**0.7), rtol=1e-12
    )


def test_rescale(cauchy, mixture):
    lam = np.logspace(-3, 3, 13)
    np.testing.assert_allclose(eval_phi(rescale(mixture, 1.0), lam), eval_phi(mixture, lam), rtol=1e-14)
    np.testing.assert_allclose(eval_phi(rescale(cauchy, 7.3), lam), np.sqrt(lam), rtol=1e-13)
    assert eval_phi(rescale(mixture, 10.0), 1.0) == pytest.approx(1.0, rel=1e-14)


def test_capital_phi_values(cauchy):
    assert capital_phi(cauchy, 2.0) == pytest.approx(2.0, rel=1e-14)
    assert capital_phi_inv(cauchy, 4.0) == pytest.approx(4.0, rel=1e-12)
    spec = make_spec("sum_of_powers", alpha=0.5, beta=0.9)
    assert capital_phi(spec, 0.1) == pytest.approx(2 / (100**0.5 + 100**0.9), rel=1e-13)
    for s in example_families():
        assert capital_phi(s, 1.0) == pytest.approx(1.0, rel=1e-14)
        assert capital_phi_inv(s, 1.0) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("spec", example_families(), ids=lambda s: s.family)
def test_capital_phi_round_trip(spec):
    r = np.logspace(-6, 6, 49)
    back = capital_phi_inv(spec, capital_phi(spec, r))
    np.testing.assert_allclose(back, r, rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0.05, 0.9),
    gap=st.floats(0.01, 0.9),
    lam=st.floats(1e-4, 1e4),
    t=st.floats(1e-4, 1e4),
)
def test_scaling_sandwich_property(a, gap, lam, t):
    spec = make_spec("sum_of_powers", alpha=a, beta=min(a + gap, 0.99))
    ratio = eval_phi(spec, lam * t) / eval_phi(spec, t)
    assert min(1.0, lam) * (1 - 1e-12) <= ratio <= max(1.0, lam) * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(family=st.sampled_from(list(EXAMPLE_FAMILIES)), x=st.floats(1e-5, 1e5))
def test_phi_over_lambda_decreasing_property(family, x):
    spec = make_spec(family, **EXAMPLE_FAMILIES[family])
    y = x * 1.7
    assert eval_phi(spec, y) >= eval_phi(spec, x)
    assert eval_phi(spec, y) / y <= eval_phi(spec, x) / x * (1 + 1e-12)


def test_certificate_pure_power(cauchy):
    cert = certify(cauchy)
    for k in ("delta1", "delta2", "delta3", "delta4"):
        assert getattr(cert, k) == pytest.approx(0.5, abs=1e-9)
    for k in ("a1", "a2", "a3", "a4"):
        assert getattr(cert, k) == pytest.approx(1.0, abs=1e-9)
    assert ScalingCertificate.from_dict(cert.to_dict()).delta2 == cert.delta2


def test_certificate_mixture_indices_tighten(mixture):
    narrow = estimate_scaling_indices(mixture, 1.0, 1e4, "at_infinity")
    wide = estimate_scaling_indices(mixture, 1.0, 1e12, "at_infinity")
    assert 0 < narrow.delta1 < narrow.delta2 < 0.7
    assert wide.delta2 > narrow.delta2
    assert wide.delta2 == pytest.approx(0.7, abs=0.02)
    zero = estimate_scaling_indices(mixture, 1e-12, 1.0, "at_zero")
    assert zero.delta3 == pytest.approx(0.3, abs=0.02)


def test_power_log_certifies_at_zero():
    cert = estimate_scaling_indices(make_spec("power_log", alpha=0.5, beta=0.3), side="at_zero")
    assert 0 < cert.delta3 <= cert.delta4 < 1


@pytest.mark.parametrize("spec", example_families(), ids=lambda s: s.family)
def test_example_families_certify(spec):
    cert = certify(spec)
    assert 0 < cert.delta_lower <= cert.delta_upper < 1


def test_log1p_fails_at_infinity():
    spec = BernsteinSpec("custom", expr="log1p(lam)")
    with pytest.raises(CertificationError) as info:
        certify(spec)
    assert info.value.side == "at_infinity"


@pytest.mark.parametrize("spec", example_families(), ids=lambda s: s.family)
def test_sanity_passes_for_examples(spec):
    lam = np.logspace(-4, 4, 33)
    report = check_bernstein_sanity(spec, lam, lam)
    assert report.passed, report.violation


def test_sanity_flags_square():
    report = check_bernstein_sanity(BernsteinSpec("custom", expr="lam**2"))
    assert not report.passed
    assert report.violation.check == "growth_bound"
    assert report.violation.lhs > report.violation.rhs


def test_unknown_family_lists_valid_names():
    with pytest.raises(ParameterError, match="sum_of_powers"):
        make_spec("nope", alpha=0.5)


def test_spec_json_round_trip(families):
    for s in families:
        back = BernsteinSpec.from_json(s.to_json())
        assert back.name == s.name
        assert eval_phi(back, 3.0) == eval_phi(s, 3.0)


def test_non_positive_lambda_rejected(cauchy):
    with pytest.raises(ValueError):
        eval_phi(cauchy, -1.0)
    assert math.isfinite(eval_phi(cauchy, 1e-300))


def test_pure_power_helper():
    assert pure_power(1.4).p == {"alpha": 1.4}
