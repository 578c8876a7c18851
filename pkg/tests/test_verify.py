import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmkit import BernsteinSpec, jump_density_j, pure_power
from sbmkit.kernels import g_estimate, j_estimate
from sbmkit.verify import (
    CHECKS,
    ComparabilityReport,
    Skipped,
    SuiteConfig,
    bound_check,
    comparability_sweep,
    integral_estimates,
    log_grid,
    log_slope,
    run_suite,
    write_bundle,
)


def test_identity_sweep_passes():
    grid = log_grid(1e-3, 1e3, 8)
    rep = comparability_sweep(lambda r: r**2, lambda r: r**2, grid, band_limit=1.0001)
    assert rep.passed and rep.band == 1.0 and rep.slope == 0.0


def test_stable_jump_ratio_is_constant(cauchy):
    grid = log_grid(1e-3, 1e3, 16)
    rep = comparability_sweep(
        lambda r: jump_density_j(cauchy, 1, r), lambda r: j_estimate(cauchy, 1, r), grid, band_limit=1.01
    )
    assert rep.passed
    np.testing.assert_allclose(rep.ratios, 1 / math.pi, rtol=1e-8)


def test_mismatched_pair_fails(cauchy):
    grid = log_grid(1e-3, 1e3, 4)
    rep = comparability_sweep(
        lambda r: jump_density_j(cauchy, 1, r), lambda r: g_estimate(cauchy, 1, r), grid
    )
    assert not rep.passed
    assert rep.band > 1e6
    assert "band" in rep.message() and "FAILED" in rep.message()


def test_band_limit_validated():
    with pytest.raises(ValueError):
        comparability_sweep(np.ones_like, np.ones_like, [1.0, 2.0], band_limit=1.0)


def test_sweep_records_pointwise_failures():
    def flaky(r):
        r = np.asarray(r)
        if r.ndim:
            raise ArithmeticError("vector path broken")
        if r > 10:
            raise ArithmeticError("no value here")
        return 1.0

    rep = comparability_sweep(flaky, lambda r: np.ones_like(r), [1.0, 5.0, 20.0])
    assert not rep.passed
    assert any("20" in f for f in rep.failures)


@settings(max_examples=40, deadline=None)
@given(k=st.floats(-2, 2), c=st.floats(1e-3, 1e3))
def test_log_slope_recovers_power_property(k, c):
    x = np.logspace(-2, 2, 9)
    assert log_slope(x, c * x**k) == pytest.approx(k, abs=1e-9)


def test_bound_check_fixed_constant():
    grid = np.logspace(0, 2, 5)
    ok = bound_check("b", grid, grid, grid, constant=1.0)
    assert ok.passed
    bad = bound_check("b", grid, 1.1 * grid, grid, constant=1.0)
    assert not bad.passed and "violations" in bad.failures[-1]


def test_bound_check_fitted_constant_detects_growth():
    grid = np.logspace(-3, 3, 25)
    assert bound_check("b", grid, 2 + np.tanh(np.log(grid)), np.ones(25)).passed
    assert not bound_check("b", grid, grid**0.2, np.ones(25)).passed


def test_integral_estimates_stable_constants():
    """For phi = lam^(1/2) each integral has a closed form.

    The truncation at 40 e-folds costs a relative 2 e^-20 in the first two.
    """
    spec = pure_power(1.0)
    lam = np.logspace(-2, 2, 5)
    est = integral_estimates(spec, lam)
    # int_0^{1/l} r^(-1/2) dr = 2 l^(-1/2); rhs = l^(-1) l^(1/2)
    np.testing.assert_allclose(est["sqrt"][0] / est["sqrt"][1], 2.0, rtol=1e-8)
    # l^2 int_0^{1/l} dr + int_{1/l}^inf r^-2 dr = 2 l; rhs = l
    np.testing.assert_allclose(est["linear"][0] / est["linear"][1], 2.0, rtol=1e-8)
    # int_0^{1/l} dr = 1/l; rhs = 1/l
    np.testing.assert_allclose(est["inverse"][0] / est["inverse"][1], 1.0, rtol=1e-10)


def test_suite_config_validation():
    with pytest.raises(ValueError):
        SuiteConfig(negative_control="flip")
    with pytest.raises(ValueError):
        SuiteConfig(checks=("no_such_check",))


def test_quadrature_suite_stable_exact_bands(cauchy, tmp_path):
    res = run_suite(cauchy, 1, SuiteConfig(quadrature_only=True))
    assert res.passed, res.messages()
    # power-law comparators give constant ratios; the heat kernel comparator is a minimum of two branches
    exact = ("levy_density_comparability", "potential_density_comparability", "jump_density_comparability",
             "renewal_comparability")  # fmt: skip
    for name in exact:
        assert res.results[name].band <= 1.01, name
    out = write_bundle(res, tmp_path)
    summary = json.loads((out / "summary.json").read_text())
    assert sorted(summary) == sorted(CHECKS)
    for name, rep in res.results.items():
        csv_path = out / f"{name}.csv"
        assert csv_path.exists() == isinstance(rep, ComparabilityReport)


def test_negative_control_fails_jump_check(cauchy):
    cfg = SuiteConfig(quadrature_only=True, negative_control="wrong_jump_exponent", checks=("jump_density_comparability",))
    res = run_suite(cauchy, 1, cfg)
    assert res.failed == ["jump_density_comparability"]


def test_log1p_fails_certification():
    spec = BernsteinSpec("custom", expr="log1p(lam)")
    res = run_suite(spec, 1, SuiteConfig(quadrature_only=True))
    assert "scaling_certificate" in res.failed
    assert "at_infinity" in res.results["scaling_certificate"].message()
    for name, (stage, needs_cert) in CHECKS.items():
        if needs_cert and stage == "quadrature":
            assert isinstance(res.results[name], Skipped), name


def test_selected_checks_only(mixture):
    res = run_suite(mixture, 1, SuiteConfig(checks=("renewal_comparability",)))
    assert res.results["renewal_comparability"].passed
    skipped = [k for k, v in res.results.items() if isinstance(v, Skipped)]
    assert len(skipped) == len(CHECKS) - 2


def test_mc_check_small(cauchy):
    res = run_suite(cauchy, 1, SuiteConfig(checks=("exit_time_scaling",), mc_n=5000))
    rep = res.results["exit_time_scaling"]
    assert rep.passed and rep.provenance[0] == "mc"
