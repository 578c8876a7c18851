"""Comparability sweeps and the verification suite.

Every two-sided estimate is checked the same way: evaluate the computed
quantity and its comparator on a grid, take ratios, and require a bounded band
(max/min below a limit) plus, on one-dimensional log grids, a log-log slope of
the ratio below ``slope_limit``.  A wrong exponent shows up as a drifting
ratio, so the slope test catches it even when the band is still narrow.

One-sided bounds with an explicit constant are checked pointwise at a 1.05
tolerance factor; bounds with an unspecified constant are checked by fitting
the constant on the grid and testing that the ratio does not run off at
either end of the grid.

:func:`run_suite` evaluates the checks listed in :data:`CHECKS` in dependency
order and :func:`write_bundle` stores one CSV per check and ``summary.json``.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import spearmanr

from . import laplace
from .bernstein import BernsteinSpec, capital_phi, capital_phi_inv, certify, check_bernstein_sanity
from .errors import CertificationError, SbmError
from .kernels import (
    free_heat_kernel,
    g_estimate,
    green_radial_g,
    half_space_green_estimate,
    j_estimate,
    jump_density_j,
    p_estimate,
    stable_half_space_green,
    transience_status,
)
from .laplace import DEFAULT_CONFIG, QuadratureConfig
from .renewal import bhp_decay_comparator, renewal_table
from .rng import RandomSource

QUADRATURE_BAND = 1e2
MC_BAND = 1e3
SLOPE_LIMIT = 0.05
BOUND_FACTOR = 1.05
# margin between a fitted index and a critical value such as d/2
INDEX_TOL = 0.02

# name -> (stage, needs a scaling certificate)
CHECKS: dict[str, tuple[str, bool]] = {
    "bernstein_sanity": ("sanity", False),
    "scaling_certificate": ("sanity", False),
    "levy_density_upper_bound": ("density", False),
    "potential_density_upper_bound": ("density", False),
    "levy_tail_upper_bound": ("density", False),
    "levy_density_comparability": ("density", True),
    "potential_density_comparability": ("density", True),
    "integral_estimate_sqrt": ("integral", True),
    "integral_estimate_linear": ("integral", True),
    "integral_estimate_inverse": ("integral", True),
    "jump_density_comparability": ("kernel", True),
    "green_function_comparability": ("kernel", True),
    "free_heat_kernel_comparability": ("kernel", True),
    "half_space_green_comparability": ("kernel", True),
    "renewal_comparability": ("renewal", True),
    "exit_time_scaling": ("mc", True),
    "poisson_kernel_shells": ("mc", True),
    "half_space_survival": ("mc", True),
    "half_space_heat_kernel": ("mc", True),
    "boundary_harnack_ratio": ("mc", True),
    "boundary_decay_rate": ("mc", True),
}


@dataclass
class ComparabilityReport:
    """Outcome of one check.

    ``ratios`` are value/estimate per grid point.  For band checks ``passed``
    requires ``ratio_max / ratio_min <= band_limit``, no failed point and, when
    ``slope_limit`` is set, ``|slope| <= slope_limit``.
    """

    name: str
    grid: np.ndarray
    ratios: np.ndarray
    ratio_min: float
    ratio_max: float
    band_limit: float | None
    passed: bool
    provenance: list
    slope: float | None = None
    slope_limit: float | None = None
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def band(self) -> float:
        return self.ratio_max / self.ratio_min if self.ratio_min > 0 else math.inf

    @property
    def n_points(self) -> int:
        return int(np.size(self.ratios))

    def message(self) -> str:
        state = "passed" if self.passed else "FAILED"
        text = f"{self.name}: {state}; ratio in [{self.ratio_min:.4g}, {self.ratio_max:.4g}]"
        if self.band_limit is not None:
            text += f", band {self.band:.4g} (limit {self.band_limit:g})"
        if self.slope is not None:
            text += f", slope {self.slope:+.4f}"
        if self.failures:
            text += "; " + "; ".join(str(f) for f in self.failures[:3])
        return text

    def summary(self) -> dict:
        return {
            "passed": bool(self.passed),
            "ratio_min": _json_float(self.ratio_min),
            "ratio_max": _json_float(self.ratio_max),
            "n_points": self.n_points,
        }

    def to_csv(self, path) -> None:
        grid = np.asarray(self.grid)
        grid = grid.reshape(len(grid), -1) if grid.size else grid.reshape(0, 1)
        ratios = np.asarray(self.ratios, dtype=float).ravel()
        prov = list(self.provenance) + [""] * (len(ratios) - len(self.provenance))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k}" for k in range(grid.shape[1])] + ["ratio", "provenance"])
            for row, q, p in zip(grid, ratios, prov):
                w.writerow([repr(float(v)) for v in row] + [repr(float(q)), p])


@dataclass
class Skipped:
    name: str
    reason: str

    def message(self) -> str:
        return f"{self.name}: skipped ({self.reason})"

    def summary(self) -> dict:
        return {"passed": None, "skipped": self.reason, "ratio_min": None, "ratio_max": None, "n_points": 0}


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def log_slope(grid, ratios) -> float:
    """Least-squares slope of log(ratio) against log(grid)."""
    return float(np.polyfit(np.log(grid), np.log(ratios), 1)[0])


def _evaluate(fn, grid):
    """Vectorized call with a pointwise retry that records failures."""
    try:
        out = np.asarray(fn(grid), dtype=float)
        if out.shape == np.shape(grid)[:1]:
            return out, []
    except (SbmError, ValueError, ArithmeticError):
        pass
    out = np.full(len(grid), np.nan)
    failures = []
    for k, g in enumerate(grid):
        try:
            out[k] = float(fn(np.asarray([g]))[0])
        except (SbmError, ValueError, ArithmeticError) as exc:
            failures.append(f"point {k} ({g}): {type(exc).__name__}: {exc}")
    return out, failures


def comparability_sweep(
    value_fn: Callable,
    estimate_fn: Callable,
    grid,
    band_limit: float = QUADRATURE_BAND,
    name: str = "comparability",
    provenance: str = "quadrature",
    slope_limit: float | None = SLOPE_LIMIT,
) -> ComparabilityReport:
    """Evaluate ``value_fn`` and ``estimate_fn`` on ``grid`` and test the band.

    Both functions take the whole grid (an array of points) and return one
    value per point.  The slope test needs a 1-d positive grid; pass
    ``slope_limit=None`` otherwise.
    """
    if not band_limit > 1:
        raise ValueError("band_limit must exceed 1")
    grid = np.asarray(grid, dtype=float)
    vals, fail_v = _evaluate(value_fn, grid)
    ests, fail_e = _evaluate(estimate_fn, grid)
    with np.errstate(all="ignore"):
        ratios = vals / ests
    failures = fail_v + fail_e
    bad = ~(np.isfinite(ratios) & (ratios > 0))
    if bad.any():
        failures.append(f"{int(bad.sum())} non-positive or non-finite ratios")
    good = ratios[~bad]
    rmin = float(good.min()) if good.size else math.nan
    rmax = float(good.max()) if good.size else math.nan
    slope = None
    if slope_limit is not None and grid.ndim == 1 and good.size >= 2:
        slope = log_slope(grid[~bad], good)
    passed = not failures and rmax / rmin <= band_limit
    if slope is not None and abs(slope) > slope_limit:
        passed = False
        failures.append(f"log-slope {slope:+.4f} exceeds {slope_limit:g}")
    if good.size and rmax / rmin > band_limit:
        failures.append(f"band {rmax / rmin:.4g} exceeds {band_limit:g}")
    return ComparabilityReport(
        name, grid, ratios, rmin, rmax, band_limit, bool(passed), [provenance] * len(grid),
        slope, slope_limit, failures,
    )  # fmt: skip


def bound_check(
    name: str,
    grid,
    lhs,
    rhs,
    constant: float | None = None,
    factor: float = BOUND_FACTOR,
    slope_limit: float = SLOPE_LIMIT,
    end_decades: float = 1.0,
    provenance: str = "quadrature",
) -> ComparabilityReport:
    """One-sided bound ``lhs <= C * rhs``.

    With ``constant`` given, every point must satisfy ``lhs <= factor*C*rhs``.
    Without it, ``C`` is fitted as the largest ratio and the check fails if the
    ratio is still growing toward either end of the grid (a log-slope above
    ``slope_limit`` over the outermost ``end_decades``), which is how an
    unbounded ratio shows up on a finite grid.
    """
    grid = np.asarray(grid, dtype=float)
    ratios = np.asarray(lhs, dtype=float) / np.asarray(rhs, dtype=float)
    failures = []
    if not np.all(np.isfinite(ratios) & (ratios > 0)):
        failures.append("non-positive or non-finite values")
    extra: dict = {}
    if constant is not None:
        viol = np.flatnonzero(ratios > factor * constant)
        extra["constant"] = constant
        for k in viol[:5]:
            failures.append(f"violated at {grid[k]:.4g}: ratio {ratios[k]:.6g} > {factor:g}*{constant:.6g}")
        if viol.size:
            failures.append(f"{viol.size} violations")
    else:
        lg = np.log10(grid)
        lo = lg <= lg[0] + end_decades
        hi = lg >= lg[-1] - end_decades
        s_lo = log_slope(grid[lo], ratios[lo])
        s_hi = log_slope(grid[hi], ratios[hi])
        extra.update(fitted_constant=float(np.max(ratios)), end_slopes=(s_lo, s_hi))
        if s_hi > slope_limit:
            failures.append(f"ratio grows toward the upper end (slope {s_hi:+.4f})")
        if s_lo < -slope_limit:
            failures.append(f"ratio grows toward the lower end (slope {s_lo:+.4f})")
    return ComparabilityReport(
        name, grid, ratios, float(np.min(ratios)), float(np.max(ratios)), None, not failures,
        [provenance] * len(grid), None, None, failures, extra,
    )  # fmt: skip


# ---------------------------------------------------------------- integral checks

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _log_integral(f, a, b, h=0.25):
    """int_a^b f(r) dr for each row of the bounds, with r = e^y and GL panels of width h in y."""
    ya, yb = np.log(a), np.log(b)
    n = int(np.ceil(np.max(yb - ya) / h))
    steps = (yb - ya) / n
    total = np.zeros_like(ya)
    for k in range(n):
        lo = ya + k * steps
        y = lo[:, None] + (0.5 * (_GL_X + 1))[None, :] * steps[:, None]
        r = np.exp(y)
        total += np.sum(f(r) * r * _GL_W[None, :], axis=1) * 0.5 * steps
    return total


def integral_estimates(spec: BernsteinSpec, lam, span: float = 40.0) -> dict:
    """Left- and right-hand sides of the three power-integral inequalities.

    Returns ``{"sqrt": (lhs, rhs), "linear": ..., "inverse": ...}`` for
    ``int_0^{1/lam} phi(r^-2)^(1/2) dr <= c lam^-1 phi(lam^2)^(1/2)``,
    ``lam^2 int_0^{1/lam} r phi(r^-2) dr + int_{1/lam}^inf phi(r^-2)/r dr <= c phi(lam^2)``
    and ``int_0^{1/lam} dr / (r phi(r^-2)) <= c / phi(lam^2)``.  Integrals run
    over ``span`` e-folds on the decaying side of ``1/lam``.
    """
    lam = np.asarray(lam, dtype=float)
    top = 1.0 / lam
    low = top * math.exp(-span)

    def phi_inv_sq(r):
        return np.real(spec.value(r**-2.0))

    p2 = np.real(spec.value(lam**2))
    sqrt_l = _log_integral(lambda r: np.sqrt(phi_inv_sq(r)), low, top)
    lin_near = lam**2 * _log_integral(lambda r: r * phi_inv_sq(r), low, top)
    lin_far = _log_integral(lambda r: phi_inv_sq(r) / r, top, top * math.exp(span))
    inv_l = _log_integral(lambda r: 1.0 / (r * phi_inv_sq(r)), low, top)
    return {
        "sqrt": (sqrt_l, np.sqrt(p2) / lam),
        "linear": (lin_near + lin_far, p2),
        "inverse": (inv_l, 1.0 / p2),
    }


# ---------------------------------------------------------------- suite


def log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.logspace(math.log10(lo), math.log10(hi), n)


@dataclass
class SuiteConfig:
    """Knobs for :func:`run_suite`.

    ``negative_control="wrong_jump_exponent"`` swaps the jump comparator for
    ``r^-d phi(r^-1)``; the jump check must then fail.
    """

    quadrature_only: bool = False
    grid: tuple = (1e-3, 1e3, 16)
    mc_n: int = 20000
    seed: int = 0
    quadrature_band: float = QUADRATURE_BAND
    mc_band: float = MC_BAND
    slope_limit: float = SLOPE_LIMIT
    negative_control: str | None = None
    workers: int | None = None
    checks: tuple | None = None
    quadrature: QuadratureConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.negative_control not in (None, "wrong_jump_exponent"):
            raise ValueError(f"unknown negative control {self.negative_control!r}")
        if self.checks is not None:
            unknown = set(self.checks) - set(CHECKS)
            if unknown:
                raise ValueError(f"unknown checks {sorted(unknown)}; valid: {', '.join(CHECKS)}")


@dataclass
class SuiteResult:
    spec: str
    d: int
    results: dict

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.results.items() if isinstance(v, ComparabilityReport) and not v.passed]

    @property
    def passed(self) -> bool:
        return not self.failed

    def summary(self) -> dict:
        return {k: v.summary() for k, v in self.results.items()}

    def messages(self) -> list[str]:
        return [v.message() for v in self.results.values()]


def _pointwise(fn):
    return lambda g: np.array([fn(x) for x in g])


def bhp_geometry(d: int, R: float):
    """Window ``(-R, R)^(d-1) x (0, R)`` with targets above it: A at heights [R, 2R), B beyond 2R."""
    lat_lo, lat_hi = [-R] * (d - 1), [R] * (d - 1)
    from .simulate import Domain

    window = Domain.box(lat_lo + [0.0], lat_hi + [R])
    a = (np.array(lat_lo + [R]), np.array(lat_hi + [2 * R]))
    b = (np.array(lat_lo + [2 * R]), np.array(lat_hi + [np.inf]))
    return window, [a, b]


def bhp_points(d: int, R: float, count: int = 5):
    return [np.concatenate([np.zeros(d - 1), [z]]) for z in np.geomspace(R / 10, R / 3, count)]


def bhp_pairs(spec, sampler, d, R, n, source, workers=None, count=5):
    """All pairs of ``count`` points at depths in [R/10, R/3], one run per point."""
    from .simulate import bhp_ratios, choose_dt, harmonic_exit_counts

    window, targets = bhp_geometry(d, R)
    pts = bhp_points(d, R, count)
    dt = choose_dt(spec, pts[0][-1])
    counts = [harmonic_exit_counts(spec, sampler, window, p, targets, n, dt, source, workers=workers) for p in pts]
    out = []
    for i, j in itertools.combinations(range(count), 2):
        comp = float(bhp_decay_comparator(spec, pts[i][-1], pts[j][-1]))
        out.append(((pts[i][-1], pts[j][-1]), bhp_ratios(counts[i], counts[j], n, comp, {"dt": dt})))
    return out


class _Runner:
    def __init__(self, spec: BernsteinSpec, d: int, cfg: SuiteConfig):
        self.spec, self.d, self.cfg = spec, d, cfg
        self.qc = cfg.quadrature
        lo, hi, ppd = cfg.grid
        self.grid = log_grid(lo, hi, int(ppd))
        self.cert = None
        self.source = RandomSource(cfg.seed)
        self._sampler = None

    @property
    def sampler(self):
        if self._sampler is None:
            from .simulate import make_sampler

            self._sampler = make_sampler(self.spec, config=self.qc)
        return self._sampler

    def sweep(self, name, value_fn, est_fn, grid=None, slope=True):
        return comparability_sweep(
            value_fn, est_fn, self.grid if grid is None else grid, self.cfg.quadrature_band, name,
            "quadrature", self.cfg.slope_limit if slope else None,
        )  # fmt: skip

    def mc_report(self, name, grid, ratios, rmin=None, rmax=None, extra=None, failures=None):
        ratios = np.asarray(ratios, dtype=float)
        failures = list(failures or [])
        if ratios.size == 0:
            failures.append("no usable Monte Carlo cells")
        rmin = float(np.min(ratios)) if rmin is None and ratios.size else (rmin if rmin is not None else math.nan)
        rmax = float(np.max(ratios)) if rmax is None and ratios.size else (rmax if rmax is not None else math.nan)
        band = rmax / rmin if rmin > 0 else math.inf
        if not band <= self.cfg.mc_band:
            failures.append(f"band {band:.4g} exceeds {self.cfg.mc_band:g}")
        return ComparabilityReport(
            name, np.asarray(grid, dtype=float), ratios, rmin, rmax, self.cfg.mc_band, not failures,
            ["mc"] * len(ratios), failures=failures, extra=extra or {},
        )  # fmt: skip

    # -- sanity
    def bernstein_sanity(self):
        rep = check_bernstein_sanity(self.spec)
        lam = np.logspace(-4, 4, 33)
        ratios = lam * np.asarray(self.spec.derivative(lam)) / np.real(self.spec.value(lam))
        fail = [] if rep.passed else [f"{rep.violation.check} violated at {rep.violation.inputs}"]
        return ComparabilityReport(
            "bernstein_sanity", lam, ratios, float(ratios.min()), float(ratios.max()), None, rep.passed,
            ["direct"] * lam.size, failures=fail, extra={"n_checked": rep.n_checked},
        )  # fmt: skip

    def scaling_certificate(self):
        try:
            self.cert = certify(self.spec)
        except CertificationError as exc:
            return ComparabilityReport(
                "scaling_certificate", np.array([]), np.array([]), math.nan, math.nan, None, False, [],
                failures=[f"certification failed ({exc.side}): {exc}"], extra={"side": exc.side},
            )  # fmt: skip
        idx = np.array([self.cert.delta1, self.cert.delta2, self.cert.delta3, self.cert.delta4])
        return ComparabilityReport(
            "scaling_certificate", np.arange(1, 5, dtype=float), idx, float(idx.min()), float(idx.max()), None,
            True, ["grid_fit"] * 4, extra=self.cert.to_dict(),
        )  # fmt: skip

    # -- densities
    def _density_bound(self, name, fn, bound):
        t = self.grid
        val = fn(self.spec, t, self.qc)
        return bound_check(name, t, val, bound(self.spec, t), constant=1.0)

    def levy_density_upper_bound(self):
        return self._density_bound("levy_density_upper_bound", laplace.levy_density_mu, laplace.mu_upper_bound)

    def potential_density_upper_bound(self):
        return self._density_bound(
            "potential_density_upper_bound", laplace.potential_density_u, laplace.u_upper_bound
        )

    def levy_tail_upper_bound(self):
        return self._density_bound("levy_tail_upper_bound", laplace.levy_tail, laplace.tail_upper_bound)

    def levy_density_comparability(self):
        s = self.spec
        return self.sweep(
            "levy_density_comparability",
            lambda t: laplace.levy_density_mu(s, t, self.qc),
            lambda t: np.real(s.value(1.0 / t)) / t,
        )

    def potential_density_comparability(self):
        s = self.spec
        return self.sweep(
            "potential_density_comparability",
            lambda t: laplace.potential_density_u(s, t, self.qc),
            lambda t: 1.0 / (t * np.real(s.value(1.0 / t))),
        )

    # -- integrals
    def _integral(self, key):
        lhs, rhs = integral_estimates(self.spec, self.grid)[key]
        return bound_check(f"integral_estimate_{key}", self.grid, lhs, rhs, slope_limit=self.cfg.slope_limit)

    def integral_estimate_sqrt(self):
        return self._integral("sqrt")

    def integral_estimate_linear(self):
        return self._integral("linear")

    def integral_estimate_inverse(self):
        return self._integral("inverse")

    # -- kernels
    def jump_density_comparability(self):
        s, d = self.spec, self.d
        if self.cfg.negative_control == "wrong_jump_exponent":
            est = lambda r: r ** (-d) * np.real(s.value(1.0 / r))  # noqa: E731
        else:
            est = lambda r: j_estimate(s, d, r)  # noqa: E731
        return self.sweep("jump_density_comparability", lambda r: jump_density_j(s, d, r, self.qc), est)

    def green_function_comparability(self):
        s, d = self.spec, self.d
        status = transience_status(s, d)
        if status != "transient":
            return f"process is {status} in d={d}"
        if not d / 2 > self.cert.delta_upper + INDEX_TOL:
            return f"d/2={d / 2:g} does not exceed (delta2 v delta4)={self.cert.delta_upper:.3g} by {INDEX_TOL:g}"
        return self.sweep(
            "green_function_comparability", lambda r: green_radial_g(s, d, r, self.qc), lambda r: g_estimate(s, d, r)
        )

    def free_heat_kernel_comparability(self):
        s, d = self.spec, self.d
        pts = []
        for t in (1e-2, 1.0, 1e2):
            scale = capital_phi_inv(s, t)
            pts += [(t, 0.0)] + [(t, scale * q) for q in np.logspace(-1, 2, 13)]
        pts = np.array(pts)

        def value(g):
            out = np.empty(len(g))
            for t in np.unique(g[:, 0]):
                sel = g[:, 0] == t
                out[sel] = free_heat_kernel(s, d, t, g[sel, 1], self.qc)
            return out

        def est(g):
            return np.array([p_estimate(s, d, t, r) for t, r in g])

        return self.sweep("free_heat_kernel_comparability", value, est, grid=pts, slope=False)

    def half_space_green_comparability(self):
        s, d = self.spec, self.d
        if s.family != "pure_power":
            return "closed-form half-space Green function only for pure powers"
        alpha = s.p["alpha"]
        try:
            half_space_green_estimate(s, d, np.r_[np.zeros(d - 1), 1.0], np.r_[np.zeros(d - 1), 2.0], self.cert)
        except SbmError as exc:
            return str(exc)
        pts = []
        for xd, yd, lat in itertools.product(np.logspace(-2, 1, 4), np.logspace(-2, 1, 4), (0.0, 1.0)):
            if (d == 1 and lat) or (not lat and xd == yd):
                continue
            x = np.r_[np.zeros(d - 1), xd]
            y = np.r_[np.full(d - 1, lat), yd]
            pts.append(np.r_[x, y])
        pts = np.array(pts)
        value = _pointwise(lambda p: stable_half_space_green(d, alpha, p[:d], p[d:]))
        est = _pointwise(lambda p: half_space_green_estimate(s, d, p[:d], p[d:], self.cert).value)
        return self.sweep("half_space_green_comparability", value, est, grid=pts, slope=False)

    # -- renewal
    def renewal_comparability(self):
        s = self.spec
        table = renewal_table(s, config=self.qc)
        return self.sweep("renewal_comparability", table.V, lambda r: 1.0 / np.sqrt(np.real(s.value(r**-2.0))))

    # -- Monte Carlo
    def exit_time_scaling(self):
        from .simulate import mc_exit_ball

        s, d, n = self.spec, self.d, self.cfg.mc_n
        radii = np.array([0.1, 1.0, 10.0])
        ratios, notes = [], []
        for r in radii:
            res = mc_exit_ball(s, self.sampler, d, np.zeros(d), r, np.zeros(d), n, source=self.source,
                               workers=self.cfg.workers)  # fmt: skip
            ratios.append(res.mean_exit_time.value / capital_phi(s, r))
            notes.append(res.mean_exit_time.to_dict())
        return self.mc_report("exit_time_scaling", radii, ratios, extra={"estimates": notes})

    def poisson_kernel_shells(self):
        from .simulate import mc_exit_density_check

        rep = mc_exit_density_check(self.spec, self.sampler, self.d, 1.0, self.cfg.mc_n, source=self.source,
                                    config=self.qc, workers=self.cfg.workers)  # fmt: skip
        u = rep.usable
        mid = np.sqrt(rep.edges[:-1] * rep.edges[1:])
        if not u.any():
            return self.mc_report("poisson_kernel_shells", [], [])
        # density <= c1 * upper comparator and density >= c2 * lower comparator
        lo = float(np.min(rep.lower_ratio[u]))
        hi = float(np.max(rep.upper_ratio[u]))
        return self.mc_report(
            "poisson_kernel_shells", mid[u], rep.density[u] / np.sqrt(rep.lower_comparator[u] * rep.upper_comparator[u]),
            rmin=lo, rmax=hi, extra={"hits": rep.hits.tolist()},
        )  # fmt: skip

    def _half_space_starts(self, t=1.0):
        return capital_phi_inv(self.spec, t) * np.array([0.05, 0.2, 1.0, 5.0])

    def half_space_survival(self):
        from .simulate import mc_survival_half_space

        s, d, t = self.spec, self.d, 1.0
        xs = self._half_space_starts(t)
        surv, ratios = [], []
        for xd in xs:
            est = mc_survival_half_space(s, self.sampler, d, np.r_[np.zeros(d - 1), xd], t, self.cfg.mc_n,
                                         source=self.source, workers=self.cfg.workers)  # fmt: skip
            surv.append(est.value)
            ratios.append(est.value / min(1.0, math.sqrt(capital_phi(s, xd) / t)))
        rho = float(spearmanr(xs, surv)[0])
        fail = [] if rho > 0.9 else [f"survival not monotone in depth (Spearman {rho:.3f})"]
        return self.mc_report("half_space_survival", xs, ratios, extra={"survival": surv, "spearman": rho},
                              failures=fail)  # fmt: skip

    def half_space_heat_kernel(self):
        from .simulate import log_cells, mc_half_space_heat_kernel

        s, d, t = self.spec, self.d, 1.0
        scale = capital_phi_inv(s, t)
        cells = log_cells(d, 1e-2 * scale, 1e2 * scale, 40, lateral=0.5 * scale)
        grid, ratios = [], []
        for xd in self._half_space_starts(t):
            res = mc_half_space_heat_kernel(s, self.sampler, d, t, np.r_[np.zeros(d - 1), xd], cells, self.cfg.mc_n,
                                            source=self.source, workers=self.cfg.workers)  # fmt: skip
            for c in res.cells:
                if c.usable:
                    grid.append((xd, c.center[-1]))
                    ratios.append(c.ratio)
        return self.mc_report("half_space_heat_kernel", grid, ratios)

    def _bhp(self):
        if not hasattr(self, "_bhp_cache"):
            self._bhp_cache = []
            for R in (1.0, 100.0):
                for depths, res in bhp_pairs(self.spec, self.sampler, self.d, R, self.cfg.mc_n, self.source,
                                             self.cfg.workers):  # fmt: skip
                    self._bhp_cache.append((R, *depths, res))
        return self._bhp_cache

    def boundary_harnack_ratio(self):
        rows = self._bhp()
        return self.mc_report("boundary_harnack_ratio", [r[:3] for r in rows], [r[3].double_ratio.value for r in rows])

    def boundary_decay_rate(self):
        rows = self._bhp()
        return self.mc_report(
            "boundary_decay_rate", [r[:3] for r in rows], [r[3].single_ratio.value / r[3].comparator for r in rows]
        )


def run_suite(spec: BernsteinSpec, d: int, config: SuiteConfig | None = None) -> SuiteResult:
    """Run every check of :data:`CHECKS` in order; failed prerequisites turn dependents into skips."""
    cfg = config or SuiteConfig()
    if d < 1:
        raise ValueError("d must be >= 1")
    run = _Runner(spec, d, cfg)
    results: dict = {}
    for name, (stage, needs_cert) in CHECKS.items():
        if cfg.checks is not None and name not in cfg.checks and name != "scaling_certificate":
            results[name] = Skipped(name, "not selected")
            continue
        if stage == "mc" and cfg.quadrature_only:
            results[name] = Skipped(name, "quadrature-only run")
            continue
        if needs_cert and run.cert is None:
            results[name] = Skipped(name, "scaling certificate unavailable")
            continue
        sanity = results.get("bernstein_sanity")
        if name == "scaling_certificate" and isinstance(sanity, ComparabilityReport) and not sanity.passed:
            results[name] = Skipped(name, "Bernstein sanity check failed")
            continue
        try:
            out = getattr(run, name)()
        except SbmError as exc:
            out = ComparabilityReport(
                name, np.array([]), np.array([]), math.nan, math.nan, None, False, [],
                failures=[f"{type(exc).__name__}: {exc}"],
            )  # fmt: skip
        results[name] = Skipped(name, out) if isinstance(out, str) else out
    return SuiteResult(spec.name, d, results)


def write_bundle(result: SuiteResult, out_dir) -> Path:
    """One CSV per evaluated check plus ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rep in result.results.items():
        if isinstance(rep, ComparabilityReport):
            rep.to_csv(out / f"{name}.csv")
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    return out
