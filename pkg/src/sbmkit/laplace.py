"""Laplace inversion for completely monotone densities of the subordinator.

The Levy density, potential density and Levy tail are recovered from their
transforms::

    t * mu(t)        <->  phi'(lam)
    u(t)             <->  1 / phi(lam)
    mu((t, inf))     <->  1 / phi*(lam),   phi*(lam) = lam / phi(lam)

Two inversion routes are provided: the fixed Talbot contour (default; needs
the transform off the negative real axis) and Gaver-Stehfest (real axis
only).  Either can cross-check the other.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .bernstein import BernsteinSpec, conjugate
from .errors import BoundViolationWarning, ConvergenceError, DomainError, ParameterError

T_RANGE = (1e-12, 1e12)
MU_BOUND = 1.0 / (1.0 - 2.0 / math.e)
U_BOUND = 1.0 / (1.0 - 1.0 / math.e)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and method parameters shared by every integral in the package.

    ``inversion_method`` is ``"talbot"`` or ``"gaver_stehfest"``; the matching
    ``talbot_nodes`` / ``gs_order`` set its resolution.  ``density_mode``
    chooses between the cached log-grid interpolant of mu and u (``"interp"``)
    and direct inversion at every quadrature node (``"exact"``).
    """

    inversion_method: str = "talbot"
    gs_order: int = 16
    talbot_nodes: int = 32
    abs_tol: float = 1e-14
    rel_tol: float = 1e-8
    cross_check_rtol: float = 1e-6
    max_subdivisions: int = 6
    truncation_exponent_range: tuple = (-12.0, 12.0)
    density_grid_points: int = 512
    density_mode: str = "interp"
    fd_rel_step: float = 1e-6
    bound_factor: float = 1.05
    phi_inv_exponent_range: tuple = (-18.0, 18.0)

    def __post_init__(self):
        if self.inversion_method not in ("talbot", "gaver_stehfest"):
            raise ParameterError("inversion_method must be 'talbot' or 'gaver_stehfest'")
        if self.gs_order % 2 or not 2 <= self.gs_order <= 18:
            raise ParameterError("gaver_stehfest order must be even and <= 18")
        if self.talbot_nodes < 16:
            raise ParameterError("talbot needs at least 16 nodes")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if self.density_mode not in ("interp", "exact"):
            raise ParameterError("density_mode must be 'interp' or 'exact'")

    @property
    def t_range(self):
        lo, hi = self.truncation_exponent_range
        return 10.0**lo, 10.0**hi

    def with_overrides(self, **kw) -> "QuadratureConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class CmFunctionHandle:
    """Laplace transform of a completely monotone density.

    ``transform`` maps lam (real or complex array) to the transform value.
    ``complex_ok`` is False for transforms only known on the positive axis.
    """

    transform: Callable
    label: str = ""
    complex_ok: bool = True


@lru_cache(maxsize=None)
def stehfest_weights(order: int) -> np.ndarray:
    """Exact Gaver-Stehfest weights V_1..V_N, rounded once to float."""
    m = order // 2
    out = []
    for k in range(1, order + 1):
        s = Fraction(0)
        for j in range((k + 1) // 2, min(k, m) + 1):
            s += Fraction(
                j**m * math.factorial(2 * j),
                math.factorial(m - j) * math.factorial(j) * math.factorial(j - 1)
                * math.factorial(k - j) * math.factorial(2 * j - k),
            )
        out.append(float((-1) ** (k + m) * s))
    return np.array(out)


@lru_cache(maxsize=None)
def talbot_contour(nodes: int):
    """Fixed-Talbot contour (Abate-Valko): scaled nodes and weights for t = 1."""
    r = 2.0 * nodes / 5.0
    theta = np.arange(1, nodes) * math.pi / nodes
    cot = 1.0 / np.tan(theta)
    p = np.concatenate([[r + 0j], r * theta * (cot + 1j)])
    sigma = theta + (theta * cot - 1.0) * cot
    w = np.concatenate([[0.5 * math.exp(r) + 0j], np.exp(p[1:]) * (1.0 + 1j * sigma)])
    return p, w * (r / nodes)


@lru_cache(maxsize=None)
def _talbot_log_weights(nodes: int):
    r = 2.0 * nodes / 5.0
    theta = np.arange(1, nodes) * math.pi / nodes
    cot = 1.0 / np.tan(theta)
    sigma = theta + (theta * cot - 1.0) * cot
    p, _ = talbot_contour(nodes)
    logw = np.concatenate([[r + math.log(0.5)], p[1:] + np.log(1.0 + 1j * sigma)])
    return logw + math.log(r / nodes)


def _invert_array(transform, t: np.ndarray, method: str, order: int, chunk: int = 4096, log: bool = False):
    """Invert at every t.  With ``log=True`` (Talbot only) ``transform``
    returns the complex logarithm of the transform, and each term is formed
    as ``exp(log w + log F)`` so that overflow in F at far contour nodes
    cancels against the tiny weights."""
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape)
    flat_t, flat_out = t.ravel(), out.ravel()
    if method == "talbot":
        p, w = talbot_contour(order)
    else:
        w = stehfest_weights(order)
        p = math.log(2.0) * np.arange(1, order + 1)
    for s in range(0, flat_t.size, chunk):
        tt = flat_t[s : s + chunk, None]
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(transform(p[None, :] / tt))
        if log:
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                terms = np.exp(_talbot_log_weights(order)[None, :] + vals).real
        elif method == "talbot":
            terms = (w[None, :] * vals).real
        else:
            terms = w[None, :] * np.real(vals)
        flat_out[s : s + chunk] = terms.sum(axis=1) / tt[:, 0]
    if method == "gaver_stehfest":
        out *= math.log(2.0)
    return out


def _check_t(t, cfg: QuadratureConfig):
    arr = np.asarray(t, dtype=float)
    lo, hi = cfg.t_range
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("t must be positive")
    if np.any(arr < lo * (1 - 1e-12)) or np.any(arr > hi * (1 + 1e-12)):
        raise DomainError(f"t outside supported range [{lo:g}, {hi:g}]")
    return arr


def _method_order(cfg, method=None):
    method = method or cfg.inversion_method
    return method, (cfg.talbot_nodes if method == "talbot" else cfg.gs_order)


def invert_cm(
    handle: CmFunctionHandle,
    t,
    config: QuadratureConfig = DEFAULT_CONFIG,
    cross_check: bool = False,
    method: str | None = None,
    check_convergence: bool = True,
):
    """Value at ``t`` of the completely monotone density whose transform is ``handle``.

    Raises :class:`ConvergenceError` when the result is negative or not finite
    (the complete-monotonicity assumption is violated or the method broke
    down), when a reduced-resolution run disagrees (oscillation), or in
    ``cross_check`` mode when Talbot and Gaver-Stehfest disagree by more than
    ``max(abs_tol, cross_check_rtol * value)``.
    """
    tt = _check_t(t, config)
    method, order = _method_order(config, method)
    if method == "talbot" and not handle.complex_ok:
        method, order = "gaver_stehfest", config.gs_order
    val = _invert_array(handle.transform, tt, method, order)
    if np.any(~np.isfinite(val)):
        raise ConvergenceError(f"{method} inversion of {handle.label or 'transform'} is not finite")
    if np.any(val < 0):
        raise ConvergenceError(
            f"{method} inversion of {handle.label or 'transform'} is negative; "
            "transform is not that of a completely monotone density"
        )
    if check_convergence:
        coarse_order = order - 8 if method == "talbot" else order - 2
        coarse = _invert_array(handle.transform, tt, method, coarse_order)
        limit = 1e-6 if method == "talbot" else 1e-3
        if np.any(np.abs(coarse - val) > np.maximum(config.abs_tol, limit * np.abs(val))):
            raise ConvergenceError(f"{method} inversion not converged (order {coarse_order} vs {order})")
    if cross_check:
        other = "gaver_stehfest" if method == "talbot" else "talbot"
        _, o_order = _method_order(config, other)
        alt = _invert_array(handle.transform, tt, other, o_order)
        tol = np.maximum(config.abs_tol, config.cross_check_rtol * np.abs(val))
        if np.any(np.abs(alt - val) > tol):
            worst = float(np.max(np.abs(alt - val) / np.abs(val)))
            raise ConvergenceError(f"talbot and gaver_stehfest disagree (max rel diff {worst:.3g})")
    return float(val) if np.ndim(val) == 0 else val


# ------------------------------------------------------------------ handles


def mu_handle(spec: BernsteinSpec, config: QuadratureConfig = DEFAULT_CONFIG) -> CmFunctionHandle:
    """Transform of t*mu(t), i.e. phi'."""
    return CmFunctionHandle(lambda lam: spec.derivative(lam, config.fd_rel_step), f"phi'[{spec.name}]")


def u_handle(spec: BernsteinSpec) -> CmFunctionHandle:
    return CmFunctionHandle(lambda lam: 1.0 / spec.value(lam), f"1/phi[{spec.name}]")


def _warn_bound(name, value, bound, factor):
    ratio = np.asarray(value) / np.asarray(bound)
    if np.any(ratio > factor):
        warnings.warn(
            f"{name} exceeds its theoretical upper bound by factor {float(np.max(ratio)):.4g}",
            BoundViolationWarning,
            stacklevel=3,
        )


def mu_upper_bound(spec: BernsteinSpec, t):
    t = np.asarray(t, dtype=float)
    return MU_BOUND * np.real(spec.value(1.0 / t)) / t


def u_upper_bound(spec: BernsteinSpec, t):
    t = np.asarray(t, dtype=float)
    return U_BOUND / (t * np.real(spec.value(1.0 / t)))


def tail_upper_bound(spec: BernsteinSpec, t):
    # t^-1 phi*(t^-1)^-1 = phi(1/t)
    t = np.asarray(t, dtype=float)
    return U_BOUND * np.real(spec.value(1.0 / t))


def levy_density_mu(spec: BernsteinSpec, t, config: QuadratureConfig = DEFAULT_CONFIG, **kw):
    """Levy density mu(t) of the subordinator."""
    tt = _check_t(t, config)
    val = np.asarray(invert_cm(mu_handle(spec, config), tt, config, **kw)) / tt
    _warn_bound("mu", val, mu_upper_bound(spec, tt), config.bound_factor)
    return float(val) if np.ndim(val) == 0 else val


def potential_density_u(spec: BernsteinSpec, t, config: QuadratureConfig = DEFAULT_CONFIG, **kw):
    """Potential density u(t) of the subordinator."""
    tt = _check_t(t, config)
    val = invert_cm(u_handle(spec), tt, config, **kw)
    _warn_bound("u", val, u_upper_bound(spec, tt), config.bound_factor)
    return val


def levy_tail(spec: BernsteinSpec, t, config: QuadratureConfig = DEFAULT_CONFIG, **kw):
    """Tail mu((t, inf)) as the potential density of the conjugate function."""
    tt = _check_t(t, config)
    val = invert_cm(u_handle(conjugate(spec)), tt, config, **kw)
    _warn_bound("mu tail", val, tail_upper_bound(spec, tt), config.bound_factor)
    return val


# ------------------------------------------------------- cached log-grid tables


class DensityTable:
    """Log-log monotone cubic interpolant of a density on a fixed log grid.

    Outside the grid the density is continued by the power law through the two
    outermost nodes; :meth:`edge_power` exposes those exponents for analytic
    tail corrections.
    """

    def __init__(self, t: np.ndarray, values: np.ndarray, label: str = ""):
        if np.any(values <= 0):
            raise ConvergenceError(f"non-positive density values in table {label}")
        self.t = t
        self.values = values
        self.label = label
        self._lt = np.log(t)
        self._lv = np.log(values)
        self._pchip = PchipInterpolator(self._lt, self._lv, extrapolate=False)
        self.kappa_lo = (self._lv[1] - self._lv[0]) / (self._lt[1] - self._lt[0])
        self.kappa_hi = (self._lv[-1] - self._lv[-2]) / (self._lt[-1] - self._lt[-2])

    def log_value(self, t):
        lt = np.log(np.asarray(t, dtype=float))
        out = self._pchip(lt)
        lo = lt < self._lt[0]
        hi = lt > self._lt[-1]
        out = np.where(lo, self._lv[0] + self.kappa_lo * (lt - self._lt[0]), out)
        out = np.where(hi, self._lv[-1] + self.kappa_hi * (lt - self._lt[-1]), out)
        return out

    def __call__(self, t):
        return np.exp(self.log_value(t))

    def edge_power(self, end: str = "hi"):
        """(t_edge, value_edge, exponent) of the power-law continuation."""
        if end == "hi":
            return self.t[-1], self.values[-1], self.kappa_hi
        return self.t[0], self.values[0], self.kappa_lo


@lru_cache(maxsize=64)
def density_table(spec: BernsteinSpec, kind: str, config: QuadratureConfig = DEFAULT_CONFIG) -> DensityTable:
    """Cached table of ``mu``, ``u`` or ``tail`` on ``density_grid_points`` log nodes."""
    lo, hi = config.t_range
    t = np.logspace(math.log10(lo), math.log10(hi), config.density_grid_points)
    method, order = _method_order(config)
    if kind == "mu":
        vals = _invert_array(mu_handle(spec, config).transform, t, method, order) / t
    elif kind == "u":
        vals = _invert_array(u_handle(spec).transform, t, method, order)
    elif kind == "tail":
        vals = _invert_array(u_handle(conjugate(spec)).transform, t, method, order)
    else:
        raise DomainError(f"unknown density kind {kind!r}")
    return DensityTable(t, vals, f"{kind}[{spec.name}]")


def density_evaluator(spec: BernsteinSpec, kind: str, config: QuadratureConfig = DEFAULT_CONFIG):
    """Callable t -> density honoring ``config.density_mode``.

    In ``exact`` mode every call inverts directly (inside the supported t
    range); outside the range the cached table's power-law continuation is
    used in both modes.
    """
    table = density_table(spec, kind, config)
    if config.density_mode == "interp":
        return table
    method, order = _method_order(config)
    if kind == "mu":
        tr = mu_handle(spec, config).transform
    elif kind == "u":
        tr = u_handle(spec).transform
    else:
        tr = u_handle(conjugate(spec)).transform
    lo, hi = config.t_range

    def exact(t):
        t = np.asarray(t, dtype=float)
        out = table(t)
        inside = (t >= lo) & (t <= hi)
        if np.any(inside):
            v = _invert_array(tr, t[inside], method, order)
            out[inside] = v / t[inside] if kind == "mu" else v
        return out

    exact.edge_power = table.edge_power
    return exact
