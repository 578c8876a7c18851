"""Complete Bernstein functions: evaluation, derived transforms and scaling certificates.

A :class:`BernsteinSpec` names one of the built-in families (or a custom
evaluator) together with its parameters.  Values are normalized so that
``phi(1) == 1`` by dividing by the raw value at one; the raw family stays
inspectable through :func:`eval_phi_raw`.

All internal evaluators accept complex arguments off the negative real axis
(principal branches), which the Talbot inversion in :mod:`sbmkit.laplace`
relies on.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import bernoulli

from .errors import CertificationError, ConvergenceError, DomainError, ParameterError

FAMILIES: dict[str, tuple[str, ...]] = {
    "sum_of_powers": ("alpha", "beta"),
    "power_of_shifted": ("alpha", "beta"),
    "power_log": ("alpha", "beta"),
    "power_over_log": ("alpha", "beta"),
    "log_cosh": ("alpha",),
    "log_sinh": ("alpha",),
    "pure_power": ("alpha",),
    "custom": (),
}
# derived families are produced by conjugate()/rescale(), never typed by hand
DERIVED = ("conjugate", "rescaled")

# default parameters used by the verification suite for the six example families
EXAMPLE_FAMILIES: dict[str, dict[str, float]] = {
    "sum_of_powers": {"alpha": 0.3, "beta": 0.7},
    "power_of_shifted": {"alpha": 0.5, "beta": 0.5},
    "power_log": {"alpha": 0.5, "beta": 0.3},
    "power_over_log": {"alpha": 0.5, "beta": 0.3},
    "log_cosh": {"alpha": 0.5},
    "log_sinh": {"alpha": 0.5},
}

_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("log", "log1p", "exp", "expm1", "sqrt", "cosh", "sinh", "tanh", "arctan", "abs")
}
_EXPR_NAMESPACE["pi"] = math.pi


def _check_params(family: str, p: Mapping[str, float]) -> None:
    if family not in FAMILIES and family not in DERIVED:
        raise ParameterError(
            f"unknown family {family!r}; valid families: {', '.join(FAMILIES)}"
        )
    missing = [k for k in FAMILIES.get(family, ()) if k not in p]
    if missing:
        raise ParameterError(f"{family} requires parameters {missing}")
    a = p.get("alpha")
    b = p.get("beta")
    ok = True
    if family == "sum_of_powers":
        ok = 0 < a < b < 1
    elif family == "power_of_shifted":
        ok = 0 < a < 1 and 0 < b < 1
    elif family == "power_log":
        ok = 0 < a < 1 and 0 < b < 1 - a
    elif family == "power_over_log":
        ok = 0 < a < 1 and 0 < b < a
    elif family in ("log_cosh", "log_sinh"):
        ok = 0 < a < 1
    elif family == "pure_power":
        ok = 0 < a < 2
    elif family == "rescaled":
        ok = p.get("a", 0) > 0
    if not ok:
        raise ParameterError(f"parameters {dict(p)} out of range for {family}")


@dataclass(frozen=True)
class BernsteinSpec:
    """A named complete Bernstein function.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES` (or a derived family built by :func:`conjugate`
        / :func:`rescale`).
    params : mapping
        Family parameters, e.g. ``{"alpha": 0.3, "beta": 0.7}``.
    normalize : bool
        Divide by the raw value at 1 so that ``phi(1) == 1``.
    expr : str, optional
        Custom family only: numpy expression in the variable ``lam``.
    func, dfunc : callable, optional
        Custom family only: evaluator and (optional) derivative.
    base : BernsteinSpec, optional
        Derived families only.
    """

    family: str
    params: tuple = ()
    normalize: bool = True
    expr: str | None = None
    func: Callable | None = field(default=None, repr=False)
    dfunc: Callable | None = field(default=None, repr=False)
    base: "BernsteinSpec | None" = None
    label: str = ""

    def __post_init__(self):
        params = self.params
        if isinstance(params, Mapping):
            params = tuple(sorted((str(k), float(v)) for k, v in params.items()))
            object.__setattr__(self, "params", params)
        _check_params(self.family, dict(params))
        if self.family == "custom":
            if self.func is None and self.expr is None:
                raise ParameterError("custom family needs an expression or an evaluator")
            if self.expr is not None and self.func is None:
                code = compile(self.expr, "<phi expr>", "eval")
                ns = dict(_EXPR_NAMESPACE)

                def _f(lam, _code=code, _ns=ns):
                    return eval(_code, {"__builtins__": {}}, {**_ns, "lam": lam})

                object.__setattr__(self, "func", _f)
        if self.family in DERIVED and self.base is None:
            raise ParameterError(f"{self.family} needs a base spec")
        scale = 1.0
        if self.normalize:
            raw1 = complex(self._raw(np.array([1.0]))[0]).real
            if not (raw1 > 0 and math.isfinite(raw1)):
                raise ParameterError(f"raw value at 1 is {raw1}; cannot normalize")
            scale = 1.0 / raw1
        object.__setattr__(self, "_scale", scale)

    # ------------------------------------------------------------------ access
    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)

    @property
    def scale(self) -> float:
        return self._scale

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.family == "custom":
            return f"custom({self.expr or getattr(self.func, '__name__', 'f')})"
        if self.family in DERIVED:
            args = ",".join(f"{k}={v:g}" for k, v in self.params)
            return f"{self.family}({self.base.name}{',' if args else ''}{args})"
        args = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.family}({args})"

    # ---------------------------------------------------------- raw evaluators
    def _raw(self, lam):
        f, p = self.family, self.p
        if f == "pure_power":
            return lam ** (p["alpha"] / 2)
        if f == "sum_of_powers":
            return lam ** p["alpha"] + lam ** p["beta"]
        if f == "power_of_shifted":
            return (lam + lam ** p["alpha"]) ** p["beta"]
        if f == "power_log":
            return lam ** p["alpha"] * _log1p(lam) ** p["beta"]
        if f == "power_over_log":
            return lam ** p["alpha"] * _log1p(lam) ** (-p["beta"])
        if f == "log_cosh":
            return _log_cosh(np.sqrt(lam)) ** p["alpha"]
        if f == "log_sinh":
            return _log_sinhc(np.sqrt(lam)) ** p["alpha"]
        if f == "custom":
            return np.asarray(self.func(lam))
        if f == "conjugate":
            return lam / self.base.value(lam)
        if f == "rescaled":
            a2 = p["a"] ** -2
            return self.base.value(lam * a2) / self.base.value(a2).real
        raise ParameterError(f"no evaluator for {f}")

    def _raw_prime(self, lam):
        f, p = self.family, self.p
        if f == "pure_power":
            a = p["alpha"] / 2
            return a * lam ** (a - 1)
        if f == "sum_of_powers":
            a, b = p["alpha"], p["beta"]
            return a * lam ** (a - 1) + b * lam ** (b - 1)
        if f == "power_of_shifted":
            a, b = p["alpha"], p["beta"]
            return b * (lam + lam ** a) ** (b - 1) * (1 + a * lam ** (a - 1))
        if f == "power_log":
            a, b = p["alpha"], p["beta"]
            L = _log1p(lam)
            return a * lam ** (a - 1) * L ** b + b * lam ** a * L ** (b - 1) / (1 + lam)
        if f == "power_over_log":
            a, b = p["alpha"], p["beta"]
            L = _log1p(lam)
            return a * lam ** (a - 1) * L ** (-b) - b * lam ** a * L ** (-b - 1) / (1 + lam)
        if f == "log_cosh":
            a = p["alpha"]
            x = np.sqrt(lam)
            return a * _log_cosh(x) ** (a - 1) * _tanhc(x) / 2
        if f == "log_sinh":
            a = p["alpha"]
            x = np.sqrt(lam)
            return a * _log_sinhc(x) ** (a - 1) * _coth_minus_inv(x) / (2 * x)
        if f == "custom" and self.dfunc is not None:
            return np.asarray(self.dfunc(lam))
        if f == "conjugate":
            ph = self.base.value(lam)
            return (ph - lam * self.base.derivative(lam)) / ph**2
        if f == "rescaled":
            a2 = p["a"] ** -2
            return self.base.derivative(lam * a2) * a2 / self.base.value(a2).real
        return None

    # --------------------------------------------------------- normalized API
    def value(self, lam):
        """Normalized value without domain checks (complex input allowed)."""
        return self._scale * self._raw(lam)

    def derivative(self, lam, rel_step: float = 1e-6):
        """Normalized derivative; central difference when no closed form exists."""
        d = self._raw_prime(lam)
        if d is None:
            h = rel_step * lam
            d = (self._raw(lam + h) - self._raw(lam - h)) / (2 * h)
        return self._scale * d

    # ------------------------------------------------------------- (de)serial
    def to_dict(self) -> dict:
        if self.family == "custom" and self.expr is None:
            raise DomainError("custom specs backed by a Python callable are not serializable")
        out = {"family": self.family, "params": self.p, "normalize": self.normalize}
        if self.expr is not None:
            out["expr"] = self.expr
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.label:
            out["label"] = self.label
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "BernsteinSpec":
        try:
            family = d["family"]
        except (KeyError, TypeError):
            raise ParameterError("spec JSON needs a 'family' field") from None
        base = d.get("base")
        return cls(
            family=family,
            params=d.get("params", {}),
            normalize=bool(d.get("normalize", True)),
            expr=d.get("expr"),
            base=cls.from_dict(base) if base is not None else None,
            label=d.get("label", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "BernsteinSpec":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# special-function helpers (complex safe, Re x >= 0)

_SINHC_COEF = np.array([1.0 / math.factorial(2 * k + 1) for k in range(1, 14)])
_B = bernoulli(36)
_COTH_COEF = np.array(
    [2 ** (2 * n) * _B[2 * n] / math.factorial(2 * n) for n in range(1, 18)]
)


def _piecewise(x, small, f_small, f_large):
    x = np.asarray(x)
    out = np.empty(x.shape, dtype=np.result_type(x, float))
    m = small(x)
    if np.any(m):
        out[m] = f_small(x[m])
    if np.any(~m):
        out[~m] = f_large(x[~m])
    return out


def _log1p(z):
    """log(1 + z); numpy's complex log1p loses the real part for small |z|."""
    z = np.asarray(z)
    if not np.iscomplexobj(z):
        return np.log1p(z)

    def series(w):
        acc = np.zeros_like(w)
        for k in range(18, 0, -1):
            acc = w * ((-1) ** (k + 1) / k + acc)
        return acc

    return _piecewise(z, lambda w: np.abs(w) < 0.1, series, lambda w: np.log(1 + w))


def _log_cosh(x):
    """log(cosh(x)) without overflow or cancellation."""
    return _piecewise(
        x,
        lambda z: np.abs(z) < 1.0,
        lambda z: _log1p(2.0 * np.sinh(z / 2) ** 2),
        lambda z: z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0),
    )


def _sinhc_m1(z):
    z2 = z * z
    acc = np.zeros_like(z2)
    for c in _SINHC_COEF[::-1]:
        acc = (acc + c) * z2
    return acc


def _log_sinhc(x):
    """log(sinh(x)/x) without cancellation near 0."""
    return _piecewise(
        x,
        lambda z: np.abs(z) < 1.0,
        lambda z: _log1p(_sinhc_m1(z)),
        lambda z: z + np.log1p(-np.exp(-2.0 * z)) - math.log(2.0) - np.log(z),
    )


def _tanhc(x):
    """tanh(x)/x."""

    def large(z):
        e = np.exp(-2.0 * z)
        return (1 - e) / (1 + e) / z

    return _piecewise(x, lambda z: np.abs(z) < 1.0, lambda z: np.tanh(z) / z, large)


def _coth_minus_inv(x):
    """coth(x) - 1/x."""

    def small(z):
        z2 = z * z
        acc = np.zeros_like(z2)
        for c in _COTH_COEF[::-1]:
            acc = acc * z2 + c
        return acc * z

    def large(z):
        e = np.exp(-2.0 * z)
        return (1 + e) / (1 - e) - 1 / z

    return _piecewise(x, lambda z: np.abs(z) < 1.0, small, large)


# --------------------------------------------------------------------------
# public operations


def make_spec(family: str, **params) -> BernsteinSpec:
    return BernsteinSpec(family, params)


def pure_power(alpha: float) -> BernsteinSpec:
    """phi(lam) = lam**(alpha/2): the isotropic alpha-stable case."""
    return BernsteinSpec("pure_power", {"alpha": alpha})


def example_families() -> list[BernsteinSpec]:
    return [BernsteinSpec(f, p) for f, p in EXAMPLE_FAMILIES.items()]


def _positive(x, what="lambda"):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{what} must be positive and finite")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def eval_phi_raw(spec: BernsteinSpec, lam):
    """Raw (un-normalized) family value."""
    return _out(np.real(spec._raw(_positive(lam))))


def eval_phi(spec: BernsteinSpec, lam):
    """Normalized phi(lam) for lam > 0 (scalar or array)."""
    return _out(np.real(spec.value(_positive(lam))))


def eval_phi_prime(spec: BernsteinSpec, lam, rel_step: float = 1e-6):
    """phi'(lam); closed form for the built-in families, central difference otherwise."""
    lam = _positive(lam)
    d = np.real(spec.derivative(lam, rel_step))
    if np.any(d <= 0):
        raise ConvergenceError("derivative estimate is not positive")
    return _out(d)


def conjugate(spec: BernsteinSpec) -> BernsteinSpec:
    """Conjugate function lam/phi(lam), renormalized to 1 at lam=1."""
    if spec.family == "pure_power":
        return pure_power(2.0 - spec.p["alpha"])
    if spec.family == "conjugate":
        return spec.base
    return BernsteinSpec("conjugate", base=spec)


def rescale(spec: BernsteinSpec, a: float) -> BernsteinSpec:
    """phi^a(lam) = phi(lam a^-2) / phi(a^-2)."""
    if not (a > 0 and math.isfinite(a)):
        raise DomainError("rescaling length a must be positive")
    if a == 1.0 or spec.family == "pure_power":
        return spec
    return BernsteinSpec("rescaled", {"a": float(a)}, base=spec)


def capital_phi(spec: BernsteinSpec, r):
    """Space-to-time scaling function 1/phi(r**-2)."""
    r = _positive(r, "r")
    return _out(1.0 / np.real(spec.value(r**-2.0)))


def capital_phi_inv(spec: BernsteinSpec, t, exponent_range=(-18.0, 18.0), rtol=1e-13):
    """Inverse of :func:`capital_phi` by bracketing and bisection in log r."""
    t = _positive(t, "t")
    logt = np.log(np.atleast_1d(t))
    lo = np.full(logt.shape, exponent_range[0] * math.log(10))
    hi = np.full(logt.shape, exponent_range[1] * math.log(10))

    def logPhi(lr):
        return -np.log(np.real(spec.value(np.exp(-2.0 * lr))))

    if np.any(logPhi(lo) > logt) or np.any(logPhi(hi) < logt):
        raise ConvergenceError(
            f"cannot bracket Phi^-1(t) within 10^{exponent_range[0]}..10^{exponent_range[1]}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        up = logPhi(mid) < logt
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo < rtol):
            break
    r = np.exp(0.5 * (lo + hi))
    return _out(r.reshape(np.shape(t)))


# --------------------------------------------------------------------------
# scaling certificates


@dataclass
class ScalingCertificate:
    """Empirical witnesses of the upper/lower power scaling of phi.

    Indices at infinity are ``delta1 <= delta2``; at zero ``delta3 <= delta4``.
    Fitted on a finite log grid, so this is an empirical (non-rigorous)
    certificate.  One-sided certificates leave the other side as ``None``.
    """

    delta1: float | None = None
    delta2: float | None = None
    delta3: float | None = None
    delta4: float | None = None
    a1: float | None = None
    a2: float | None = None
    a3: float | None = None
    a4: float | None = None
    a5: float | None = None
    a6: float | None = None
    grid: dict = field(default_factory=dict)
    spec: str = ""
    rigorous: bool = False

    @property
    def delta_lower(self):
        """delta1 ^ delta3 (when both sides are present)."""
        if self.delta1 is None or self.delta3 is None:
            return None
        return min(self.delta1, self.delta3)

    @property
    def delta_upper(self):
        """delta2 v delta4 (when both sides are present)."""
        if self.delta2 is None or self.delta4 is None:
            return None
        return max(self.delta2, self.delta4)

    def to_dict(self) -> dict:
        keys = ("delta1", "delta2", "delta3", "delta4", "a1", "a2", "a3", "a4", "a5", "a6")
        out = {k: getattr(self, k) for k in keys}
        out["delta_lower"] = self.delta_lower
        out["delta_upper"] = self.delta_upper
        out["grid"] = self.grid
        out["spec"] = self.spec
        out["rigorous"] = self.rigorous
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalingCertificate":
        keys = ("delta1", "delta2", "delta3", "delta4", "a1", "a2", "a3", "a4", "a5", "a6")
        return cls(**{k: d.get(k) for k in keys}, grid=d.get("grid", {}), spec=d.get("spec", ""))


def _log_grid(lo, hi, per_decade):
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.logspace(math.log10(lo), math.log10(hi), max(n, 2))


def _pair_stats(r, logphi):
    lr = np.log(r)
    i, j = np.triu_indices(len(r), k=1)
    dl = lr[j] - lr[i]
    slope = (logphi[j] - logphi[i]) / dl
    return i, j, dl, slope


def estimate_scaling_indices(
    spec: BernsteinSpec,
    r_min: float | None = None,
    r_max: float | None = None,
    side: str = "at_infinity",
    points_per_decade: int = 64,
    index_margin: float = 1e-3,
    horizon_decades: float = 8.0,
) -> ScalingCertificate:
    """Fit the extremal log-log slopes of phi on one side of 1.

    ``at_infinity`` uses pairs ``1 <= r <= R`` inside ``[r_min, r_max]``,
    ``at_zero`` pairs ``r <= R <= 1``.  Besides the grid extremes, the trend of
    the local slope over the two outermost decades is extrapolated
    ``horizon_decades`` further out; an index that drifts to 0 or 1 (e.g.
    ``log(1+lam)`` at infinity) fails certification even though every finite
    grid slope lies inside (0, 1).
    """
    if side not in ("at_infinity", "at_zero"):
        raise DomainError("side must be 'at_infinity' or 'at_zero'")
    if side == "at_infinity":
        lo, hi = max(1.0, r_min or 1.0), r_max or 1e8
    else:
        lo, hi = r_min or 1e-8, min(1.0, r_max or 1.0)
    if not (0 < lo < hi):
        raise DomainError("need 0 < r_min < r_max on the requested side")
    r = _log_grid(lo, hi, points_per_decade)
    logphi = np.log(np.real(spec.value(r)))
    i, j, dl, slope = _pair_stats(r, logphi)
    k_min, k_max = int(np.argmin(slope)), int(np.argmax(slope))
    d_lo, d_hi = float(slope[k_min]), float(slope[k_max])
    name = "upper/lower scaling at infinity" if side == "at_infinity" else "upper/lower scaling at zero"
    if d_lo <= index_margin:
        pair = (float(r[i[k_min]]), float(r[j[k_min]]))
        raise CertificationError(
            f"{side}: lower index {d_lo:.4g} not in (0,1) at pair {pair}", side, pair
        )
    if d_hi >= 1 - index_margin:
        pair = (float(r[i[k_max]]), float(r[j[k_max]]))
        raise CertificationError(
            f"{side}: upper index {d_hi:.4g} not in (0,1) at pair {pair}", side, pair
        )
    # trend of the local slope over the outermost two decades
    local = np.diff(logphi) / np.diff(np.log(r))
    mids = np.log10(np.sqrt(r[1:] * r[:-1]))
    span = min(2.0, math.log10(hi / lo) / 2)
    if side == "at_infinity":
        sel = mids >= mids[-1] - span
        x_far = mids[-1] + horizon_decades
    else:
        sel = mids <= mids[0] + span
        x_far = mids[0] - horizon_decades
    if sel.sum() >= 3:
        b, a0 = np.polyfit(mids[sel], local[sel], 1)
        pred = a0 + b * x_far
        if not (index_margin < pred < 1 - index_margin):
            edge = (float(r[-2]), float(r[-1])) if side == "at_infinity" else (float(r[0]), float(r[1]))
            raise CertificationError(
                f"{side}: local index drifts to {pred:.4g} within {horizon_decades:g} decades "
                f"(trend from pair {edge}); {name} cannot hold",
                side,
                edge,
            )
    ratio = logphi[j] - logphi[i]
    a_lo = float(np.exp(np.min(ratio - d_lo * dl)))
    a_hi = float(np.exp(np.max(ratio - d_hi * dl)))
    cert = ScalingCertificate(
        grid={side: {"r_min": lo, "r_max": hi, "points_per_decade": points_per_decade}},
        spec=spec.name,
    )
    if side == "at_infinity":
        cert.delta1, cert.delta2, cert.a1, cert.a2 = d_lo, d_hi, a_lo, a_hi
    else:
        # the bound at zero uses pairs r <= R <= 1 with the same orientation as at infinity
        cert.delta3, cert.delta4, cert.a3, cert.a4 = d_lo, d_hi, a_lo, a_hi
    return cert


def certify(
    spec: BernsteinSpec, decades: float = 8.0, points_per_decade: int = 64
) -> ScalingCertificate:
    """Both one-sided certificates plus the combined constants on the full range."""
    hi = 10.0**decades
    inf = estimate_scaling_indices(spec, 1.0, hi, "at_infinity", points_per_decade)
    zero = estimate_scaling_indices(spec, 1.0 / hi, 1.0, "at_zero", points_per_decade)
    cert = ScalingCertificate(
        delta1=inf.delta1, delta2=inf.delta2, a1=inf.a1, a2=inf.a2,
        delta3=zero.delta3, delta4=zero.delta4, a3=zero.a3, a4=zero.a4,
        grid={**inf.grid, **zero.grid}, spec=spec.name,
    )
    # combined bound on 0 < r < R < inf with exponents delta_lower / delta_upper;
    # a coarser grid keeps the pair count manageable
    r = _log_grid(1.0 / hi, hi, max(8, points_per_decade // 4))
    logphi = np.log(np.real(spec.value(r)))
    i, j, dl, _ = _pair_stats(r, logphi)
    ratio = logphi[j] - logphi[i]
    cert.a5 = float(np.exp(np.min(ratio - cert.delta_lower * dl)))
    cert.a6 = float(np.exp(np.max(ratio - cert.delta_upper * dl)))
    return cert


# --------------------------------------------------------------------------
# sanity checks


@dataclass
class Violation:
    check: str
    inputs: dict
    lhs: float
    rhs: float


@dataclass
class SanityReport:
    passed: bool
    n_checked: int
    violation: Violation | None = None
    checks: tuple = ()


def check_bernstein_sanity(
    spec: BernsteinSpec, lam_grid=None, t_grid=None, rtol: float = 1e-9
) -> SanityReport:
    """Pointwise Bernstein inequalities on a (lambda, t) grid.

    Checks, in order: monotonicity of phi, ``phi(lam t) <= lam phi(t)`` for
    ``lam >= 1``, the sandwich ``1 ^ lam <= phi(lam t)/phi(t) <= 1 v lam``,
    ``phi(v)/v`` non-increasing, and ``lam phi'(lam) <= phi(lam)``.  Returns
    the first violation instead of raising.
    """
    lam = np.sort(_positive(np.logspace(-4, 4, 33) if lam_grid is None else lam_grid))
    t = np.sort(_positive(np.logspace(-4, 4, 33) if t_grid is None else t_grid))
    names = ("monotone", "growth_bound", "sandwich", "phi_over_lambda_decreasing", "derivative_bound")
    n = 0

    def first(mask, check, inputs, lhs, rhs):
        k = np.argwhere(mask)[0]
        idx = tuple(k)
        return Violation(
            check,
            {key: float(np.broadcast_to(v, mask.shape)[idx]) for key, v in inputs.items()},
            float(np.broadcast_to(lhs, mask.shape)[idx]),
            float(np.broadcast_to(rhs, mask.shape)[idx]),
        )

    def val(x):
        return np.real(spec.value(x))

    pts = np.unique(np.concatenate([lam, t]))
    ph = val(pts)
    bad = np.diff(ph) <= 0
    n += bad.size
    if bad.any():
        k = int(np.argmax(bad))
        return SanityReport(False, n, Violation("monotone", {"u": pts[k], "v": pts[k + 1]}, ph[k], ph[k + 1]), names)

    L, T = np.meshgrid(lam, t, indexing="ij")
    pLT = val(L * T)
    pT = val(T)
    big = L >= 1
    lhs, rhs = pLT, L * pT
    bad = big & (lhs > rhs * (1 + rtol))
    n += int(big.sum())
    if bad.any():
        return SanityReport(False, n, first(bad, "growth_bound", {"lambda": L, "t": T}, lhs, rhs), names)

    q = pLT / pT
    bad = (q < np.minimum(1, L) * (1 - rtol)) | (q > np.maximum(1, L) * (1 + rtol))
    n += q.size
    if bad.any():
        k = tuple(np.argwhere(bad)[0])
        rhs = np.maximum(1, L)[k] if q[k] > 1 else np.minimum(1, L)[k]
        return SanityReport(
            False, n, Violation("sandwich", {"lambda": float(L[k]), "t": float(T[k])}, float(q[k]), float(rhs)), names
        )

    r = ph / pts
    bad = np.diff(r) > np.abs(r[:-1]) * rtol
    n += bad.size
    if bad.any():
        k = int(np.argmax(bad))
        return SanityReport(
            False, n, Violation("phi_over_lambda_decreasing", {"u": pts[k], "v": pts[k + 1]}, r[k + 1], r[k]), names
        )

    d = np.real(spec.derivative(pts))
    # finite differences of custom evaluators get a looser tolerance
    tol = rtol if spec._raw_prime(np.array([1.0])) is not None else 1e-6
    bad = (pts * d > ph * (1 + tol)) | (d <= 0)
    n += bad.size
    if bad.any():
        k = int(np.argmax(bad))
        return SanityReport(False, n, Violation("derivative_bound", {"lambda": pts[k]}, pts[k] * d[k], ph[k]), names)
    return SanityReport(True, n, None, names)
