"""Monte Carlo for the subordinator and the subordinate Brownian motion.

Paths are skeletons ``X_{k dt} = W(S_{k dt})`` with ``W`` normalized so that
each coordinate has variance ``2t``.  Exits are detected on the skeleton only;
the discretization bias is measured by observing the same fine path on the
coarser grids ``2 dt`` and ``4 dt`` (coupled levels).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gamma

from . import _accel
from ._jit import USE_NUMBA, numba, python
from .bernstein import BernsteinSpec, capital_phi, capital_phi_inv
from .errors import DomainError, McError, ParameterError, TableResolutionError
from .kernels import half_space_hk_estimate, jump_density_j
from .laplace import DEFAULT_CONFIG, QuadratureConfig, _invert_array, density_evaluator, density_table
from .renewal import bhp_decay_comparator
from .rng import STREAM_NORMAL, RandomSource, normal_pair

STRATEGIES = ("stable_closed_form", "stable_mixture", "tabulated_inverse_cdf", "general_decomposition")
_EMPTY = np.zeros(1)


# ---------------------------------------------------------------- estimates


@dataclass
class McEstimate:
    """Sample mean with standard error ``std/sqrt(n)``."""

    value: float
    std_error: float
    n: int
    bias_note: dict | None = None

    def __post_init__(self):
        if self.n < 2:
            raise McError("an estimate needs at least two samples")

    @classmethod
    def from_samples(cls, x, bias_note=None) -> "McEstimate":
        x = np.asarray(x, dtype=float)
        return Moments.of(x).estimate(bias_note)

    def to_dict(self) -> dict:
        return {"estimate": self.value, "se": self.std_error, "n": self.n, "bias": self.bias_note}


@dataclass
class Moments:
    """Mergeable (sum, sum of squares, count)."""

    total: float = 0.0
    total_sq: float = 0.0
    count: int = 0

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        return cls(float(x.sum()), float(np.dot(x, x)), int(x.size))

    def merge(self, other: "Moments") -> "Moments":
        return Moments(self.total + other.total, self.total_sq + other.total_sq, self.count + other.count)

    def estimate(self, bias_note=None) -> McEstimate:
        n = self.count
        if n < 2:
            raise McError("an estimate needs at least two samples")
        mean = self.total / n
        var = max(self.total_sq / n - mean * mean, 0.0) * n / (n - 1)
        return McEstimate(mean, math.sqrt(var / n), n, bias_note)


# ---------------------------------------------------------------- samplers


@dataclass(frozen=True, eq=False)
class SubordinatorSampler:
    """Encoded increment law of the subordinator.

    Tabulated strategies are tied to the step ``dt`` they were built for.
    """

    strategy: str
    spec: BernsteinSpec
    kind: int
    params: np.ndarray
    t1x: np.ndarray = field(default_factory=lambda: _EMPTY)
    t1y: np.ndarray = field(default_factory=lambda: _EMPTY)
    t2x: np.ndarray = field(default_factory=lambda: _EMPTY)
    t2y: np.ndarray = field(default_factory=lambda: _EMPTY)
    dt: float | None = None
    rate: float = 0.0
    drift: float = 0.0
    epsilon: float | None = None
    config: QuadratureConfig = field(default=DEFAULT_CONFIG, repr=False)
    _by_step: dict = field(default_factory=dict, repr=False)

    @property
    def deferred(self) -> bool:
        """True for a tabulated strategy built without a step."""
        return self.dt is None and self.kind in (_accel.KIND_TABLE, _accel.KIND_CPOISSON)

    def at(self, dt: float) -> "SubordinatorSampler":
        """The sampler to use at step ``dt``; deferred samplers build (and cache) one per step."""
        if not self.deferred:
            return self
        key = float(dt)
        if key not in self._by_step:
            self._by_step[key] = make_sampler(self.spec, self.strategy, key, self.epsilon, self.config)
        return self._by_step[key]

    def encode(self, dt: float, rtol: float = 1e-9):
        """Arguments for the kernels at step ``dt``."""
        if not dt > 0:
            raise DomainError("dt must be positive")
        if self.deferred:
            return self.at(dt).encode(dt, rtol)
        params = self.params
        if self.kind == _accel.KIND_TABLE:
            if abs(dt - self.dt) > rtol * self.dt:
                raise TableResolutionError(f"sampler tabulated at dt={self.dt:g}, asked for dt={dt:g}")
        elif self.kind == _accel.KIND_CPOISSON:
            params = np.concatenate([[self.rate * dt, self.drift * dt], self.params])
        return self.kind, params, self.t1x, self.t1y, self.t2x, self.t2y, float(dt)


def _stable_params(spec: BernsteinSpec):
    if spec.family == "pure_power":
        return np.array([spec.p["alpha"] / 2, spec.scale])
    raise ParameterError("stable_closed_form needs a pure_power spec")


def _increment_table(spec: BernsteinSpec, dt: float, config: QuadratureConfig, per_decade: int = 64):
    """Inverse-CDF table of S_dt from Talbot inversion of exp(-dt phi)/lam."""
    s_star = capital_phi_inv(spec, dt) ** 2

    def cdf(s):
        return _invert_array(lambda p: -dt * spec.value(p) - np.log(p), s, "talbot", config.talbot_nodes, log=True)

    def ccdf(s):
        def log_tr(p):
            with np.errstate(over="ignore", invalid="ignore"):
                return np.log(-np.expm1(-dt * spec.value(p))) - np.log(p)

        return _invert_array(log_tr, s, "talbot", config.talbot_nodes, log=True)

    # for exponents growing in the left half-plane the contour sum breaks
    # down at small s; keep only the range above the last invalid value,
    # which must already sit deep in the lower tail
    lo, hi = s_star * 1e-8, s_star * 1e10
    s = np.logspace(math.log10(lo), math.log10(hi), int(per_decade * math.log10(hi / lo)) + 1)
    with np.errstate(invalid="ignore"):
        F = cdf(s)
        G = ccdf(s)
    bad = np.flatnonzero(~(np.isfinite(F) & (F > -1e-10) & (F < 1.0)))
    first = bad[-1] + 1 if bad.size else 0
    if first >= s.size or F[first] > 1e-9:
        raise TableResolutionError("increment law could not be tabulated at this dt")
    low = (np.arange(s.size) >= first) & (F > 1e-12) & (F < 0.6)
    sF, F = s[low], np.maximum.accumulate(F[low])
    keep = np.concatenate([[True], np.diff(F) > 0])
    sF, F = sF[keep], F[keep]
    high = (G > 0) & (G < 0.6)
    sG, G = s[high][::-1], G[high][::-1]
    G = np.maximum.accumulate(G)
    keep = np.concatenate([[True], np.diff(G) > 0])
    sG, G = sG[keep], G[keep]
    if sF.size < 8 or sG.size < 8:
        raise TableResolutionError("increment law could not be tabulated at this dt")
    kappa = -(math.log(G[1]) - math.log(G[0])) / (math.log(sG[1]) - math.log(sG[0]))
    params = np.array([kappa, math.log(sG[0]), math.log(G[0])])
    return params, np.log(F), np.log(sF), np.log(G), np.log(sG)


def _small_jump_mean(spec: BernsteinSpec, eps: float, config: QuadratureConfig) -> float:
    """int_0^eps s mu(s) ds with the table's power law below its range."""
    mu = density_evaluator(spec, "mu", config)
    lo = config.t_range[0]
    if eps <= lo:
        raise DomainError("cutoff below the tabulated range")
    y = np.linspace(math.log(lo), math.log(eps), 2049)
    s = np.exp(y)
    f = s * s * mu(s)
    body = float(np.sum((f[1:] + f[:-1]) * np.diff(y)) / 2)
    t0, m0, kappa = density_table(spec, "mu", config).edge_power("lo")
    return body + m0 * t0 ** (-kappa) * lo ** (2 + kappa) / (2 + kappa)


def make_sampler(
    spec: BernsteinSpec,
    strategy: str | None = None,
    dt: float | None = None,
    epsilon: float | None = None,
    config: QuadratureConfig = DEFAULT_CONFIG,
) -> SubordinatorSampler:
    """Pick (or build) the increment sampler for ``spec``.

    Default strategy: closed form for pure powers, a two-term mixture for
    sums of powers, the tabulated inverse CDF otherwise.  Tabulated
    strategies built without ``dt`` are deferred: the table for a step is
    built the first time that step is used.  With ``dt`` given, the sampler is
    tied to it and any other step raises :class:`TableResolutionError`.
    """
    if strategy is None:
        strategy = {"pure_power": "stable_closed_form", "sum_of_powers": "stable_mixture"}.get(
            spec.family, "tabulated_inverse_cdf"
        )
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown sampler strategy {strategy!r}; choose from {STRATEGIES}")
    if strategy == "stable_closed_form":
        return SubordinatorSampler(strategy, spec, _accel.KIND_STABLE, _stable_params(spec))
    if strategy == "stable_mixture":
        if spec.family != "sum_of_powers":
            raise ParameterError("stable_mixture needs a sum_of_powers spec")
        c = spec.scale
        params = np.array([spec.p["alpha"], c, spec.p["beta"], c])
        return SubordinatorSampler(strategy, spec, _accel.KIND_MIXTURE, params)
    kind = _accel.KIND_TABLE if strategy == "tabulated_inverse_cdf" else _accel.KIND_CPOISSON
    if dt is None:
        return SubordinatorSampler(strategy, spec, kind, _EMPTY, epsilon=epsilon, config=config)
    if not dt > 0:
        raise ParameterError(f"{strategy} needs a positive step dt")
    if strategy == "tabulated_inverse_cdf":
        params, fx, fy, gx, gy = _increment_table(spec, dt, config)
        return SubordinatorSampler(strategy, spec, kind, params, fx, fy, gx, gy, dt=float(dt), config=config)
    # compound Poisson above eps; default eps makes about ten jumps per step
    tail = density_table(spec, "tail", config)
    if epsilon is None:
        lo, hi = config.t_range
        a, b = math.log(lo), math.log(hi)
        for _ in range(200):
            m = 0.5 * (a + b)
            if tail(math.exp(m)) * dt > 10:
                a = m
            else:
                b = m
        epsilon = math.exp(b)
    rate = float(tail(epsilon))
    s = np.logspace(math.log10(epsilon), math.log10(config.t_range[1]), 1200)
    Q = tail(s) / rate
    Q[0] = 1.0
    kappa = -(math.log(Q[-1]) - math.log(Q[-2])) / (math.log(s[-1]) - math.log(s[-2]))
    params = np.array([kappa, math.log(s[-1]), math.log(Q[-1])])
    return SubordinatorSampler(
        strategy,
        spec,
        _accel.KIND_CPOISSON,
        params,
        np.log(Q)[::-1].copy(),
        np.log(s)[::-1].copy(),
        dt=float(dt),
        rate=rate,
        drift=_small_jump_mean(spec, epsilon, config),
        epsilon=float(epsilon),
        config=config,
    )


def sample_increment(sampler: SubordinatorSampler, dt: float, source: RandomSource, n: int | None = None):
    """Draw S_{t+dt} - S_t (``n`` independent copies when ``n`` is given)."""
    m = 1 if n is None else int(n)
    if m < 1:
        raise DomainError("n must be positive")
    src = source.spawn(m)
    paths = np.arange(src.path_offset, src.path_offset + m, dtype=np.uint64)
    out = _accel.draw_increment_numpy(*sampler.encode(dt), paths, 0, *src.key)
    return float(out[0]) if n is None else out


# ---------------------------------------------------------------- domains


@dataclass(frozen=True, eq=False)
class Domain:
    """Open ball (center, radius) or open axis-aligned box (lo, hi)."""

    kind: str
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def ball(cls, center, radius: float) -> "Domain":
        if not radius > 0:
            raise DomainError("radius must be positive")
        return cls("ball", np.atleast_1d(np.asarray(center, dtype=float)), np.array([float(radius)]))

    @classmethod
    def box(cls, lo, hi) -> "Domain":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise DomainError("box needs lo < hi coordinatewise")
        return cls("box", lo, hi)

    @classmethod
    def half_space(cls, d: int) -> "Domain":
        lo = np.full(d, -np.inf)
        lo[-1] = 0.0
        return cls.box(lo, np.full(d, np.inf))

    @property
    def d(self) -> int:
        return self.a.size

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "ball":
            return np.sum((x - self.a) ** 2, axis=1) < self.b[0] ** 2
        return np.all((x > self.a) & (x < self.b), axis=1)

    def encode(self):
        return (_accel.DOM_BALL if self.kind == "ball" else _accel.DOM_BOX), self.a, self.b


def choose_dt(spec: BernsteinSpec, scale: float, factor: float = 50.0) -> float:
    """Step with Phi^-1(dt) = scale / factor."""
    if not scale > 0:
        raise DomainError("scale must be positive")
    return float(capital_phi(spec, scale / factor))


# ---------------------------------------------------------------- paths


@dataclass
class PathSample:
    times: np.ndarray
    s_values: np.ndarray
    x_values: np.ndarray
    killed_at: int | None = None


def sample_path(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    d: int,
    x0,
    horizon: float,
    dt: float,
    source: RandomSource,
    domain: Domain | None = None,
) -> PathSample:
    """One skeleton path; the same draws the exit kernels use for this path index."""
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (d,):
        raise DomainError("x0 must have length d")
    steps = int(math.ceil(horizon / dt - 1e-9))
    src = source.spawn(1)
    path = np.uint64(src.path_offset)
    k = np.arange(1, steps + 1, dtype=np.uint64)
    enc = sampler.encode(dt)
    ds = np.array([_accel.draw_increment_numpy(*enc, np.array([path]), int(j), *src.key)[0] for j in k])
    normal = python(normal_pair)
    dx = np.zeros((steps, d))
    for c in range(0, d, 2):
        z1, z2 = normal(path, k, np.uint64(STREAM_NORMAL + c // 2), *src.key)
        dx[:, c] = np.sqrt(2 * ds) * z1
        if c + 1 < d:
            dx[:, c + 1] = np.sqrt(2 * ds) * z2
    times = dt * np.arange(steps + 1)
    s_values = np.concatenate([[0.0], np.cumsum(ds)])
    x_values = np.vstack([x0, x0 + np.cumsum(dx, axis=0)])
    killed = None
    if domain is not None:
        out = np.flatnonzero(~domain.contains(x_values))
        killed = int(out[0]) if out.size else None
    return PathSample(times, s_values, x_values, killed)


def _run(sampler, dt, x0, domain: Domain, strides, n_steps, n, source, workers=None, backend=None):
    src = source.spawn(n)
    kind, params, t1x, t1y, t2x, t2y, dt = sampler.encode(dt)
    dom_kind, a, b = domain.encode()
    args = (
        kind, params, t1x, t1y, t2x, t2y, dt,
        np.asarray(x0, dtype=float), dom_kind, a, b,
        np.asarray(strides, dtype=np.int64), int(n_steps), int(src.path_offset), int(n), *src.key,
    )  # fmt: skip
    if workers and USE_NUMBA:
        old = numba.get_num_threads()
        numba.set_num_threads(min(int(workers), numba.config.NUMBA_NUM_THREADS))
        try:
            return _accel.exit_kernel(*args, backend=backend)
        finally:
            numba.set_num_threads(old)
    return _accel.exit_kernel(*args, backend=backend)


def _check_start(domain: Domain, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (domain.d,):
        raise DomainError("start point has the wrong dimension")
    if not domain.contains(x)[0]:
        raise DomainError("start point must lie inside the domain")
    return x


# ---------------------------------------------------------------- exit from a ball


@dataclass
class ExitResult:
    mean_exit_time: McEstimate
    exit_positions: np.ndarray
    level_means: list
    bias_shrink: float
    dt: float
    exhausted: int

    def __iter__(self):
        return iter((self.mean_exit_time, self.exit_positions))


def mc_exit_ball(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    d: int,
    center,
    radius: float,
    x,
    n: int,
    dt: float | None = None,
    source: RandomSource | None = None,
    max_time: float | None = None,
    workers: int | None = None,
    backend: str | None = None,
) -> ExitResult:
    """Mean exit time from a ball with a coupled dt/2, dt, 2 dt bias check.

    The reported value is the Richardson combination ``2 E[dt/2] - E[dt]``;
    ``bias_note`` carries the level means and the observed shrink factor
    ``(E[2dt] - E[dt]) / (E[dt] - E[dt/2])``.
    """
    if n < 100:
        raise DomainError("need n >= 100 paths")
    domain = Domain.ball(center, radius)
    if domain.d != d:
        raise DomainError("center must have length d")
    x = _check_start(domain, x)
    source = source or RandomSource()
    dt = dt or choose_dt(spec, radius)
    h = dt / 2
    max_time = max_time or 100.0 * capital_phi(spec, radius)
    steps = int(math.ceil(max_time / h))
    steps -= steps % 4
    es, ep, _ = _run(sampler, h, x, domain, (1, 2, 4), steps, n, source, workers, backend)
    exhausted = int(np.sum(es[:, 2] < 0))
    if exhausted > 1e-3 * n:
        raise McError(f"{exhausted} of {n} paths did not exit before t={max_time:g}")
    tau = np.where(es < 0, steps, es) * h
    means = [float(tau[:, k].mean()) for k in range(3)]
    d1, d2 = means[1] - means[0], means[2] - means[1]
    shrink = d2 / d1 if d1 != 0 else math.inf
    note = {"dt": dt, "levels": [h, dt, 2 * dt], "level_means": means, "bias_shrink": shrink, "exhausted": exhausted}
    est = McEstimate.from_samples(2 * tau[:, 0] - tau[:, 1], note)
    return ExitResult(est, ep[:, 0, :], means, shrink, dt, exhausted)


def stable_exit_time_mean(d: int, alpha: float, radius: float, x_norm: float = 0.0) -> float:
    """E_x tau of the isotropic alpha-stable process for the ball B(0, radius)."""
    return (
        gamma(d / 2) * (radius**2 - x_norm**2) ** (alpha / 2)
        / (2**alpha * gamma(1 + alpha / 2) * gamma((d + alpha) / 2))
    )  # fmt: skip


def stable_ball_exit_density(d: int, alpha: float, radius: float, rho):
    """Density of |X_tau| at rho > radius for the stable process started at the center."""
    rho = np.asarray(rho, dtype=float)
    k = gamma(d / 2) * math.pi ** (-d / 2 - 1) * math.sin(math.pi * alpha / 2)
    kern = k * (radius**2 / (rho**2 - radius**2)) ** (alpha / 2) * rho ** (-d)
    sphere = 2 * math.pi ** (d / 2) / gamma(d / 2) * rho ** (d - 1)
    return kern * sphere


# ---------------------------------------------------------------- Poisson kernel shells


@dataclass
class ShellReport:
    """Radial exit-density shells against the two jump-density comparators."""

    edges: np.ndarray
    hits: np.ndarray
    density: np.ndarray
    std_error: np.ndarray
    lower_comparator: np.ndarray
    upper_comparator: np.ndarray
    usable: np.ndarray
    n: int

    @property
    def lower_ratio(self):
        return self.density / self.lower_comparator

    @property
    def upper_ratio(self):
        return self.density / self.upper_comparator


def _shell_volume(d, r1, r2):
    return math.pi ** (d / 2) / gamma(d / 2 + 1) * (r2**d - r1**d)


def mc_exit_density_check(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    d: int,
    radius: float,
    n: int,
    dt: float | None = None,
    source: RandomSource | None = None,
    edges=None,
    min_hits: int = 50,
    config: QuadratureConfig = DEFAULT_CONFIG,
    workers: int | None = None,
) -> ShellReport:
    """Exit-position density from the center of B(0, radius), binned in shells.

    Density is per unit d-volume, comparable to ``j(|y|)/phi(radius^-2)``
    (lower) and ``j(|y| - radius)/phi(radius^-2)`` (upper).  Shells with fewer
    than ``min_hits`` exits are reported as unusable, never merged.
    """
    res = mc_exit_ball(spec, sampler, d, np.zeros(d), radius, np.zeros(d), n, dt, source, workers=workers)
    rho = np.linalg.norm(res.exit_positions, axis=1)
    if edges is None:
        edges = radius * (1 + np.logspace(-2, 2, 17))
    edges = np.asarray(edges, dtype=float)
    hits = np.histogram(rho, bins=edges)[0]
    vol = np.array([_shell_volume(d, a, b) for a, b in zip(edges[:-1], edges[1:])])
    p = hits / n
    density = p / vol
    se = np.sqrt(p * (1 - p) / n) / vol
    mid = np.sqrt(edges[:-1] * edges[1:])
    phi_r = float(np.real(spec.value(radius**-2.0)))
    lower = jump_density_j(spec, d, mid, config) / phi_r
    upper = jump_density_j(spec, d, mid - radius, config) / phi_r
    return ShellReport(edges, hits, density, se, lower, upper, hits >= min_hits, n)


# ---------------------------------------------------------------- half-space


def mc_survival_half_space(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    d: int,
    x,
    t: float,
    n: int,
    dt: float | None = None,
    source: RandomSource | None = None,
    workers: int | None = None,
) -> McEstimate:
    """P_x(skeleton stays in {x_d > 0} up to time t)."""
    est, _ = _half_space_run(spec, sampler, d, x, t, n, dt, source, workers)
    return est


def _half_space_run(spec, sampler, d, x, t, n, dt, source, workers):
    if n < 2:
        raise DomainError("need n >= 2 paths")
    if not t > 0:
        raise DomainError("t must be positive")
    domain = Domain.half_space(d)
    x = _check_start(domain, x)
    source = source or RandomSource()
    dt = dt or choose_dt(spec, min(x[-1], capital_phi_inv(spec, t)))
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    es, _, final = _run(sampler, dt, x, domain, (1,), steps, n, source, workers)
    alive = es[:, 0] < 0
    note = {"dt": dt, "steps": steps}
    return McEstimate.from_samples(alive.astype(float), note), final[alive]


@dataclass
class CellEstimate:
    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    hits: int
    estimate: McEstimate
    comparator: float
    usable: bool

    @property
    def ratio(self) -> float:
        return self.estimate.value / self.comparator


@dataclass
class HeatKernelResult:
    cells: list
    survival: McEstimate
    dt: float

    @property
    def usable_ratios(self) -> np.ndarray:
        return np.array([c.ratio for c in self.cells if c.usable])


def log_cells(d: int, lo: float, hi: float, count: int, lateral: float = 0.5):
    """``count`` cells with log-spaced x_d-extent in [lo, hi]; lateral half-width for d > 1."""
    e = np.geomspace(lo, hi, count + 1)
    cells = []
    for a, b in zip(e[:-1], e[1:]):
        clo = np.concatenate([np.full(d - 1, -lateral), [a]])
        chi = np.concatenate([np.full(d - 1, lateral), [b]])
        cells.append((clo, chi))
    return cells


def mc_half_space_heat_kernel(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    d: int,
    t: float,
    x,
    cells,
    n: int,
    dt: float | None = None,
    source: RandomSource | None = None,
    min_hits: int = 20,
    workers: int | None = None,
) -> HeatKernelResult:
    """Killed heat kernel averaged over cells, paired with the factorized comparator."""
    surv, final = _half_space_run(spec, sampler, d, x, t, n, dt, source, workers)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = []
    for lo, hi in cells:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo >= hi) or lo[-1] <= 0:
            raise DomainError("cells must be boxes inside the half-space")
        vol = float(np.prod(hi - lo))
        inside = np.all((final >= lo) & (final < hi), axis=1)
        hits = int(inside.sum())
        p = hits / n
        est = McEstimate(p / vol, math.sqrt(p * (1 - p) / n) / vol, n)
        center = np.concatenate([(lo[:-1] + hi[:-1]) / 2, [math.sqrt(lo[-1] * hi[-1])]])
        comp = float(half_space_hk_estimate(spec, d, t, x, center))
        out.append(CellEstimate(lo, hi, center, hits, est, comp, hits >= min_hits))
    return HeatKernelResult(out, surv, surv.bias_note["dt"])


# ---------------------------------------------------------------- boundary Harnack


@dataclass
class BhpResult:
    double_ratio: McEstimate
    single_ratio: McEstimate
    comparator: float
    u_a: tuple
    u_b: tuple
    hits: dict


def _targets(window: Domain, target_sets):
    out = [(np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in target_sets]
    for lo, hi in out:
        if np.all(lo < window.b) and np.all(hi > window.a):
            raise DomainError("target sets must lie outside the window")
    return out


def harmonic_exit_counts(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    window: Domain,
    z,
    target_sets,
    n: int,
    dt: float,
    source: RandomSource | None = None,
    max_time: float | None = None,
    workers: int | None = None,
) -> list[int]:
    """Number of the ``n`` paths from ``z`` whose exit position lands in each target box."""
    if window.kind != "box":
        raise DomainError("window must be a box")
    z = _check_start(window, z)
    targets = _targets(window, target_sets)
    source = source or RandomSource()
    if max_time is None:
        width = float(np.min(np.where(np.isfinite(window.b - window.a), window.b - window.a, np.inf)))
        max_time = 200.0 * capital_phi(spec, width)
    steps = int(math.ceil(max_time / dt))
    es, ep, _ = _run(sampler, dt, z, window, (1,), steps, n, source, workers)
    exited = es[:, 0] >= 0
    if np.mean(~exited) > 1e-3:
        raise McError("too many paths did not leave the window")
    pos = ep[:, 0, :]
    return [int(np.sum(np.all((pos >= lo) & (pos < hi), axis=1) & exited)) for lo, hi in targets]


def _window_depth(window: Domain, z) -> float:
    z = np.asarray(z, dtype=float)
    return float(z[-1] - window.a[-1])


def bhp_ratios(counts_x, counts_y, n: int, comparator: float = math.nan, note=None, min_hits: int = 100) -> "BhpResult":
    """Double and single ratios from exit counts ``[A, B]`` at two independent starts.

    Standard errors use the delta method on the multinomial counts; the
    ``4/n`` term is the A/B covariance within each start.
    """
    hits = {"A_x": counts_x[0], "B_x": counts_x[1], "A_y": counts_y[0], "B_y": counts_y[1]}
    if min(hits.values()) < min_hits:
        raise McError(f"degenerate target hit counts {hits}; need at least {min_hits}")
    pa_x, pb_x, pa_y, pb_y = (c / n for c in (counts_x[0], counts_x[1], counts_y[0], counts_y[1]))
    single = pa_x / pa_y
    double = single / (pb_x / pb_y)
    var_a = (1 - pa_x) / (n * pa_x) + (1 - pa_y) / (n * pa_y)
    var_b = (1 - pb_x) / (n * pb_x) + (1 - pb_y) / (n * pb_y)
    note = note or {}
    return BhpResult(
        McEstimate(double, double * math.sqrt(var_a + var_b + 4.0 / n), n, note),
        McEstimate(single, single * math.sqrt(var_a), n, note),
        comparator,
        (pa_x, pa_y),
        (pb_x, pb_y),
        hits,
    )


def mc_harmonic_ratio_bhp(
    spec: BernsteinSpec,
    sampler: SubordinatorSampler,
    d: int,
    window: Domain,
    x,
    y,
    target_sets,
    n: int,
    dt: float | None = None,
    source: RandomSource | None = None,
    max_time: float | None = None,
    min_hits: int = 100,
    workers: int | None = None,
) -> BhpResult:
    """Exit-into-set probabilities u_A, u_B at x and y and their ratios.

    Returns ``(u_A(x)/u_A(y)) / (u_B(x)/u_B(y))`` and ``u_A(x)/u_A(y)``; the
    latter is paired with the decay comparator at the distances of x and y
    from the window face ``x_d = lo_d``.  For ``x == y`` both ratios are
    exactly 1.
    """
    if window.kind != "box" or window.d != d:
        raise DomainError("window must be a box in R^d")
    targets = _targets(window, target_sets)
    source = source or RandomSource()
    x = _check_start(window, x)
    y = _check_start(window, y)
    depth = min(_window_depth(window, x), _window_depth(window, y))
    dt = dt or choose_dt(spec, depth)
    width = float(np.min(np.where(np.isfinite(window.b - window.a), window.b - window.a, np.inf)))
    max_time = max_time or 200.0 * capital_phi(spec, width)
    cx = harmonic_exit_counts(spec, sampler, window, x, targets, n, dt, source, max_time, workers)
    # one sample for both starts when x == y, so the identity case is exact
    same = np.array_equal(x, y)
    cy = cx if same else harmonic_exit_counts(spec, sampler, window, y, targets, n, dt, source, max_time, workers)
    comp = bhp_decay_comparator(spec, _window_depth(window, x), _window_depth(window, y))
    return bhp_ratios(cx, cy, n, comp, {"dt": dt, "max_time": max_time}, min_hits)


def stable_interval_upward_exit(alpha: float, x, R: float):
    """P_x(alpha-stable, d=1, leaves (0, R) into [R, inf)) = I_{x/R}(alpha/2, alpha/2)."""
    return betainc(alpha / 2, alpha / 2, np.asarray(x, dtype=float) / R)
