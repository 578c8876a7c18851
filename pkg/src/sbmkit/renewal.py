"""Ladder-height exponent, renewal function and the boundary decay profile.

The ladder exponent of the one-dimensional projection is given by the
Fristedt integral

    log chi(lam) = (1/pi) int_0^inf log phi(lam^2 th^2) / (1 + th^2) dth.

With ``th = e^y`` this becomes a convolution of ``log phi`` against
``sech(y) / (2 pi)``, analytic in a strip, so the plain trapezoid rule
converges geometrically.  Rotating the ``y`` contour by ``arg(lam) / 2``
continues ``chi`` to the whole cut plane, which is what lets the renewal
density ``v`` be recovered by Talbot inversion of ``1 / chi``.
"""
from __future__ import annotations

import hashlib
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .bernstein import BernsteinSpec
from .errors import ConvergenceError, DomainError
from .laplace import DEFAULT_CONFIG, QuadratureConfig, _invert_array

CACHE_ENV = "SBMKIT_CACHE_DIR"

_STEP = 0.1
_HALF_WIDTH = 38.0


def _fristedt_log(spec: BernsteinSpec, lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    psi = np.angle(lam)
    mod2 = np.abs(lam) ** 2
    y = np.arange(-_HALF_WIDTH, _HALF_WIDTH + _STEP / 2, _STEP)
    out = np.empty(lam.shape, dtype=complex)
    flat_psi, flat_mod, flat_out = psi.ravel(), mod2.ravel(), out.reshape(-1)
    block = max(1, 200000 // y.size)
    for i in range(0, flat_psi.size, block):
        ps = flat_psi[i : i + block, None]
        arg = flat_mod[i : i + block, None] * np.exp(2 * y[None, :] + 1j * ps)
        with np.errstate(all="ignore"):
            L = np.log(np.asarray(spec.value(arg), dtype=complex))
            kern = 1.0 / np.cosh(y[None, :] - 0.5j * ps)
            # nodes rotated close to the negative axis can hit singularities of
            # phi; their Talbot weights are below exp(-100), so drop the terms
            terms = np.where(np.isfinite(L), L * kern, 0.0)
        flat_out[i : i + block] = _STEP / (2 * math.pi) * np.sum(terms, axis=1)
    return out


def ladder_exponent_chi(spec: BernsteinSpec, lam):
    """Laplace exponent chi of the ascending ladder height process.

    Accepts complex ``lam`` off the negative axis (analytic continuation).
    """
    arr = np.asarray(lam)
    if np.iscomplexobj(arr):
        return np.exp(_fristedt_log(spec, arr))
    arr = arr.astype(float)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise DomainError("lambda must be positive and finite")
    val = np.exp(_fristedt_log(spec, arr).real)
    if np.any(~np.isfinite(val)):
        raise ConvergenceError("Fristedt quadrature produced non-finite values")
    return float(val) if val.ndim == 0 else val


def renewal_density_v(spec: BernsteinSpec, t, config: QuadratureConfig = DEFAULT_CONFIG):
    """Renewal density v: inverse Laplace transform of 1/chi."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be positive")
    method = config.inversion_method
    order = config.talbot_nodes if method == "talbot" else config.gs_order
    flat = t.ravel()
    if method == "talbot":
        
        def transform(p):
            lg = _fristedt_log(spec, p)
            return np.exp(-np.clip(lg.real, -700, 700) - 1j * lg.imag)

        v = _invert_array(transform, flat, method, order)
    else:
        v = _invert_array(lambda p: 1.0 / ladder_exponent_chi(spec, p), flat, method, order)
    v = np.asarray(v).reshape(t.shape)
    if np.any(~(v > 0)):
        raise ConvergenceError("renewal density inversion returned non-positive values")
    return v


# ---------------------------------------------------------------- table


def default_grid(points: int = 1024, lo: float = 1e-6, hi: float = 1e6) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), points)


@dataclass
class RenewalTable:
    """v and V = int_0^r v on an increasing grid of lengths."""

    grid: np.ndarray
    v_values: np.ndarray
    V_values: np.ndarray
    spec_id: str

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.v_values = np.asarray(self.v_values, dtype=float)
        self.V_values = np.asarray(self.V_values, dtype=float)
        self._lr = np.log(self.grid)
        self._lV = np.log(self.V_values)
        self._interp = PchipInterpolator(self._lr, self._lV, extrapolate=False)
        # local power of V at the bottom of the grid, used for 0 < r < grid[0]
        self.head_power = float((self._lV[1] - self._lV[0]) / (self._lr[1] - self._lr[0]))

    def V(self, r):
        """Renewal function; power-law head below the grid, error above it."""
        r = np.asarray(r, dtype=float)
        if np.any(r > self.grid[-1] * (1 + 1e-12)):
            raise DomainError(f"r beyond table range (max {self.grid[-1]:g})")
        out = np.zeros(r.shape)
        pos = r > 0
        rp = np.minimum(r[pos], self.grid[-1])
        lr = np.log(rp)
        head = rp < self.grid[0]
        val = np.where(
            head,
            self._lV[0] + self.head_power * (lr - self._lr[0]),
            self._interp(np.clip(lr, self._lr[0], self._lr[-1])),
        )
        out[pos] = np.exp(val)
        return float(out) if out.ndim == 0 else out

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        buf.write(f"# spec_id={self.spec_id}\nr,v,V\n")
        for row in zip(self.grid, self.v_values, self.V_values):
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        Path(path).write_text(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "RenewalTable":
        lines = Path(path).read_text().splitlines()
        spec_id = lines[0].split("=", 1)[1] if lines[0].startswith("# spec_id=") else ""
        data = np.loadtxt(io.StringIO("\n".join(lines)), delimiter=",", comments="#", skiprows=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], spec_id)


def _integrate_power_segments(r: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cumulative int v over grid segments, v taken as a power law on each segment."""
    lr, lv = np.log(r), np.log(v)
    k = np.diff(lv) / np.diff(lr) + 1.0  # exponent of the antiderivative
    a, b = r[:-1], r[1:]
    va = v[:-1]
    small = np.abs(k) < 1e-10
    with np.errstate(all="ignore"):
        seg = np.where(small, va * a * np.log(b / a), va * a / k * ((b / a) ** k - 1))
    return np.concatenate([[0.0], np.cumsum(seg)])


def _cache_path(spec: BernsteinSpec, grid: np.ndarray, config: QuadratureConfig) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    h = hashlib.sha256()
    h.update(spec.to_json().encode())
    h.update(repr(config).encode())
    h.update(np.ascontiguousarray(grid).tobytes())
    return Path(root) / f"renewal-{h.hexdigest()[:20]}.csv"


def renewal_table(spec: BernsteinSpec, grid=None, config: QuadratureConfig = DEFAULT_CONFIG, cache: bool = True):
    """Tabulate v and V on ``grid`` (default 1024 log points on [1e-6, 1e6]).

    V below the first grid point is the power law fitted to v at the two
    smallest nodes; between nodes v is integrated as a piecewise power law.
    Tables are cached as CSV under ``$SBMKIT_CACHE_DIR`` when that is set.
    """
    if spec.family == "custom" and spec.func is not None and spec.expr is None:
        cache = False
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be increasing, positive, with at least two points")
    path = _cache_path(spec, grid, config) if cache else None
    if path is not None and path.exists():
        return RenewalTable.from_csv(path)
    v = renewal_density_v(spec, grid, config)
    kappa = math.log(v[1] / v[0]) / math.log(grid[1] / grid[0])
    if kappa <= -1:
        raise ConvergenceError("renewal density is not integrable at zero")
    head = v[0] * grid[0] / (kappa + 1)
    V = head + _integrate_power_segments(grid, v)
    table = RenewalTable(grid, v, V, spec.to_json())
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path)
    return table


def boundary_decay_w(table: RenewalTable, x):
    """w(x) = V(x_d^+) for a point ``x`` (rows of a 2-d array are points; a scalar is x_d)."""
    x = np.asarray(x, dtype=float)
    xd = x if x.ndim == 0 else x[..., -1]
    return table.V(np.maximum(xd, 0.0))


def bhp_decay_comparator(spec: BernsteinSpec, delta_x, delta_y):
    """sqrt(phi(delta_y^-2) / phi(delta_x^-2))."""
    dx = np.asarray(delta_x, dtype=float)
    dy = np.asarray(delta_y, dtype=float)
    if np.any(dx <= 0) or np.any(dy <= 0):
        raise DomainError("distances must be positive")
    out = np.sqrt(np.real(spec.value(dy**-2.0)) / np.real(spec.value(dx**-2.0)))
    return float(out) if out.ndim == 0 else out
