"""Hot loops of the Monte Carlo engine.

Two implementations share the same random-number layout: a numba kernel
that walks one path at a time (``prange`` over paths), and a numpy fallback
that advances all live paths one step at a time.  Both consume the Philox
stream of a path identically, so they agree to rounding.

Subordinator increments are encoded as ``(kind, params, tables)``:

``KIND_STABLE``      params = [beta, c]: exponent c*lam^beta
``KIND_MIXTURE``     params = [beta1, c1, beta2, c2]: sum of two stable laws
``KIND_TABLE``       inverse CDF of S_dt; t1 = (log F, log s), t2 = (log G, log s)
                     with G = 1 - F, params = [kappa_tail, log_s_hi, log_G_hi]
``KIND_CPOISSON``    params = [rate*dt, drift*dt, kappa_tail, log_s_hi, log_Q_hi];
                     t1 = (log Q, log s) for the normalized jump tail Q

Domains: ``DOM_BALL`` (a = center, b[0] = radius) and ``DOM_BOX``
(a = lower corner, b = upper corner; infinite sides allowed).
"""
from __future__ import annotations

import math

import numpy as np

from ._jit import USE_NUMBA, maybe_njit, numba, python
from .rng import STREAM_COUNT, STREAM_JUMPS, STREAM_NORMAL, STREAM_SUB, STREAM_SUB2, normal_pair, uniform_pair

KIND_STABLE, KIND_MIXTURE, KIND_TABLE, KIND_CPOISSON = 0, 1, 2, 3
DOM_BALL, DOM_BOX = 0, 1
MAX_JUMPS = 4096


@maybe_njit
def stable_from_uniforms(u1, u2, beta):
    """Positive beta-stable variate with Laplace transform exp(-lam^beta)."""
    U = math.pi * u1
    E = -np.log(u2)
    b1 = 1.0 - beta
    logA = (beta / b1) * np.log(np.sin(beta * U)) + np.log(np.sin(b1 * U)) - np.log(np.sin(U)) / b1
    return np.exp((b1 / beta) * (logA - np.log(E)))


@maybe_njit
def _table_scalar(u, t1x, t1y, t2x, t2y, kappa, log_s_hi, log_g_hi):
    if u < 0.5:
        lu = np.log(u)
        if lu <= t1x[0]:
            return np.exp(t1y[0])
        return np.exp(np.interp(lu, t1x, t1y))
    lg = np.log1p(-u)
    if lg < log_g_hi:
        return np.exp(log_s_hi + (log_g_hi - lg) / kappa)
    return np.exp(np.interp(lg, t2x, t2y))


@maybe_njit
def _poisson_count(u, mean):
    p = np.exp(-mean)
    cum = p
    k = 0
    while u > cum and k < MAX_JUMPS:
        k += 1
        p *= mean / k
        cum += p
    return k


@maybe_njit
def _jump_size(u, t1x, t1y, kappa, log_s_hi, log_q_hi):
    lq = np.log(u)
    if lq < log_q_hi:
        return np.exp(log_s_hi + (log_q_hi - lq) / kappa)
    return np.exp(np.interp(lq, t1x, t1y))


@maybe_njit
def draw_increment(kind, params, t1x, t1y, t2x, t2y, dt, path, step, k0, k1):
    """One subordinator increment over ``dt`` for (path, step)."""
    if kind == KIND_STABLE:
        u1, u2 = uniform_pair(path, step, STREAM_SUB, k0, k1)
        return (params[1] * dt) ** (1.0 / params[0]) * stable_from_uniforms(u1, u2, params[0])
    if kind == KIND_MIXTURE:
        u1, u2 = uniform_pair(path, step, STREAM_SUB, k0, k1)
        v1, v2 = uniform_pair(path, step, STREAM_SUB2, k0, k1)
        s1 = (params[1] * dt) ** (1.0 / params[0]) * stable_from_uniforms(u1, u2, params[0])
        s2 = (params[3] * dt) ** (1.0 / params[2]) * stable_from_uniforms(v1, v2, params[2])
        return s1 + s2
    if kind == KIND_TABLE:
        u1, _ = uniform_pair(path, step, STREAM_SUB, k0, k1)
        return _table_scalar(u1, t1x, t1y, t2x, t2y, params[0], params[1], params[2])
    # compound Poisson above the cutoff plus the mean of the small jumps
    u1, _ = uniform_pair(path, step, STREAM_COUNT, k0, k1)
    n = _poisson_count(u1, params[0])
    total = params[1]
    for j in range(0, n, 2):
        a, b = uniform_pair(path, step, STREAM_JUMPS + j // 2, k0, k1)
        total += _jump_size(a, t1x, t1y, params[2], params[3], params[4])
        if j + 1 < n:
            total += _jump_size(b, t1x, t1y, params[2], params[3], params[4])
    return total


@maybe_njit
def _outside(x, dom_kind, a, b):
    if dom_kind == DOM_BALL:
        s = 0.0
        for c in range(x.size):
            s += (x[c] - a[c]) ** 2
        return s >= b[0] * b[0]
    for c in range(x.size):
        if x[c] <= a[c] or x[c] >= b[c]:
            return True
    return False


def _exit_loop(kind, params, t1x, t1y, t2x, t2y, dt, x0, dom_kind, a, b, strides, n_steps, path0, n, k0, k1):
    d = x0.size
    L = strides.size
    exit_step = np.full((n, L), -1, dtype=np.int64)
    exit_pos = np.zeros((n, L, d))
    final = np.zeros((n, d))
    for i in _prange(n):
        path = np.uint64(path0 + i)
        x = x0.copy()
        left = L
        for k in range(1, n_steps + 1):
            ds = draw_increment(kind, params, t1x, t1y, t2x, t2y, dt, path, np.uint64(k), k0, k1)
            sd = np.sqrt(2.0 * ds)
            for c in range(0, d, 2):
                z1, z2 = normal_pair(path, np.uint64(k), np.uint64(STREAM_NORMAL + c // 2), k0, k1)
                x[c] += sd * z1
                if c + 1 < d:
                    x[c + 1] += sd * z2
            if _outside(x, dom_kind, a, b):
                for lv in range(L):
                    if exit_step[i, lv] < 0 and k % strides[lv] == 0:
                        exit_step[i, lv] = k
                        exit_pos[i, lv, :] = x
                        left -= 1
                if left == 0:
                    break
        final[i, :] = x
    return exit_step, exit_pos, final


if USE_NUMBA:
    _prange = numba.prange
    exit_kernel_numba = numba.njit(parallel=True, cache=True)(_exit_loop)
else:
    _prange = range
    exit_kernel_numba = None


# ---------------------------------------------------------------- numpy path


def draw_increment_numpy(kind, params, t1x, t1y, t2x, t2y, dt, paths, step, k0, k1):
    """Vectorized :func:`draw_increment` over an array of path indices."""
    uni = python(uniform_pair)
    stab = python(stable_from_uniforms)
    step = np.uint64(step)
    if kind == KIND_STABLE:
        u1, u2 = uni(paths, step, np.uint64(STREAM_SUB), k0, k1)
        return (params[1] * dt) ** (1.0 / params[0]) * stab(u1, u2, params[0])
    if kind == KIND_MIXTURE:
        u1, u2 = uni(paths, step, np.uint64(STREAM_SUB), k0, k1)
        v1, v2 = uni(paths, step, np.uint64(STREAM_SUB2), k0, k1)
        return (params[1] * dt) ** (1.0 / params[0]) * stab(u1, u2, params[0]) + (params[3] * dt) ** (
            1.0 / params[2]
        ) * stab(v1, v2, params[2])
    if kind == KIND_TABLE:
        u, _ = uni(paths, step, np.uint64(STREAM_SUB), k0, k1)
        kappa, log_s_hi, log_g_hi = params[0], params[1], params[2]
        low = np.exp(np.interp(np.log(u), t1x, t1y))
        lg = np.log1p(-u)
        high = np.where(lg < log_g_hi, np.exp(log_s_hi + (log_g_hi - lg) / kappa), np.exp(np.interp(lg, t2x, t2y)))
        return np.where(u < 0.5, low, high)
    u, _ = uni(paths, step, np.uint64(STREAM_COUNT), k0, k1)
    mean = params[0]
    p = np.full(u.shape, math.exp(-mean))
    cum = p.copy()
    n = np.zeros(u.shape, dtype=np.int64)
    for k in range(1, MAX_JUMPS + 1):
        more = u > cum
        if not more.any():
            break
        n += more
        p = p * mean / k
        cum = cum + p
    total = np.full(u.shape, params[1])
    kappa, log_s_hi, log_q_hi = params[2], params[3], params[4]

    def size(w):
        lq = np.log(w)
        return np.where(lq < log_q_hi, np.exp(log_s_hi + (log_q_hi - lq) / kappa), np.exp(np.interp(lq, t1x, t1y)))

    for j in range(0, int(n.max(initial=0)), 2):
        a, b = uni(paths, step, np.uint64(STREAM_JUMPS + j // 2), k0, k1)
        total += np.where(n > j, size(a), 0.0)
        total += np.where(n > j + 1, size(b), 0.0)
    return total


def _outside_numpy(x, dom_kind, a, b):
    if dom_kind == DOM_BALL:
        return np.sum((x - a) ** 2, axis=1) >= b[0] * b[0]
    return np.any((x <= a) | (x >= b), axis=1)


def exit_kernel_numpy(kind, params, t1x, t1y, t2x, t2y, dt, x0, dom_kind, a, b, strides, n_steps, path0, n, k0, k1):
    """Step-synchronous numpy version of the exit kernel."""
    normal = python(normal_pair)
    d = x0.size
    L = strides.size
    exit_step = np.full((n, L), -1, dtype=np.int64)
    exit_pos = np.zeros((n, L, d))
    x = np.tile(x0, (n, 1))
    live = np.arange(n)
    for k in range(1, n_steps + 1):
        if live.size == 0:
            break
        paths = (np.uint64(path0) + live.astype(np.uint64)).astype(np.uint64)
        ds = draw_increment_numpy(kind, params, t1x, t1y, t2x, t2y, dt, paths, k, k0, k1)
        sd = np.sqrt(2.0 * ds)
        xl = x[live]
        for c in range(0, d, 2):
            z1, z2 = normal(paths, np.uint64(k), np.uint64(STREAM_NORMAL + c // 2), k0, k1)
            xl[:, c] += sd * z1
            if c + 1 < d:
                xl[:, c + 1] += sd * z2
        x[live] = xl
        out = _outside_numpy(xl, dom_kind, a, b)
        if out.any():
            for lv in range(L):
                if k % strides[lv]:
                    continue
                hit = out & (exit_step[live, lv] < 0)
                idx = live[hit]
                exit_step[idx, lv] = k
                exit_pos[idx, lv, :] = xl[hit]
            live = live[np.any(exit_step[live] < 0, axis=1)]
    return exit_step, exit_pos, x


def exit_kernel(*args, backend: str | None = None):
    """Dispatch to the numba kernel unless disabled or ``backend='numpy'``."""
    if backend == "numpy" or exit_kernel_numba is None:
        return exit_kernel_numpy(*args)
    return exit_kernel_numba(*args)
