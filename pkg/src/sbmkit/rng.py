"""Philox4x32-10 counter-based generator.

Every draw is a pure function of ``(path, step, stream)`` and the 64-bit
seed, so paths can be simulated in any order or on any number of workers and
still reproduce bit-for-bit.  The functions below are written with
elementwise uint64 arithmetic only, so the same source works on numpy arrays
and compiles under numba for scalars.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import maybe_njit, python

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)

# stream ids; a stream yields two uniforms per (path, step)
STREAM_SUB = 0
STREAM_SUB2 = 1
STREAM_COUNT = 2
STREAM_NORMAL = 8
STREAM_JUMPS = 32


@maybe_njit
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds; all arguments are uint64 holding 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@maybe_njit
def uniform_pair(path, step, stream, k0, k1):
    """Two doubles in the open interval (0, 1) with 53 random bits each."""
    p = np.uint64(path)
    x0, x1, x2, x3 = philox4x32(p & _MASK, p >> _S32, np.uint64(step) & _MASK, np.uint64(stream), k0, k1)
    u1 = ((x0 >> _S5) * 67108864.0 + (x1 >> _S6) + 0.5) / 9007199254740992.0
    u2 = ((x2 >> _S5) * 67108864.0 + (x3 >> _S6) + 0.5) / 9007199254740992.0
    return u1, u2


@maybe_njit
def normal_pair(path, step, stream, k0, k1):
    """Two independent standard normals (Box-Muller)."""
    u1, u2 = uniform_pair(path, step, stream, k0, k1)
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * math.pi * u2
    return rad * np.cos(ang), rad * np.sin(ang)


def split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@dataclass
class RandomSource:
    """Seed plus the first path index this source hands out.

    ``spawn`` returns a disjoint block of path indices, which is how work is
    partitioned between callers and workers without sharing state.
    """

    seed: int = 0
    path_offset: int = 0

    def __post_init__(self):
        self.key = split_seed(self.seed)

    def spawn(self, n_paths: int) -> "RandomSource":
        child = RandomSource(self.seed, self.path_offset)
        self.path_offset += int(n_paths)
        return child

    def uniforms(self, n: int, step: int = 0, stream: int = STREAM_SUB) -> tuple[np.ndarray, np.ndarray]:
        paths = np.arange(self.path_offset, self.path_offset + n, dtype=np.uint64)
        return python(uniform_pair)(paths, np.uint64(step), np.uint64(stream), *self.key)
