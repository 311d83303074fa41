"""Counter-based Philox4x32-10 random numbers.

Every variate is a pure function of ``(seed, path, index, channel)``, so any
subset of paths or steps can be regenerated in any order, on any worker,
without touching the others. Normals come out in pairs per counter block via
Box-Muller.
"""

import numpy as np
from numba import njit

__all__ = [
    "CH_W",
    "CH_W1",
    "CH_W2",
    "CH_AUX",
    "philox4x32",
    "normals",
    "uniforms",
]

# channels: driving BM of the height, the two lateral BMs, and a spare stream
CH_W = 0
CH_W1 = 1
CH_W2 = 2
CH_AUX = 3

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)
_TWO_PI = 2.0 * np.pi


@njit(cache=True, inline="always")
def _philox(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def normal_pair(seed, path, block, channel):
    """Two independent N(0,1) variates for one counter block."""
    s = np.uint64(seed)
    b = np.uint64(block)
    c0, c1, c2, c3 = _philox(
        b & _MASK32,
        b >> _S32,
        np.uint64(path) & _MASK32,
        np.uint64(channel) & _MASK32,
        s & _MASK32,
        s >> _S32,
    )
    u1 = (float(c0 >> _S5) * 67108864.0 + float(c1 >> _S6) + 0.5) / 9007199254740992.0
    u2 = (float(c2 >> _S5) * 67108864.0 + float(c3 >> _S6) + 0.5) / 9007199254740992.0
    r = np.sqrt(-2.0 * np.log(u1))
    th = _TWO_PI * u2
    return r * np.cos(th), r * np.sin(th)


@njit(cache=True, inline="always")
def normal_at(seed, path, index, channel):
    n0, n1 = normal_pair(seed, path, index >> 1, channel)
    if index & 1:
        return n1
    return n0


@njit(cache=True)
def _philox_block(c0, c1, c2, c3, k0, k1):
    out = np.empty(4, dtype=np.uint64)
    out[0], out[1], out[2], out[3] = _philox(
        np.uint64(c0), np.uint64(c1), np.uint64(c2), np.uint64(c3),
        np.uint64(k0), np.uint64(k1),
    )
    return out


@njit(cache=True)
def _normals(seed, path, channel, start, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = normal_at(seed, path, start + i, channel)
    return out


@njit(cache=True)
def _uniforms(seed, path, channel, start, count):
    s = np.uint64(seed)
    out = np.empty(count)
    for i in range(count):
        b = np.uint64(start + i)
        c0, c1, c2, c3 = _philox(
            b & _MASK32, b >> _S32, np.uint64(path) & _MASK32,
            np.uint64(channel) & _MASK32, s & _MASK32, s >> _S32,
        )
        out[i] = (float(c0 >> _S5) * 67108864.0 + float(c1 >> _S6) + 0.5) / 9007199254740992.0
    return out


def philox4x32(counter, key):
    """Raw Philox4x32-10 block: four 32-bit counter words, two 32-bit key words."""
    c = [int(v) & 0xFFFFFFFF for v in counter]
    k = [int(v) & 0xFFFFFFFF for v in key]
    return tuple(int(v) for v in _philox_block(*c, *k))


def normals(seed, path, channel, start=0, count=1):
    """Standard normals ``start .. start+count-1`` of stream ``(seed, path, channel)``."""
    _check_key(seed, path)
    return _normals(int(seed), int(path), int(channel), int(start), int(count))


def uniforms(seed, path, channel, start=0, count=1):
    """Uniform(0, 1) variates, open at both ends, one per counter block."""
    _check_key(seed, path)
    return _uniforms(int(seed), int(path), int(channel), int(start), int(count))


def _check_key(seed, path):
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not 0 <= int(path) < 2**32:
        raise ValueError(f"path index must fit in 32 bits, got {path}")
