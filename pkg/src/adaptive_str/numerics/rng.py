"""Seeded random streams: xoshiro256** with splitmix64 seeding.

Each consumer draws from its own stream. The stream state is derived from
``seed XOR (stream_id * 0x9E3779B97F4A7C15)`` expanded by splitmix64 into the
four xoshiro words, so adding a new stream never shifts an existing one.

Uniforms take the top 53 bits: ``(x >> 11) * 2**-53`` in ``[0, 1)``.
Normals use Box-Muller, cosine branch only, one normal per two uniforms:
``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..errors import ValidationError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

STREAM_THETA = 1
STREAM_NOISE = 2
STREAM_SURROGATE = 3

_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U45 = np.uint64(45)
_U7 = np.uint64(7)
_U5 = np.uint64(5)
_U9 = np.uint64(9)
_U64 = np.uint64(64)


def splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step; returns ``(new_state, output)``."""
    x = (x + GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def seed_words(seed: int, stream_id: int) -> np.ndarray:
    x = (int(seed) ^ ((int(stream_id) * GOLDEN) & MASK64)) & MASK64
    words = []
    for _ in range(4):
        x, out = splitmix64(x)
        words.append(out)
    if not any(words):
        words[0] = 1
    return np.array(words, dtype=np.uint64)


@njit(cache=True)
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@njit(cache=True)
def next_u64(s):
    """Advance the xoshiro256** state ``s`` (uint64[4]) in place."""
    result = _rotl(s[1] * _U5, _U7) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U45)
    return result


@njit(cache=True)
def next_uniform(s):
    return float(next_u64(s) >> _U11) * _INV_2_53


@njit(cache=True)
def next_standard_normal(s):
    u1 = 1.0 - next_uniform(s)
    u2 = next_uniform(s)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


@njit(cache=True)
def fill_standard_normal(s, out):
    for i in range(out.shape[0]):
        out[i] = next_standard_normal(s)


class RngState:
    """One seeded stream. The uint64[4] ``state`` array is owned by this
    object and advanced in place by the compiled draw functions."""

    __slots__ = ("seed", "stream_id", "state")

    def __init__(self, seed: int, stream_id: int = 0):
        if not isinstance(seed, (int, np.integer)) or seed < 0 or seed > MASK64:
            raise ValidationError("seed must be an integer in [0, 2**64)")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.state = seed_words(self.seed, self.stream_id)

    def copy(self) -> "RngState":
        r = RngState.__new__(RngState)
        r.seed = self.seed
        r.stream_id = self.stream_id
        r.state = self.state.copy()
        return r

    def uniform(self) -> float:
        return next_uniform(self.state)

    def standard_normal(self) -> float:
        return next_standard_normal(self.state)

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        fill_standard_normal(self.state, out)
        return out

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream_id={self.stream_id})"


def seed_stream(seed: int, stream_id: int) -> RngState:
    return RngState(seed, stream_id)


def next_gaussian(rng: RngState, mean: float, std: float) -> float:
    """Draw ``N(mean, std^2)``. ``std = 0`` returns ``mean`` exactly but
    still consumes the draw, so streams stay aligned across noise levels."""
    if std < 0:
        raise ValidationError("std must be nonnegative")
    z = rng.standard_normal()
    if std == 0:
        return float(mean)
    return mean + std * z
