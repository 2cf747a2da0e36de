"""Counter-based deterministic random streams.

Every random draw in the package (dataset generation, parameter init,
Gumbel noise, dropout masks) comes from an `RngStream`. A stream is fully
described by (seed, stream, counter); the n-th sample is a pure function
of those three integers, so replaying a stream is exact and streams with
different ids never overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Stream ids, one per consumer, so draws never interleave across purposes.
STREAM_DATASET = 1
STREAM_FEATURE_PROTO_AUDIO = 2
STREAM_FEATURE_PROTO_VISUAL = 3
STREAM_TEXT_PROTO = 4
STREAM_PARAM_INIT = 5
STREAM_GUMBEL = 6
STREAM_DROPOUT = 7
STREAM_SHUFFLE = 8

_M64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_NP_GAMMA = np.uint64(_GAMMA)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53


def _mix64_int(z: int) -> int:
    """splitmix64 finalizer on a Python int, wrapping at 64 bits."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized on uint64 arrays (silent wraparound)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@dataclass
class RngStream:
    """Counter-based stream: identical (seed, stream, counter) replays exactly."""

    seed: int
    stream: int = 0
    counter: int = 0
    _key: np.uint64 = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        key = _mix64_int((self.seed & _M64) ^ _mix64_int((self.stream + _GAMMA) & _M64))
        self._key = np.uint64(key)

    def clone(self) -> "RngStream":
        return RngStream(self.seed, self.stream, self.counter)

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _mix64(self._key + idx * _NP_GAMMA)

    def uniform(self, shape=()):
        """Uniform draws on the open interval (0, 1).

        The 53-bit mantissa grid includes 0; it is clamped up to 2**-53
        (the grid step) so downstream logs never see 0 or 1 exactly.
        """
        n = int(np.prod(shape, dtype=np.int64)) if shape != () else 1
        u = (self._words(n) >> np.uint64(11)).astype(np.float64) * _U53
        u = np.maximum(u, _U53)
        return u.reshape(shape) if shape != () else float(u[0])

    def gaussian(self, shape=()):
        """Standard normal draws via Box-Muller on two uniform streams."""
        n = int(np.prod(shape, dtype=np.int64)) if shape != () else 1
        u1 = np.asarray(self.uniform((n,)))
        u2 = np.asarray(self.uniform((n,)))
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        return z.reshape(shape) if shape != () else float(z[0])

    def integers(self, low: int, high: int, shape=()):
        """Uniform integers in [low, high)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        u = np.asarray(self.uniform(shape if shape != () else (1,)))
        out = (low + np.floor(u * (high - low))).astype(np.int64)
        out = np.minimum(out, high - 1)
        return out.reshape(shape) if shape != () else int(out[0])

    def choice(self, weights) -> int:
        """Sample an index proportional to the given nonnegative weights."""
        w = np.asarray(weights, dtype=np.float64)
        cdf = np.cumsum(w) / w.sum()
        return int(np.searchsorted(cdf, self.uniform()))

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle; returns a new list."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.integers(0, i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def gumbel_from_uniform(u):
    """Map uniform(0,1) draws to standard Gumbel noise, g = -log(-log u)."""
    return -np.log(-np.log(u))
