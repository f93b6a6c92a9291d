"""Portable counter-based random numbers.

Every stream is SplitMix64 (Steele, Lea & Flood 2014) evaluated in counter
mode: draw ``k`` of a stream with key ``s`` is ``mix64(s + (k + 1) * G)``
with ``G = 0x9E3779B97F4A7C15``.  Uniforms keep the top 53 bits; normals
use the Box-Muller transform on consecutive pairs of uniforms.  Nothing
depends on numpy's or the platform's generators, so a dataset can be
regenerated bit-for-bit from its seed by any implementation of the same
three formulas.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_POW_M53 = 1.0 / 9007199254740992.0


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, elementwise on uint64 arrays."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def derive_key(seed: int, *path: int) -> int:
    """Key of the sub-stream ``path`` under ``seed`` (e.g. one per dataset part)."""
    key = np.uint64(seed % 2**64)
    for p in path:
        with np.errstate(over="ignore"):
            key = mix64(np.array([key + GOLDEN * np.uint64(p % 2**64 + 1)]))[0]
    return int(key)


class SplitMix64:
    """A seekable stream of 64-bit words, uniforms and standard normals."""

    def __init__(self, seed: int, *path: int):
        self.key = np.uint64(derive_key(seed, *path))
        self.counter = 0

    def words(self, size: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        with np.errstate(over="ignore"):
            out = mix64(self.key + k * GOLDEN)
        self.counter += size
        return out

    def uniform(self, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Uniform on [low, high)."""
        u = (self.words(size) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
        return low + (high - low) * u

    def normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        w = self.words(2 * pairs).reshape(pairs, 2)
        # (0, 1] for the log argument, [0, 1) for the angle
        u1 = ((w[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_POW_M53
        u2 = (w[:, 1] >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:size]
