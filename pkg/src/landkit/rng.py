"""Deterministic randomness built on the splitmix64 mixer.

Every seeded component of the toolkit draws through this module so that a
given seed reproduces bit-identical artifacts across runs and platforms.
No global state: streams are explicit, and lattice/field hashing is
stateless so values can be evaluated at random access.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# odd constants decorrelating the axes of stateless grid hashes
_KX = 0x9FB21C651E98DF25
_KY = 0xD6E8FEB86659FD93

_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """Finalizing mixer of splitmix64 (bijective on 64-bit words)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * _MIX1) & MASK64
    z ^= z >> 27
    z = (z * _MIX2) & MASK64
    z ^= z >> 31
    return z


def prng_next(state: int) -> tuple[int, float]:
    """Advance one splitmix64 step.

    Returns ``(state', u)`` where ``state' = state + 0x9E3779B97F4A7C15``
    (mod 2^64) and ``u = (mix64(state') >> 11) * 2**-53`` is uniform in
    [0, 1).
    """
    state = (state + GOLDEN) & MASK64
    return state, (mix64(state) >> 11) * _INV_2_53


def hash_words(*words: int) -> int:
    """Stateless 64-bit hash of a word sequence (order-sensitive)."""
    h = 0
    for w in words:
        h = mix64((h + GOLDEN) ^ (w & MASK64))
    return h


def hash_string(s: str) -> int:
    """FNV-1a of the UTF-8 bytes, finalized with mix64."""
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & MASK64
    return mix64(h)


def grid_uniform(seed: int, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) value at every integer lattice point (ix, iy).

    Stateless: the value at a point depends only on (seed, ix, iy), which
    gives random access and identical fields regardless of evaluation
    order. ``ix`` and ``iy`` broadcast against each other.
    """
    with np.errstate(over="ignore"):
        h = np.asarray(ix, dtype=np.uint64) * np.uint64(_KX)
        h = h ^ np.uint64(seed & MASK64)
        h = _mix64_np(h)
        h = h ^ (np.asarray(iy, dtype=np.uint64) * np.uint64(_KY))
        h = _mix64_np(h)
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Sequential splitmix64 stream with the draw helpers the toolkit needs."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def next_floats(self, n: int) -> np.ndarray:
        """Vectorized block of n draws, identical to n next_float() calls."""
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + np.arange(
                1, n + 1, dtype=np.uint64
            ) * np.uint64(GOLDEN)
            out = (_mix64_np(states) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        self.state = (self.state + n * GOLDEN) & MASK64
        return out

    def uniform(self, lo: float, hi: float) -> float:
        return lo + self.next_float() * (hi - lo)

    def below(self, n: int) -> int:
        """Integer in [0, n). n must be positive (and < 2**53)."""
        if n <= 0:
            raise ValueError(f"below() needs n >= 1, got {n}")
        return int(self.next_float() * n)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> np.ndarray:
        """Uniform permutation of range(n) via argsort of a draw block."""
        return np.argsort(self.next_floats(n), kind="stable").astype(np.int64)

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct indices drawn from range(n), in draw order."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct indices from {n}")
        idx = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.below(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()
