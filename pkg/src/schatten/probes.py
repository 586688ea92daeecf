"""Seeded probe vectors with per-sample substreams.

Probe ``j`` is a pure function of ``(seed, j, dim, distribution)``.  Bits come
from a counter-based hash: the splitmix64 finalizer applied to

    key_j   = mix(mix(seed) + (j + 1) * GOLDEN)
    bits_ji = mix(key_j + (c + 1) * GOLDEN)

where ``c`` is the draw counter within the sample.  Rademacher entry ``i``
uses the top bit of draw ``c = i``.  Gaussian entry ``i`` uses draws
``c = 2i`` and ``c = 2i + 1`` as two open-interval uniforms ``u1, u2`` (top 53
bits, offset by half an ulp) and the Box-Muller cosine branch
``sqrt(-2 ln u1) * cos(2 pi u2)``.

Because every entry is addressed by its counter, any contiguous range of
sample indices can be generated in one vectorized call and the result does
not depend on how samples are split across calls or workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

DISTRIBUTIONS = ("gaussian", "rademacher")


def _mix(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _to_u64(x: int) -> np.uint64:
    return np.uint64(int(x) & _MASK64)


def _uniform_open(bits: np.ndarray) -> np.ndarray:
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class ProbeStream:
    """Immutable source of probe vectors with mean 0 and identity covariance."""

    dim: int
    seed: int = 0
    distribution: str = "gaussian"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(
                f"unknown distribution {self.distribution!r}; expected one of {DISTRIBUTIONS}"
            )

    def _sample_keys(self, start: int, count: int) -> np.ndarray:
        base = _mix(np.array([_to_u64(self.seed)], dtype=np.uint64))[0]
        j = np.arange(start, start + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return _mix(base + (j + np.uint64(1)) * GOLDEN)

    def _bits(self, keys: np.ndarray, ndraws: int) -> np.ndarray:
        c = np.arange(ndraws, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return _mix(keys[None, :] + ((c + np.uint64(1)) * GOLDEN)[:, None])

    def block(self, start: int, count: int) -> np.ndarray:
        """Probes ``start, ..., start + count - 1`` as columns of a ``(dim, count)`` array."""
        if start < 0 or count < 0:
            raise ValueError("sample indices must be non-negative")
        keys = self._sample_keys(start, count)
        if self.distribution == "rademacher":
            bits = self._bits(keys, self.dim)
            return np.where(bits >> np.uint64(63), 1.0, -1.0)
        bits = self._bits(keys, 2 * self.dim)
        u1 = _uniform_open(bits[0::2])
        u2 = _uniform_open(bits[1::2])
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def probe(self, j: int) -> np.ndarray:
        return self.block(j, 1)[:, 0]

    def with_seed(self, seed: int) -> "ProbeStream":
        return ProbeStream(self.dim, seed, self.distribution)


def probe(stream: ProbeStream, j: int) -> np.ndarray:
    return stream.probe(j)
