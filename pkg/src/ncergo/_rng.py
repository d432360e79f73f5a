"""Deterministic randomness helpers.

Two needs: (a) seeded generators for scenario inputs, keyed by (seed, tag) so
unrelated draws never share a stream, and (b) a stateless per-lattice-point
noise value for perturbation rules, computable in any order and vectorizable.
Both are built on splitmix64, whose output is platform-stable.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 wraparound is intentional
    with np.errstate(over="ignore"):
        z = (z + _GAMMA) & _MASK
        z = ((z ^ (z >> np.uint64(30))) * _M1) & _MASK
        z = ((z ^ (z >> np.uint64(27))) * _M2) & _MASK
        return z ^ (z >> np.uint64(31))


def _tag_key(tag: str) -> np.uint64:
    key = np.uint64(0)
    for ch in tag.encode("utf-8"):
        key = _mix(np.asarray((key + np.uint64(ch)) & _MASK))[()]
    return key


def generator(seed: int, tag: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, tag)."""
    base = _mix(np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))[()]
    key = int(base ^ _tag_key(tag))
    return np.random.Generator(np.random.Philox(key=key))


def unit_noise(seed: int, indices: np.ndarray) -> np.ndarray:
    """Stateless noise in [-1, 1) per multi-index row.

    indices: integer array of shape (..., d). The value at each row depends
    only on (seed, row), so evaluation order and box partitioning are
    irrelevant.
    """
    idx = np.asarray(indices, dtype=np.uint64)
    acc = np.full(idx.shape[:-1], np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    for axis in range(idx.shape[-1]):
        acc = _mix(acc ^ idx[..., axis])
    # top 53 bits to a double in [0, 1), then shift to [-1, 1)
    u = (acc >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return 2.0 * u - 1.0
