"""Deterministic seed derivation.

Every random draw in the pipeline comes from a numpy Generator whose seed is
derived from a master seed plus a path of identifying parts (patient id,
visit id, eye side, step index, ...). Derivation is a stateless counter-based
mix, so work can be sharded or reordered freely and still produce the same
bits as a serial run.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# splitmix64 finalizer constants
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _splitmix64(x: int) -> int:
    z = (x + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _M1) & _MASK64
    z = ((z ^ (z >> 27)) * _M2) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(s: str) -> int:
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def mix_seed(seed: int, *parts: int | str) -> int:
    """Mix a master seed with a path of parts into a single 64-bit seed.

    Parts may be integers (negatives allowed) or strings. Changing any part,
    or the order of parts, changes the result.
    """
    h = _splitmix64(seed & _MASK64)
    for part in parts:
        if isinstance(part, str):
            v = _fnv1a64(part)
        else:
            v = int(part) & _MASK64
        h = _splitmix64(h ^ v)
    return h


def derive_rng(seed: int, *parts: int | str) -> np.random.Generator:
    """A fresh Generator for the (seed, *parts) path."""
    return np.random.default_rng(mix_seed(seed, *parts))
