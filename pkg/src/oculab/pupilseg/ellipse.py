"""Axis-aligned ellipse pairs describing pupil and iris geometry.

All 8 parameters are fractions of image width/height in [0, 1]; dims are
full axis lengths. The pupil-size summary used throughout is the mean pupil
semi-axis as a fraction of the mean iris semi-axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EllipsePair:
    pupil: tuple[float, float, float, float]  # center_x, center_y, dim_x, dim_y
    iris: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        for name, quad in (("pupil", self.pupil), ("iris", self.iris)):
            if len(quad) != 4:
                raise ValueError(f"{name} needs 4 parameters, got {len(quad)}")
            for v in quad:
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name} parameter {v} outside [0, 1]")

    def as_vector(self) -> np.ndarray:
        return np.array(self.pupil + self.iris, dtype=np.float64)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "EllipsePair":
        v = np.asarray(v, dtype=float).reshape(8)
        return cls(pupil=tuple(v[:4]), iris=tuple(v[4:]))


def pupil_fraction(e: EllipsePair) -> float:
    """Mean pupil semi-axis over mean iris semi-axis: (p_dx+p_dy)/(i_dx+i_dy)."""
    denom = e.iris[2] + e.iris[3]
    if denom <= 0:
        raise ValueError("iris dims must be positive")
    return (e.pupil[2] + e.pupil[3]) / denom


def pupil_fraction_of(params: np.ndarray) -> np.ndarray:
    """Vectorized pupil fraction for an (..., 8) parameter array."""
    params = np.asarray(params, dtype=float)
    return (params[..., 2] + params[..., 3]) / (params[..., 6] + params[..., 7])


def pupil_tertiles(fractions: np.ndarray) -> np.ndarray:
    """Assign each value to {0: small, 1: medium, 2: large} by empirical tertiles.

    Boundaries are the 1/3 and 2/3 quantiles of the input; values tied with a
    boundary go to the lower bin.
    """
    fractions = np.asarray(fractions, dtype=float)
    if fractions.size < 3:
        raise ValueError(f"need at least 3 values for tertiles, got {fractions.size}")
    lo, hi = np.quantile(fractions, [1 / 3, 2 / 3])
    if lo == hi and np.all(fractions == fractions[0]):
        warnings.warn("all pupil fractions identical; assigning every value to 'small'")
        return np.zeros(fractions.size, dtype=np.int64)
    bins = np.where(fractions <= lo, 0, np.where(fractions <= hi, 1, 2))
    return bins.astype(np.int64)


TERTILE_NAMES = ("small", "medium", "large")
