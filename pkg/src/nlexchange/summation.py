"""Compensated summation helpers.

Partial sums are always produced per fixed work unit (a grid slab, a
quadrature chunk) and merged in a fixed order, so results do not depend on how
many threads evaluated the units.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def kahan_add(total, comp, value):
    """Neumaier step: returns the updated (total, compensation) pair."""
    t = total + value
    if abs(total) >= abs(value):
        comp += (total - t) + value
    else:
        comp += (value - t) + total
    return t, comp


def exact_sum(values) -> float:
    """Correctly rounded sum of a flat array of floats (order independent)."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    return math.fsum(arr.tolist())


def exact_sum_axis0(values: np.ndarray) -> np.ndarray:
    """Correctly rounded sum over the first axis, for each trailing entry."""
    arr = np.asarray(values, dtype=np.float64)
    flat = arr.reshape(arr.shape[0], -1)
    out = np.array([math.fsum(flat[:, j].tolist()) for j in range(flat.shape[1])])
    return out.reshape(arr.shape[1:])
