"""Integer-order Bessel functions J_m(x) for all orders at once (Miller's algorithm).

The recurrence ``J_{m-1} = (2m/x) J_m - J_{m+1}`` is run downwards from an
order well above the turning point ``m ~ x``, where the minimal solution
dominates, and the resulting sequence is normalised with the sum rule
``J_0^2 + 2 sum_{m>=1} J_m^2 = 1``.  The overall sign comes from the second
sum rule ``J_0 + 2 sum_k J_{2k} = 1``.  This stays accurate for arguments in
the ten-thousands, where the drive ratio ``V_ac/(hbar Omega)`` of a slow
drive lives.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_RESCALE = 1e100


def default_order(x: float) -> int:
    """Highest order that still carries weight: Bessel turnover plus a safety margin."""
    return int(math.ceil(abs(x) + 8.0 * abs(x) ** (1.0 / 3.0) + 20.0))


def bessel_j_nonneg(x: float, n_max: int) -> np.ndarray:
    """``J_m(x)`` for ``m = 0 .. n_max`` (``x >= 0``)."""
    if x < 0:
        raise ValueError("use J_m(-x) = (-1)^m J_m(x) for negative arguments")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out

    start = int(max(n_max, x) + 10.0 * x ** (1.0 / 3.0) + 30)
    start += start % 2
    vals = np.zeros(start + 2)
    vals[start] = 1.0
    two_over_x = 2.0 / x
    for k in range(start, 0, -1):
        v = k * two_over_x * vals[k] - vals[k + 1]
        vals[k - 1] = v
        if abs(v) > _RESCALE:
            vals[k - 1 :] /= _RESCALE

    norm = vals[0] ** 2 + 2.0 * np.dot(vals[1:], vals[1:])
    sign = math.copysign(1.0, vals[0] + 2.0 * np.sum(vals[2::2]))
    vals *= sign / math.sqrt(norm)
    n = min(n_max, start)
    out[: n + 1] = vals[: n + 1]
    return out


@lru_cache(maxsize=32)
def _cached_table(x: float, n_max: int) -> np.ndarray:
    pos = bessel_j_nonneg(abs(x), n_max)
    orders = np.arange(-n_max, n_max + 1)
    vals = pos[np.abs(orders)]
    parity = np.where(orders < 0, (-1.0) ** np.abs(orders), 1.0)
    vals = vals * parity
    if x < 0:
        vals = vals * (-1.0) ** np.abs(orders)
    vals.setflags(write=False)
    return vals


def bessel_j_table(x: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Orders ``-n_max..n_max`` and the matching ``J_m(x)`` (read-only, cached)."""
    return np.arange(-n_max, n_max + 1), _cached_table(float(x), int(n_max))
