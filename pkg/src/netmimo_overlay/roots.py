"""Scalar bisection for monotone crossings on an interval."""

from __future__ import annotations

import math

__all__ = ["bisect_increasing"]


def bisect_increasing(h, lo: float = 0.0, hi: float = 1.0, xtol: float = 0.0,
                      max_halvings: int = 200) -> float:
    """Root of a nondecreasing function ``h`` on ``[lo, hi]``.

    If ``h(lo) >= 0`` the crossing is at (or before) ``lo`` and ``lo`` is
    returned; if ``h(hi) <= 0`` it is returned as ``hi``. Otherwise the
    bracket is halved until its width is at most ``xtol`` (``0`` means run
    to floating-point resolution) or ``max_halvings`` is reached, and the
    midpoint of the final bracket is returned.
    """
    h_lo = h(lo)
    if h_lo >= 0:
        return lo
    h_hi = h(hi)
    if h_hi <= 0:
        return hi
    for _ in range(max_halvings):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        h_mid = h(mid)
        if math.isnan(h_mid):
            raise ValueError("objective evaluated to nan during bisection")
        if h_mid == 0:
            return mid
        if h_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
