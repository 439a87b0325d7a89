"""Small numerical helpers shared by the solvers."""

from __future__ import annotations

import math
from typing import Callable

# Euler-Maclaurin needs the expansion point well away from the origin.
_EM_START = 64.0


def hurwitz_tail(s: float, q: float) -> float:
    """``sum_{m>=0} (m + q)**(-s)`` for ``s > 1``, ``q > 0``.

    Direct summation up to ``q >= 64`` then Euler-Maclaurin with three
    Bernoulli corrections; the dropped term is below 1e-17 relative.
    """
    if s <= 1.0:
        return math.inf
    total = 0.0
    while q < _EM_START:
        total += q ** (-s)
        q += 1.0
    em = (
        q ** (1.0 - s) / (s - 1.0)
        + 0.5 * q ** (-s)
        + s * q ** (-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * q ** (-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * q ** (-s - 5.0) / 30240.0
    )
    return total + em


def bisect_increasing(
    g: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    xtol: float = 1e-15,
    max_iter: int = 200,
) -> float:
    """Root of ``g(x) = target`` for non-decreasing ``g`` with a sign change on ``[lo, hi]``.

    ``g`` may return ``inf`` (treated as above target). Stops when the bracket
    is narrower than ``xtol`` or no longer shrinks in floating point.
    """
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        if g(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
