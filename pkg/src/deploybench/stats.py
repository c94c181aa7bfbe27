"""Small statistics helpers shared by latency and sweep aggregation.

Conventions are pinned so results are oracle-checkable:
median of an even-length sample is the midpoint of the middle two,
std uses the n-1 denominator (0.0 for a single observation),
p95 is nearest-rank (ceil(0.95*n)), quartiles interpolate linearly.
"""

from __future__ import annotations

import math
from typing import Sequence


def median(xs: Sequence[float]) -> float:
    if not xs:
        raise ValueError("median of empty sequence")
    s = sorted(xs)
    n = len(s)
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2.0


def mean(xs: Sequence[float]) -> float:
    if not xs:
        raise ValueError("mean of empty sequence")
    return math.fsum(xs) / len(xs)


def sample_std(xs: Sequence[float]) -> float:
    n = len(xs)
    if n == 0:
        raise ValueError("std of empty sequence")
    if n == 1:
        return 0.0
    m = mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (n - 1))


def nearest_rank(xs: Sequence[float], q: float) -> float:
    """q-quantile by the nearest-rank rule: the ceil(q*n)-th smallest."""
    if not xs:
        raise ValueError("quantile of empty sequence")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    s = sorted(xs)
    k = math.ceil(q * len(s))
    return float(s[max(k, 1) - 1])


def quantile_linear(xs: Sequence[float], q: float) -> float:
    """q-quantile with linear interpolation between order statistics."""
    if not xs:
        raise ValueError("quantile of empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    s = sorted(xs)
    if len(s) == 1:
        return float(s[0])
    pos = q * (len(s) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return float(s[lo])
    frac = pos - lo
    return s[lo] * (1.0 - frac) + s[hi] * frac
