"""Iterated-logarithm convention: log x = ln max(e, x) at every level.

Under this convention log x >= 1 always, and loglog x = 1 for every
x <= e**e, so normalizers built from it are positive from n = 1 on.
"""

from __future__ import annotations

import math


def log_(x: float) -> float:
    """ln max(e, x)."""
    return math.log(max(math.e, x))


def loglog_(x: float) -> float:
    """log applied twice under the same convention."""
    return log_(log_(x))


def d_n(n: int) -> float:
    """sqrt(2 n loglog n), the i.i.d. normalizer."""
    if n < 1:
        raise ValueError(f"d_n needs n >= 1, got {n}")
    return math.sqrt(2.0 * n * loglog_(float(n)))
