"""Conversion between ordered rating levels and numbers in (0, 1)."""

from __future__ import annotations

import math


def rating_to_numeric(level: int, levels: int) -> float:
    """Map rating ``level`` (1..``levels``) to the centre of its slot, ``(i - 1/2) / N``."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if int(level) != level or not 1 <= level <= levels:
        raise ValueError(f"rating level {level!r} outside [1, {levels}]")
    return (int(level) - 0.5) / levels


def numeric_to_rating(x: float, levels: int) -> int:
    """Nearest rating level to ``x``; equidistant values go to the lower level.

    Values outside (0, 1) are clamped to the first or last level.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    if math.isnan(x):
        raise ValueError("cannot convert NaN to a rating level")
    if math.isinf(x):
        return levels if x > 0 else 1
    # slot i covers ((i-1)/N, i/N]; its upper edge is the midpoint between centres i and i+1
    level = math.ceil(x * levels)
    # x * levels can round across an edge; settle against the edge value itself
    if x <= (level - 1) / levels:
        level -= 1
    elif x > level / levels:
        level += 1
    return int(min(max(level, 1), levels))
