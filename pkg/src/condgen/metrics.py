"""Scores comparing generated conditions against real ones."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_BINS = 20
SMOOTHING_EPSILON = 1e-9


class MetricError(ValueError):
    pass


def _pair(actual: Sequence, generated: Sequence) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float)
    g = np.asarray(generated, dtype=float)
    if a.shape != g.shape or a.ndim != 1:
        raise MetricError(f"length mismatch: {a.shape} vs {g.shape}")
    if a.size == 0:
        raise MetricError("need at least one value")
    return a, g


def mape(actual: Sequence[float], generated: Sequence[float]) -> float:
    """Mean absolute percent error, in percent. Zero actual values are rejected."""
    a, g = _pair(actual, generated)
    zero = np.flatnonzero(a == 0)
    if zero.size:
        raise MetricError(f"MAPE undefined for zero actual values at positions {zero.tolist()}")
    return float(np.mean(np.abs((a - g) / a)) * 100.0)


def cmp(actual: Sequence[int], generated: Sequence[int]) -> float:
    """Condition mismatch percentage: mean absolute rating difference times 100."""
    a, g = _pair(actual, generated)
    return float(np.mean(np.abs(a - g)) * 100.0)


def himp(actual_hi: Sequence[int], generated_hi: Sequence[int]) -> float:
    """Health-index mismatch percentage, the same measure applied to HI levels."""
    return cmp(actual_hi, generated_hi)


def r_squared(actual: Sequence[float], predicted: Sequence[float]) -> float:
    a, p = _pair(actual, predicted)
    if a.size < 2:
        raise MetricError("R^2 needs at least two values")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R^2 undefined for constant actual values")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


@dataclass(frozen=True)
class BinnedDistribution:
    bin_edges: np.ndarray
    probabilities: np.ndarray
    smoothing_epsilon: float = SMOOTHING_EPSILON

    def __post_init__(self) -> None:
        edges = np.asarray(self.bin_edges, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        if edges.ndim != 1 or len(edges) != len(probs) + 1 or np.any(np.diff(edges) <= 0):
            raise MetricError("bin edges must be strictly ascending with one more edge than bins")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise MetricError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def from_values(cls, values: Sequence[float], edges: np.ndarray) -> "BinnedDistribution":
        counts, _ = np.histogram(np.asarray(values, dtype=float), bins=edges)
        if counts.sum() == 0:
            raise MetricError("no values fall inside the bin range")
        return cls(edges, counts / counts.sum())


def pooled_edges(a: np.ndarray, b: np.ndarray, bins: int) -> np.ndarray:
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def level_edges(levels: int) -> np.ndarray:
    """One bin per rating level 1..levels."""
    return np.arange(levels + 1) + 0.5


def kl_from_probabilities(p: Sequence[float], q: Sequence[float], *, epsilon: float = SMOOTHING_EPSILON) -> float:
    """``sum P ln(P/Q)`` over bins where P > 0.

    Q bins that are empty where P is not get ``epsilon`` and Q is renormalised;
    when no such bin exists Q is used untouched.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise MetricError("distributions differ in length")
    hole = (q == 0) & (p > 0)
    if hole.any():
        q = np.where(hole, epsilon, q)
        q = q / q.sum()
    mask = p > 0
    return max(float(np.sum(p[mask] * np.log(p[mask] / q[mask]))), 0.0)


def kl_divergence(real_values: Sequence[float], generated_values: Sequence[float], bins: int = DEFAULT_BINS,
                  *, levels: int | None = None) -> float:
    """KL divergence of the real sample's histogram from the generated one's.

    Bins are equal-width over the pooled range; with ``levels`` the values are
    treated as rating levels and get one bin each.
    """
    real = np.asarray(real_values, dtype=float)
    gen = np.asarray(generated_values, dtype=float)
    if real.size == 0 or gen.size == 0:
        raise MetricError("both samples must be non-empty")
    if levels is not None:
        edges = level_edges(levels)
    else:
        if bins < 2:
            raise MetricError("need at least 2 bins")
        edges = pooled_edges(real, gen, bins)
    P = BinnedDistribution.from_values(real, edges)
    Q = BinnedDistribution.from_values(gen, edges)
    return kl_from_probabilities(P.probabilities, Q.probabilities, epsilon=Q.smoothing_epsilon)


def benchmark_uniform(low: float, high: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Reference generator: values drawn uniformly between an attribute's min and max."""
    if low > high:
        raise MetricError(f"min {low} exceeds max {high}")
    if low == high:
        return np.full(count, float(low))
    return rng.uniform(low, high, size=count)
