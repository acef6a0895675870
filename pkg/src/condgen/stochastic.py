"""Random variation around model values and per-age rating distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .combination import CombinedModel, training_rows
from .conversion import numeric_to_rating, rating_to_numeric
from .data_model import InspectionDataset

__all__ = [
    "SigmaTable", "estimate_sigma", "diversify",
    "rating_to_numeric", "numeric_to_rating",
    "CategoricalAgeModel", "fit_categorical", "sample_categorical",
]


def age_key(age: float) -> int:
    return int(math.floor(age + 0.5))


@dataclass(frozen=True)
class SigmaTable:
    """Per-age standard deviations for Gaussian diversification.

    Lookup order for an age ``x``: the stored value at ``x``; the nearest
    stored ages at most ``max_gap`` years away (averaged when two are
    equally near); ``fallback_fraction * expected``. ``fixed`` overrides
    everything and is meant for hand-built configurations.
    """

    sigmas: Mapping[int, float] = field(default_factory=dict)
    fallback_fraction: float = 0.05
    max_gap: int = 1
    fixed: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigmas", {int(k): float(v) for k, v in dict(self.sigmas).items()})
        if not 0.0 < self.fallback_fraction <= 1.0:
            raise ValueError("fallback_fraction must lie in (0, 1]")
        if any(v < 0 or not math.isfinite(v) for v in self.sigmas.values()):
            raise ValueError("sigma entries must be finite and non-negative")
        if self.fixed is not None and self.fixed < 0:
            raise ValueError("fixed sigma must be non-negative")

    def lookup(self, age: float, expected: float) -> float:
        if self.fixed is not None:
            return self.fixed
        x = age_key(age)
        if x in self.sigmas:
            return self.sigmas[x]
        for d in range(1, self.max_gap + 1):
            near = [self.sigmas[k] for k in (x - d, x + d) if k in self.sigmas]
            if near:
                return sum(near) / len(near)
        return self.fallback_fraction * abs(expected)

    def to_dict(self) -> dict:
        d = {"sigmas": {str(k): self.sigmas[k] for k in sorted(self.sigmas)},
             "fallback_fraction": self.fallback_fraction, "max_gap": self.max_gap}
        if self.fixed is not None:
            d["fixed"] = self.fixed
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SigmaTable":
        return cls({int(k): v for k, v in d.get("sigmas", {}).items()},
                   d.get("fallback_fraction", 0.05), d.get("max_gap", 1), d.get("fixed"))


def estimate_sigma(training: InspectionDataset, model: CombinedModel, *, fallback_fraction: float = 0.05,
                   max_gap: int = 1, min_count: int = 2) -> SigmaTable:
    """Population standard deviation of residuals per (rounded) age.

    Ages with fewer than ``min_count`` residuals are left to the table's
    fallback chain.
    """
    if len(training) == 0:
        return SigmaTable({}, fallback_fraction, max_gap)
    F, y, ages = training_rows(model, training, use_previous=model.needs_previous)
    resid = y - F @ model.weights
    groups: dict[int, list[float]] = {}
    for a, r in zip(ages, resid):
        groups.setdefault(age_key(a), []).append(float(r))
    sigmas = {k: float(np.std(v)) for k, v in groups.items() if len(v) >= min_count}
    return SigmaTable(sigmas, fallback_fraction, max_gap)


def diversify(value: float, sigma: float, rng: np.random.Generator, *, nonnegative: bool = False) -> float:
    """One draw from N(value, sigma).

    With ``nonnegative`` a negative draw is redrawn once and then clamped to 0.
    """
    if sigma < 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be finite and non-negative, got {sigma}")
    if sigma == 0.0:
        return float(value)
    x = float(rng.normal(value, sigma))
    if nonnegative and x < 0.0:
        x = float(rng.normal(value, sigma))
        if x < 0.0:
            x = 0.0
    return x


class NoDistributionError(LookupError):
    pass


@dataclass(frozen=True)
class CategoricalAgeModel:
    """Probability vectors over ``levels`` rating levels, keyed by integer age."""

    levels: int
    probabilities: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    neighbor_window: int = 2
    empirical: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.levels < 2:
            raise ValueError("a categorical model needs at least 2 levels")
        probs = {int(k): tuple(float(p) for p in v) for k, v in dict(self.probabilities).items()}
        object.__setattr__(self, "probabilities", probs)
        if self.empirical is not None:
            object.__setattr__(self, "empirical", tuple(float(p) for p in self.empirical))
        for v in list(probs.values()) + ([self.empirical] if self.empirical else []):
            if len(v) != self.levels or min(v) < 0 or abs(sum(v) - 1.0) > 1e-9:
                raise ValueError(f"invalid probability vector {v}")

    def resolve(self, age: float) -> np.ndarray:
        """Distribution at ``age``.

        Falls back to the average of the nearest ages within the window, then
        to the empirical distribution, then to the nearest ages at any
        distance.
        """
        x = age_key(age)
        if x in self.probabilities:
            return np.array(self.probabilities[x])
        for d in range(1, self.neighbor_window + 1):
            near = [self.probabilities[k] for k in (x - d, x + d) if k in self.probabilities]
            if near:
                return _normalised(np.mean(near, axis=0))
        if self.empirical is not None:
            return np.array(self.empirical)
        if not self.probabilities:
            raise NoDistributionError(
                "no rating distribution available; supply an empirical distribution for this attribute")
        keys = np.array(sorted(self.probabilities))
        dist = np.abs(keys - x)
        nearest = keys[dist == dist.min()]
        return _normalised(np.mean([self.probabilities[int(k)] for k in nearest], axis=0))

    def to_dict(self) -> dict:
        d = {"levels": self.levels, "neighbor_window": self.neighbor_window,
             "probabilities": {str(k): list(self.probabilities[k]) for k in sorted(self.probabilities)}}
        if self.empirical is not None:
            d["empirical"] = list(self.empirical)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategoricalAgeModel":
        emp = d.get("empirical")
        return cls(int(d["levels"]), {int(k): tuple(v) for k, v in d.get("probabilities", {}).items()},
                   int(d.get("neighbor_window", 2)), tuple(emp) if emp is not None else None)


def _normalised(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


def fit_categorical(training: InspectionDataset, attribute: str, *, neighbor_window: int = 2,
                    empirical: Sequence[float] | None = None) -> CategoricalAgeModel:
    """Relative frequency of each level among the records at each age."""
    attr = training.attribute(attribute)
    if not attr.is_rating:
        raise TypeError(f"attribute {attribute!r} is not rating-valued")
    counts: dict[int, np.ndarray] = {}
    for rec in training.records:
        v = rec.values.get(attribute)
        if v is None:
            continue
        c = counts.setdefault(age_key(rec.age_years), np.zeros(attr.rating_levels))
        c[int(v) - 1] += 1
    probs = {k: tuple(c / c.sum()) for k, c in counts.items()}
    return CategoricalAgeModel(attr.rating_levels, probs, neighbor_window,
                               tuple(empirical) if empirical is not None else None)


def sample_categorical(model: CategoricalAgeModel, age: float, rng: np.random.Generator) -> int:
    p = model.resolve(age)
    u = rng.random()
    level = int(np.searchsorted(np.cumsum(p), u, side="right")) + 1
    # guard against cumulative sums ending a hair below 1
    while level > model.levels or p[level - 1] == 0.0:
        level -= 1
    return level
