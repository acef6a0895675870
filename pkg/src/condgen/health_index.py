"""Gradient-boosted regression trees that learn health-index rules from labelled records.

Plain squared-error boosting: every tree is grown greedily on the residuals
of the ensemble so far, splitting where the summed squared error drops the
most. Discrete indices are treated as ordinal: the ensemble regresses on the
level number and predictions are rounded and clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

HI_MIN, HI_MAX = 0.0, 100.0


class HealthIndexError(ValueError):
    pass


class HIMode(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    mode: HIMode = HIMode.CONTINUOUS
    levels: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", HIMode(self.mode))
        if not 0.0 < self.learning_rate <= 1.0:
            raise HealthIndexError("learning_rate must lie in (0, 1]")
        if self.n_trees < 0 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise HealthIndexError("n_trees >= 0, max_depth >= 1 and min_samples_leaf >= 1 required")

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth, "learning_rate": self.learning_rate,
                "min_samples_leaf": self.min_samples_leaf, "mode": self.mode.value, "levels": self.levels}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BoostConfig":
        return cls(**{k: d[k] for k in ("n_trees", "max_depth", "learning_rate", "min_samples_leaf",
                                        "mode", "levels") if k in d})


@dataclass(frozen=True)
class Tree:
    """Array-encoded binary tree. Leaves have ``feature == -1``.

    A sample goes left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            idx = rows[internal]
            n = node[internal]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[internal] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self, names: Sequence[str], i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"leaf": float(self.value[i])}
        return {"feature": names[self.feature[i]], "threshold": float(self.threshold[i]),
                "left": self.to_dict(names, int(self.left[i])),
                "right": self.to_dict(names, int(self.right[i]))}

    @classmethod
    def from_dict(cls, d: Mapping, names: Sequence[str]) -> "Tree":
        index = {n: i for i, n in enumerate(names)}
        feat, thr, left, right, val = [], [], [], [], []

        def add(node) -> int:
            i = len(feat)
            feat.append(-1), thr.append(0.0), left.append(-1), right.append(-1), val.append(0.0)
            if "leaf" in node:
                val[i] = float(node["leaf"])
            else:
                feat[i] = index[node["feature"]]
                thr[i] = float(node["threshold"])
                left[i] = add(node["left"])
                right[i] = add(node["right"])
            return i

        add(d)
        return cls(np.array(feat, dtype=np.int64), np.array(thr), np.array(left, dtype=np.int64),
                   np.array(right, dtype=np.int64), np.array(val))


def _best_split(X: np.ndarray, r: np.ndarray, min_leaf: int) -> tuple[int, float, float] | None:
    """Feature, threshold and SSE reduction of the best split, or None."""
    n = len(r)
    total = r.sum()
    best = None
    base = total * total / n
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, rs = X[order, j], r[order]
        csum = np.cumsum(rs)[:-1]
        nl = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        valid &= (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        nr = n - nl
        gain = csum ** 2 / nl + (total - csum) ** 2 / nr - base
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        g = float(gain[k])
        if g > 1e-12 * max(1.0, float(r @ r)) and (best is None or g > best[2]):
            best = (j, float((xs[k] + xs[k + 1]) / 2.0), g)
    return best


def grow_tree(X: np.ndarray, r: np.ndarray, max_depth: int, min_leaf: int = 1) -> Tree:
    feat, thr, left, right, val = [], [], [], [], []

    def build(idx: np.ndarray, depth: int) -> int:
        i = len(feat)
        feat.append(-1), thr.append(0.0), left.append(-1), right.append(-1), val.append(float(r[idx].mean()))
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            return i
        split = _best_split(X[idx], r[idx], min_leaf)
        if split is None:
            return i
        j, t, _ = split
        mask = X[idx, j] <= t
        feat[i], thr[i] = j, t
        left[i] = build(idx[mask], depth + 1)
        right[i] = build(idx[~mask], depth + 1)
        return i

    build(np.arange(len(r)), 0)
    return Tree(np.array(feat, dtype=np.int64), np.array(thr), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(val))


@dataclass(frozen=True)
class HealthIndexModel:
    feature_names: tuple[str, ...]
    mode: HIMode
    base_score: float
    learning_rate: float
    trees: tuple[Tree, ...] = ()
    levels: int = 5
    # set when training labels were constant
    constant: bool = False

    def raw(self, X: np.ndarray) -> np.ndarray:
        out = np.full(len(X), self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def finish(self, raw: np.ndarray) -> np.ndarray:
        if self.mode is HIMode.DISCRETE:
            return np.clip(np.floor(raw + 0.5), 1, self.levels)
        return np.clip(raw, HI_MIN, HI_MAX)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return self.finish(self.raw(np.asarray(X, dtype=float)))

    @property
    def used_features(self) -> set[str]:
        return {self.feature_names[f] for t in self.trees for f in t.feature if f >= 0}

    def features(self, record: Mapping[str, float]) -> np.ndarray:
        needed = self.used_features
        missing = sorted(n for n in needed if n not in record)
        if missing:
            raise HealthIndexError(f"record lacks attribute(s) used by the model: {', '.join(missing)}")
        return np.array([float(record[n]) if n in record else math.nan for n in self.feature_names])

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names), "mode": self.mode.value, "levels": self.levels,
                "base_score": self.base_score, "learning_rate": self.learning_rate, "constant": self.constant,
                "trees": [t.to_dict(self.feature_names) for t in self.trees]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "HealthIndexModel":
        names = tuple(d["feature_names"])
        return cls(names, HIMode(d["mode"]), float(d["base_score"]), float(d["learning_rate"]),
                   tuple(Tree.from_dict(t, names) for t in d["trees"]), int(d.get("levels", 5)),
                   bool(d.get("constant", False)))


def train(X: np.ndarray, y: Sequence[float], feature_names: Sequence[str], config: BoostConfig = BoostConfig()
          ) -> HealthIndexModel:
    """Fit ``config.n_trees`` trees to ``(X, y)``; deterministic for fixed inputs."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or X.shape[1] != len(feature_names):
        raise HealthIndexError("X must be (n_records, n_features) matching y and feature_names")
    if len(y) < 10:
        raise HealthIndexError(f"need at least 10 labelled records, got {len(y)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise HealthIndexError("features and labels must be finite numbers")
    if config.mode is HIMode.DISCRETE and (np.any(y != np.round(y)) or y.min() < 1 or y.max() > config.levels):
        raise HealthIndexError(f"discrete labels must be integer levels in [1, {config.levels}]")

    base = float(y.mean())
    if np.ptp(y) == 0.0:
        return HealthIndexModel(tuple(feature_names), config.mode, float(y[0]), config.learning_rate,
                                (), config.levels, constant=True)
    pred = np.full(len(y), base)
    trees = []
    for _ in range(config.n_trees):
        tree = grow_tree(X, y - pred, config.max_depth, config.min_samples_leaf)
        trees.append(tree)
        pred = pred + config.learning_rate * tree.predict(X)
    return HealthIndexModel(tuple(feature_names), config.mode, base, config.learning_rate, tuple(trees),
                            config.levels)


def predict_hi(model: HealthIndexModel, record: Mapping[str, float]) -> float:
    """HI for one record of numeric condition values (ratings already converted)."""
    return float(model.predict_matrix(model.features(record)[None, :])[0])


def predict_many(model: HealthIndexModel, records: Sequence[Mapping[str, float]]) -> np.ndarray:
    if not records:
        return np.empty(0)
    return model.predict_matrix(np.vstack([model.features(r) for r in records]))
