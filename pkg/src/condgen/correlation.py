"""Second-degree polynomial models linking a condition to the previous inspection.

A model for target ``C1`` with regressors ``x = (C1, C2, ...)`` taken from
the previous inspection predicts::

    C1_t = beta0 + sum_j beta_j * x_j + sum_j beta'_j * x_j**2

There are no cross terms ``x_i * x_j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


class CorrelationConfigError(ValueError):
    pass


class MissingValueError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing value"


@dataclass(frozen=True)
class CorrelationModel:
    target: str
    regressors: tuple[str, ...]
    beta0: float
    beta_linear: tuple[float, ...]
    beta_quadratic: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "beta_linear", tuple(float(v) for v in self.beta_linear))
        object.__setattr__(self, "beta_quadratic", tuple(float(v) for v in self.beta_quadratic))
        object.__setattr__(self, "beta0", float(self.beta0))
        k = len(self.regressors)
        if len(self.beta_linear) != k or len(self.beta_quadratic) != k:
            raise CorrelationConfigError("coefficient vectors must match the regressor count")
        if self.target not in self.regressors:
            raise CorrelationConfigError(f"regressors must include the target {self.target!r}")
        if len(set(self.regressors)) != k:
            raise CorrelationConfigError("duplicate regressors")

    @property
    def coefficients(self) -> np.ndarray:
        """``[beta0, beta_1..beta_k, beta'_1..beta'_k]``, the design-matrix column order."""
        return np.array([self.beta0, *self.beta_linear, *self.beta_quadratic])

    def to_dict(self) -> dict:
        return {"target": self.target, "regressors": list(self.regressors), "beta0": self.beta0,
                "beta_linear": list(self.beta_linear), "beta_quadratic": list(self.beta_quadratic)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CorrelationModel":
        return cls(d["target"], tuple(d["regressors"]), d["beta0"],
                   tuple(d["beta_linear"]), tuple(d["beta_quadratic"]))


@dataclass(frozen=True)
class CorrelationDiagnostics:
    rss: float
    n_pairs: int
    rank: int
    n_coefficients: int

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.n_coefficients

    def to_dict(self) -> dict:
        return {"rss": self.rss, "n_pairs": self.n_pairs, "rank": self.rank,
                "n_coefficients": self.n_coefficients, "rank_deficient": self.rank_deficient}


def _regressor_vector(regressors: Sequence[str], previous: Mapping[str, float]) -> np.ndarray:
    try:
        return np.array([float(previous[r]) for r in regressors])
    except KeyError as exc:
        raise MissingValueError(f"previous record lacks regressor {exc.args[0]!r}") from None


def design_matrix(x: np.ndarray) -> np.ndarray:
    """Rows ``[1, x_1..x_k, x_1^2..x_k^2]`` for an ``(n, k)`` regressor array."""
    x = np.atleast_2d(x)
    return np.hstack([np.ones((x.shape[0], 1)), x, x * x])


def predict(model: CorrelationModel, previous: Mapping[str, float]) -> float:
    x = _regressor_vector(model.regressors, previous)
    return float(design_matrix(x[None, :])[0] @ model.coefficients)


def predict_many(model: CorrelationModel, x: np.ndarray) -> np.ndarray:
    """Vectorised ``predict`` over an ``(n, k)`` array in regressor order."""
    return design_matrix(np.asarray(x, dtype=float)) @ model.coefficients


def fit(target: str, regressors: Sequence[str],
        pairs: Iterable[tuple[Mapping[str, float], Mapping[str, float]]],
        *, strict: bool = False) -> tuple[CorrelationModel, CorrelationDiagnostics]:
    """Ordinary least squares on ``(previous, current)`` value mappings.

    Pairs missing the target (current side) or any regressor (previous side)
    are skipped. Rank-deficient designs get the minimum-norm solution and a
    warning; with ``strict=True`` they raise instead.
    """
    regressors = tuple(regressors)
    if target not in regressors:
        raise CorrelationConfigError(f"regressors must include the target {target!r}")
    xs, ys = [], []
    for prev, cur in pairs:
        if target not in cur or any(r not in prev for r in regressors):
            continue
        xs.append([float(prev[r]) for r in regressors])
        ys.append(float(cur[target]))
    n_coef = 2 * len(regressors) + 1
    if len(ys) < n_coef:
        raise CorrelationConfigError(
            f"correlation model for {target!r} needs at least {n_coef} complete pairs, got {len(ys)}")

    X = design_matrix(np.asarray(xs))
    y = np.asarray(ys)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < n_coef:
        msg = (f"design matrix for {target!r} is rank deficient ({rank} < {n_coef}); "
               f"consider removing one of the regressors {list(regressors)}")
        if strict:
            raise CorrelationConfigError(msg)
        warnings.warn(msg + "; using the minimum-norm solution", stacklevel=2)
    k = len(regressors)
    model = CorrelationModel(target, regressors, coef[0], tuple(coef[1:k + 1]), tuple(coef[k + 1:]))
    r = y - X @ coef
    return model, CorrelationDiagnostics(float(r @ r), len(y), int(rank), n_coef)


def predict_joint(models: Sequence[CorrelationModel], previous: Mapping[str, float]) -> dict[str, float]:
    """Evaluate one model per target on the same previous record."""
    targets = [m.target for m in models]
    dupes = sorted({t for t in targets if targets.count(t) > 1})
    if dupes:
        raise CorrelationConfigError(f"more than one model for target(s) {dupes}")
    return {m.target: predict(m, previous) for m in models}
