"""Age-driven degradation curves and their least-squares fits.

Four families are supported::

    linear       C(t) = a*t + b
    exponential  C(t) = b*exp(a*t)
    logarithmic  C(t) = a*ln(t) + b
    power        C(t) = b*t**a

Exponential and power fits start from ordinary least squares on ``ln C``
and are then polished with a few Gauss-Newton steps on the squared error
in the original scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

# logarithmic curves (and power curves with a < 0) are defined from this age on
LOG_T_MIN = 1.0


class Family(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    LOGARITHMIC = "logarithmic"
    POWER = "power"


class DomainError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class DegradationModel:
    family: Family
    a: float
    b: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def t_min(self) -> float:
        if self.family is Family.LOGARITHMIC or (self.family is Family.POWER and self.a < 0):
            return LOG_T_MIN
        return 0.0

    def __call__(self, t):
        return evaluate(self, t)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d) -> "DegradationModel":
        return cls(Family(d["family"]), d["a"], d["b"])


@dataclass(frozen=True)
class FitDiagnostics:
    rss: float
    n_samples: int
    degenerate: bool = False
    gauss_newton_steps: int = 0

    def to_dict(self) -> dict:
        return {"rss": self.rss, "n_samples": self.n_samples,
                "degenerate": self.degenerate, "gauss_newton_steps": self.gauss_newton_steps}


def _curve(family: Family, a: float, b: float, t: np.ndarray) -> np.ndarray:
    if family is Family.LINEAR:
        return a * t + b
    if family is Family.EXPONENTIAL:
        return b * np.exp(a * t)
    if family is Family.LOGARITHMIC:
        return a * np.log(t) + b
    if a == 0.0:
        return np.full_like(t, b)
    return b * np.power(t, a)


def evaluate(model: DegradationModel, t):
    """Condition value at age ``t`` (scalar or array).

    Raises DomainError for ages below the family's lower bound.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < model.t_min):
        raise DomainError(f"{model.family.value} model is defined for t >= {model.t_min:g}, got {t!r}")
    out = _curve(model.family, model.a, model.b, arr)
    return float(out) if out.ndim == 0 else out


def _ols_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Slope and intercept of the ordinary least-squares line."""
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    slope = float(dx @ (y - ym)) / sxx
    return slope, float(ym - slope * xm)


def _jacobian(family: Family, a: float, b: float, t: np.ndarray) -> np.ndarray:
    if family is Family.EXPONENTIAL:
        e = np.exp(a * t)
        return np.column_stack([b * t * e, e])
    # power
    with np.errstate(divide="ignore"):
        lt = np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), 0.0)
    p = np.power(t, a)
    return np.column_stack([b * lt * p, p])


def _gauss_newton(family: Family, a: float, b: float, t: np.ndarray, y: np.ndarray,
                  max_steps: int) -> tuple[float, float, int]:
    def sse(a_, b_):
        r = y - _curve(family, a_, b_, t)
        return float(r @ r)

    cur = sse(a, b)
    taken = 0
    for _ in range(max_steps):
        r = y - _curve(family, a, b, t)
        J = _jacobian(family, a, b, t)
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        # halve until the objective improves
        lam = 1.0
        while lam > 1e-6:
            na, nb = a + lam * step[0], b + lam * step[1]
            with np.errstate(over="ignore", invalid="ignore"):
                new = sse(na, nb)
            if math.isfinite(new) and new < cur:
                break
            lam *= 0.5
        else:
            break
        rel = abs(cur - new) / max(cur, 1e-300)
        a, b, cur = na, nb, new
        taken += 1
        if rel < 1e-15:
            break
    return a, b, taken


def fit(family: Family | str, samples: Iterable[Sequence[float]], *, refine: bool = True,
        max_gauss_newton_steps: int = 50) -> tuple[DegradationModel, FitDiagnostics]:
    """Least-squares fit of one family to ``(age, value)`` samples."""
    family = Family(family)
    data = np.asarray([(float(t), float(c)) for t, c in samples], dtype=float).reshape(-1, 2)
    t, y = data[:, 0], data[:, 1]
    if len(np.unique(t)) < 2:
        raise InsufficientDataError(f"need at least 2 distinct ages, got {len(np.unique(t))}")
    if not np.all(np.isfinite(data)):
        raise DomainError("samples contain non-finite ages or values")
    if np.any(t < 0):
        raise DomainError(f"negative ages at sample indices {np.flatnonzero(t < 0).tolist()}")

    if family in (Family.LOGARITHMIC, Family.POWER):
        bad = np.flatnonzero(t < LOG_T_MIN) if family is Family.LOGARITHMIC else np.flatnonzero(t <= 0)
        if bad.size:
            raise DomainError(f"{family.value} fit needs ages in its domain; offending samples {bad.tolist()}")

    if np.ptp(y) == 0.0:
        model = DegradationModel(family, 0.0, float(y[0]))
        return model, FitDiagnostics(0.0, len(y), degenerate=True)

    if family in (Family.EXPONENTIAL, Family.POWER):
        bad = np.flatnonzero(y <= 0)
        if bad.size:
            raise DomainError(f"{family.value} fit runs in log space; non-positive values at samples {bad.tolist()}")

    steps = 0
    if family is Family.LINEAR:
        a, b = _ols_line(t, y)
    elif family is Family.LOGARITHMIC:
        a, b = _ols_line(np.log(t), y)
    else:
        x = t if family is Family.EXPONENTIAL else np.log(t)
        a, lnb = _ols_line(x, np.log(y))
        b = math.exp(lnb)
        if refine:
            a, b, steps = _gauss_newton(family, a, b, t, y, max_gauss_newton_steps)

    r = y - _curve(family, a, b, t)
    return DegradationModel(family, a, b), FitDiagnostics(float(r @ r), len(y), gauss_newton_steps=steps)
