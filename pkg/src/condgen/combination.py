"""Weighted combination of degradation, correlation and empirical models.

One combined predictor per condition attribute::

    C = sum_n w_n * degradation_n(age) + sum_m w_m * correlation_m(previous) + sum_e w_e * empirical_e

Estimation runs in two steps. Each unlocked sub-model is fitted on its own,
then the free weights are solved by least squares over the sub-model outputs
while fixed weights stay where the user put them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.optimize import nnls

from . import correlation, degradation
from .correlation import CorrelationModel
from .data_model import InspectionDataset
from .degradation import DegradationModel, DomainError, Family


class ModelSpecError(ValueError):
    pass


SubModel = Union[DegradationModel, CorrelationModel]


@dataclass(frozen=True)
class EmpiricalModel:
    """Expert-supplied curve or correlation; never refitted while ``locked``."""

    description: str
    form: SubModel
    locked: bool = True

    def to_dict(self) -> dict:
        key = "degradation" if isinstance(self.form, DegradationModel) else "correlation"
        return {"description": self.description, key: self.form.to_dict(), "locked": self.locked}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EmpiricalModel":
        if "correlation" in d:
            form: SubModel = CorrelationModel.from_dict(d["correlation"])
        elif "degradation" in d:
            form = DegradationModel.from_dict(d["degradation"])
        else:
            form = DegradationModel.from_dict(d)
        return cls(d.get("description", ""), form, bool(d.get("locked", True)))


@dataclass(frozen=True)
class Term:
    model: SubModel | EmpiricalModel
    weight: float = 1.0
    fixed: bool = False

    @property
    def submodel(self) -> SubModel:
        return self.model.form if isinstance(self.model, EmpiricalModel) else self.model

    @property
    def needs_previous(self) -> bool:
        return isinstance(self.submodel, CorrelationModel)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "weight": self.weight, "fixed": self.fixed}


@dataclass(frozen=True)
class CombinedModel:
    target: str
    degradation_terms: tuple[Term, ...] = ()
    correlation_terms: tuple[Term, ...] = ()
    empirical_terms: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        for name in ("degradation_terms", "correlation_terms", "empirical_terms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.terms:
            raise ModelSpecError(f"combined model for {self.target!r} has no terms")
        for t in self.terms:
            if not np.isfinite(t.weight):
                raise ModelSpecError(f"non-finite weight in model for {self.target!r}")

    @property
    def terms(self) -> tuple[Term, ...]:
        return self.degradation_terms + self.correlation_terms + self.empirical_terms

    @property
    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.terms])

    @property
    def needs_previous(self) -> bool:
        return any(t.needs_previous and t.weight != 0.0 for t in self.terms)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "degradation_terms": [t.to_dict() for t in self.degradation_terms],
            "correlation_terms": [t.to_dict() for t in self.correlation_terms],
            "empirical_terms": [t.to_dict() for t in self.empirical_terms],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CombinedModel":
        def term(td, kind):
            m = td["model"]
            if kind == "degradation":
                model = DegradationModel.from_dict(m)
            elif kind == "correlation":
                model = CorrelationModel.from_dict(m)
            else:
                model = EmpiricalModel.from_dict(m)
            return Term(model, float(td["weight"]), bool(td.get("fixed", False)))

        return cls(
            d["target"],
            tuple(term(t, "degradation") for t in d.get("degradation_terms", [])),
            tuple(term(t, "correlation") for t in d.get("correlation_terms", [])),
            tuple(term(t, "empirical") for t in d.get("empirical_terms", [])),
        )


def _term_value(term: Term, age: float, previous: Mapping[str, float] | None) -> float:
    sub = term.submodel
    if isinstance(sub, DegradationModel):
        return degradation.evaluate(sub, age)
    if previous is None:
        raise ModelSpecError("correlation term with non-zero weight needs the previous inspection record")
    return correlation.predict(sub, previous)


def evaluate_combined(model: CombinedModel, age: float, previous: Mapping[str, float] | None = None) -> float:
    total = 0.0
    for term in model.terms:
        if term.weight == 0.0:
            continue
        total += term.weight * _term_value(term, age, previous)
    return total


# ---------------------------------------------------------------------------
# specification + estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermSpec:
    """One requested term. ``weight=None`` means estimate it."""

    family: Family | None = None
    regressors: tuple[str, ...] = ()
    empirical: EmpiricalModel | None = None
    weight: float | None = None


@dataclass(frozen=True)
class ConditionModelSpec:
    target: str
    degradation: tuple[TermSpec, ...] = ()
    correlation: tuple[TermSpec, ...] = ()
    empirical: tuple[TermSpec, ...] = ()
    # rating attributes only: "categorical" or "convert"
    rating_method: str = "categorical"
    empirical_distribution: tuple[float, ...] | None = None

    @property
    def attributes(self) -> set[str]:
        names = {self.target}
        for t in self.correlation:
            names.update(t.regressors)
        for t in self.empirical:
            if isinstance(t.empirical.form, CorrelationModel):
                names.update(t.empirical.form.regressors)
        return names

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConditionModelSpec":
        target = d["target"]

        def deg(item):
            if isinstance(item, str):
                return TermSpec(family=Family(item))
            return TermSpec(family=Family(item["family"]), weight=item.get("weight"))

        def cor(item):
            if isinstance(item, (list, tuple)):
                regs = tuple(item)
                weight = None
            else:
                regs, weight = tuple(item["regressors"]), item.get("weight")
            if target not in regs:
                regs = (target, *regs)
            return TermSpec(regressors=regs, weight=weight)

        def emp(item):
            return TermSpec(empirical=EmpiricalModel.from_dict(item), weight=item.get("weight"))

        method = d.get("rating_method", "categorical")
        dist = d.get("empirical_distribution")
        if method not in ("categorical", "convert"):
            raise ModelSpecError(f"{target}: rating_method must be 'categorical' or 'convert'")
        return cls(target,
                   tuple(deg(x) for x in d.get("families", d.get("degradation", []))),
                   tuple(cor(x) for x in d.get("correlations", d.get("correlation", []))),
                   tuple(emp(x) for x in d.get("empirical", [])),
                   method, tuple(dist) if dist is not None else None)


def load_model_specs(doc: Mapping) -> list[ConditionModelSpec]:
    return [ConditionModelSpec.from_dict(c) for c in doc["conditions"]]


@dataclass
class EstimateDiagnostics:
    rows: int = 0
    rss: float = 0.0
    rank: int = 0
    collinear: bool = False
    age_only: bool = False
    submodels: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def rmse(self) -> float:
        return float(np.sqrt(self.rss / self.rows)) if self.rows else float("nan")

    def to_dict(self) -> dict:
        return {"rows": self.rows, "rss": self.rss, "rmse": self.rmse, "rank": self.rank,
                "collinear": self.collinear, "age_only": self.age_only,
                "submodels": self.submodels, "notes": self.notes}


def _degradation_samples(family: Family, training: InspectionDataset, target: str) -> list[tuple[float, float]]:
    out = []
    for rec in training.records:
        if target not in rec.values:
            continue
        t = rec.age_years
        if family is Family.LOGARITHMIC and t < degradation.LOG_T_MIN:
            continue
        if family is Family.POWER and t <= 0:
            continue
        out.append((t, training.numeric(rec)[target]))
    return out


def _numeric_pairs(training: InspectionDataset) -> list[tuple[dict, dict, float]]:
    return [(training.numeric(p), training.numeric(c), c.age_years) for p, c in training.pairs()]


def training_rows(model: CombinedModel, training: InspectionDataset, *, use_previous: bool
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub-model output matrix, targets and ages on the rows a model can be scored on.

    With ``use_previous`` the rows are consecutive-inspection pairs, otherwise
    every record holding the target. Rows outside a sub-model's domain or
    missing a regressor are skipped.
    """
    target = model.target
    if use_previous:
        rows = [(p, c, a) for p, c, a in _numeric_pairs(training) if target in c]
    else:
        rows = [(None, v, r.age_years) for r in training.records
                if target in (v := training.numeric(r))]
    n, k = len(rows), len(model.terms)
    ages = np.array([r[2] for r in rows], dtype=float)
    y = np.array([r[1][target] for r in rows], dtype=float)
    F = np.zeros((n, k))
    ok = np.ones(n, dtype=bool)
    for j, term in enumerate(model.terms):
        sub = term.submodel
        if isinstance(sub, DegradationModel):
            valid = ages >= sub.t_min
            F[valid, j] = degradation.evaluate(sub, ages[valid]) if valid.any() else 0.0
        elif use_previous:
            X = np.array([[p.get(name, np.nan) for name in sub.regressors] for p, _, _ in rows],
                         dtype=float).reshape(n, -1)
            valid = ~np.isnan(X).any(axis=1)
            F[valid, j] = correlation.predict_many(sub, X[valid])
        else:
            continue
        ok &= valid
    return F[ok], y[ok], ages[ok]


def _fit_submodel(sub: SubModel, training: InspectionDataset, target: str, pairs) -> tuple[SubModel, dict]:
    if isinstance(sub, DegradationModel):
        m, diag = degradation.fit(sub.family, _degradation_samples(sub.family, training, target))
        return m, {"kind": "degradation", **m.to_dict(), **diag.to_dict()}
    m, diag = correlation.fit(sub.target, sub.regressors, [(p, c) for p, c, _ in pairs])
    return m, {"kind": "correlation", **m.to_dict(), **diag.to_dict()}


def estimate(spec: ConditionModelSpec, training: InspectionDataset, *, age_only: bool = False,
             nonnegative: bool = False) -> tuple[CombinedModel, EstimateDiagnostics]:
    """Fit every unlocked sub-model, then solve the free weights.

    With ``age_only`` (or when the data holds no consecutive inspections)
    correlation terms are left out, the same as fixing their weights at zero.
    """
    diag = EstimateDiagnostics(age_only=age_only)
    target = spec.target
    training.attribute(target)
    pairs = _numeric_pairs(training)

    correlation_specs = spec.correlation
    empirical_specs = list(spec.empirical)
    if (correlation_specs or any(isinstance(t.empirical.form, CorrelationModel) for t in empirical_specs)) \
            and (age_only or not pairs):
        if not age_only:
            diag.notes.append("no consecutive inspections in training data; correlation weights fixed at 0")
        diag.age_only = True
        correlation_specs = ()
        empirical_specs = [t for t in empirical_specs if not isinstance(t.empirical.form, CorrelationModel)]

    deg_terms, cor_terms, emp_terms = [], [], []
    for ts in spec.degradation:
        m, d = _fit_submodel(DegradationModel(ts.family, 0.0, 0.0), training, target, pairs)
        diag.submodels.append(d)
        deg_terms.append(Term(m, 0.0 if ts.weight is None else float(ts.weight), ts.weight is not None))
    for ts in correlation_specs:
        placeholder = CorrelationModel(target, ts.regressors, 0.0, (0.0,) * len(ts.regressors),
                                       (0.0,) * len(ts.regressors))
        m, d = _fit_submodel(placeholder, training, target, pairs)
        diag.submodels.append(d)
        cor_terms.append(Term(m, 0.0 if ts.weight is None else float(ts.weight), ts.weight is not None))
    for ts in empirical_specs:
        emp = ts.empirical
        if not emp.locked:
            m, d = _fit_submodel(emp.form, training, target, pairs)
            diag.submodels.append({**d, "empirical": emp.description})
            emp = replace(emp, form=m)
        emp_terms.append(Term(emp, 0.0 if ts.weight is None else float(ts.weight), ts.weight is not None))

    model = CombinedModel(target, tuple(deg_terms), tuple(cor_terms), tuple(emp_terms))
    use_previous = any(t.needs_previous for t in model.terms)
    F, y, _ = training_rows(model, training, use_previous=use_previous)
    if len(y) == 0:
        raise ModelSpecError(f"no training rows usable for {target!r}")

    free = np.array([not t.fixed for t in model.terms])
    fixed_w = np.array([t.weight if t.fixed else 0.0 for t in model.terms])
    resid_target = y - F @ fixed_w
    weights = fixed_w.copy()
    if not free.any():
        warnings.warn(f"{target}: all weights fixed, nothing to estimate", stacklevel=2)
        diag.notes.append("all weights fixed")
        diag.rank = 0
    else:
        Ff = F[:, free]
        if nonnegative:
            w_free, _ = nnls(Ff, resid_target)
            rank = int(np.linalg.matrix_rank(Ff))
        else:
            w_free, _, rank, _ = np.linalg.lstsq(Ff, resid_target, rcond=None)
        weights[free] = w_free
        diag.rank = int(rank)
        if rank < int(free.sum()):
            diag.collinear = True
            diag.notes.append("sub-model outputs are collinear; minimum-norm weights used")

    terms = [replace(t, weight=float(w)) for t, w in zip(model.terms, weights)]
    nd, nc = len(deg_terms), len(cor_terms)
    model = CombinedModel(target, tuple(terms[:nd]), tuple(terms[nd:nd + nc]), tuple(terms[nd + nc:]))
    r = y - F @ weights
    diag.rows = len(y)
    diag.rss = float(r @ r)
    return model, diag
