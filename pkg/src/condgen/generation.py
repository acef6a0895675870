"""Synthetic condition generation: one inspection ahead, rolled out, or from scratch."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .combination import CombinedModel, ConditionModelSpec, estimate, evaluate_combined
from .conversion import numeric_to_rating
from .data_model import (ConditionAttribute, DirectionTransform, InspectionDataset, InspectionRecord,
                         normalize_direction, numeric_values)
from .stochastic import CategoricalAgeModel, SigmaTable, diversify, estimate_sigma, fit_categorical, \
    sample_categorical


class GenerationConfigError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


class Mode(str, Enum):
    FULL = "full"
    AGE_ONLY = "age_only"


@dataclass(frozen=True)
class GenerationPlan:
    start_year: int
    steps: int = 1
    interval: int = 1
    mode: Mode = Mode.FULL
    master_seed: int = 0
    # False draws no noise and emits the model expectation
    stochastic: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.steps < 1 or self.interval < 1:
            raise GenerationConfigError("steps and interval must be positive")

    def to_dict(self) -> dict:
        return {"start_year": self.start_year, "steps": self.steps, "interval": self.interval,
                "mode": self.mode.value, "master_seed": self.master_seed, "stochastic": self.stochastic}


@dataclass(frozen=True)
class AttributeModel:
    """How one attribute is generated.

    ``method`` is ``"combined"`` (numerical, or ratings via convert and
    convert back) or ``"categorical"`` (ratings sampled per age).
    """

    name: str
    method: str = "combined"
    model: CombinedModel | None = None
    sigma: SigmaTable | None = None
    age_only_model: CombinedModel | None = None
    age_only_sigma: SigmaTable | None = None
    categorical: CategoricalAgeModel | None = None

    def for_mode(self, mode: Mode) -> tuple[CombinedModel, SigmaTable]:
        if mode is Mode.AGE_ONLY:
            model = self.age_only_model
            if model is None and self.model is not None and not self.model.needs_previous:
                model = self.model
            sigma = self.age_only_sigma or self.sigma
        else:
            model, sigma = self.model, self.sigma
        if model is None:
            raise GenerationConfigError(f"no {mode.value} model for attribute {self.name!r}")
        return model, sigma or SigmaTable()

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "method": self.method}
        for key in ("model", "sigma", "age_only_model", "age_only_sigma", "categorical"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeModel":
        def opt(key, typ):
            return typ.from_dict(d[key]) if key in d else None

        return cls(d["name"], d.get("method", "combined"), opt("model", CombinedModel), opt("sigma", SigmaTable),
                   opt("age_only_model", CombinedModel), opt("age_only_sigma", SigmaTable),
                   opt("categorical", CategoricalAgeModel))


@dataclass(frozen=True)
class ModelSet:
    schema: tuple[ConditionAttribute, ...]
    attributes: Mapping[str, AttributeModel]
    transform: DirectionTransform = field(default_factory=DirectionTransform)

    def check_covers(self, schema: Sequence[ConditionAttribute]) -> None:
        missing = [a.name for a in schema if a.name not in self.attributes]
        if missing:
            raise GenerationConfigError(f"no model for attribute(s): {', '.join(missing)}")

    def to_model_space(self, dataset: InspectionDataset) -> InspectionDataset:
        return self.transform.apply(dataset)

    def to_data_space(self, dataset: InspectionDataset) -> InspectionDataset:
        return self.transform.invert(dataset)

    def to_dict(self) -> dict:
        return {
            "schema": [a.to_dict() for a in self.schema],
            "transform": self.transform.to_dict(),
            "attributes": [self.attributes[a.name].to_dict() for a in self.schema if a.name in self.attributes],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSet":
        schema = tuple(ConditionAttribute.from_dict(a) for a in d["schema"])
        attrs = {a["name"]: AttributeModel.from_dict(a) for a in d["attributes"]}
        return cls(schema, attrs, DirectionTransform.from_dict(d.get("transform")))


def fit_model_set(training: InspectionDataset, specs: Sequence[ConditionModelSpec], *,
                  nonnegative: bool = False, fallback_fraction: float = 0.05, max_gap: int = 1,
                  fixed_sigma: float | None = None, neighbor_window: int = 2,
                  normalize: bool = True) -> tuple[ModelSet, dict[str, dict]]:
    """Estimate every attribute's generator from raw (data-space) training records.

    ``fixed_sigma`` replaces the estimated per-age spreads with one constant.
    """
    known = training.attributes
    problems = []
    for s in specs:
        problems.extend(f"{s.target}: unknown attribute {n!r}" for n in sorted(s.attributes) if n not in known)
    by_target = {s.target: s for s in specs}
    problems.extend(f"{a.name}: no model specification" for a in training.schema if a.name not in by_target)
    if problems:
        raise GenerationConfigError("; ".join(problems))

    if normalize:
        data, transform = normalize_direction(training)
    else:
        data, transform = training, DirectionTransform()

    def _sigma(data, model):
        table = estimate_sigma(data, model, fallback_fraction=fallback_fraction, max_gap=max_gap)
        return table if fixed_sigma is None else replace(table, fixed=float(fixed_sigma))

    attrs: dict[str, AttributeModel] = {}
    report: dict[str, dict] = {}
    for attr in training.schema:
        spec = by_target[attr.name]
        if attr.is_rating and spec.rating_method == "categorical":
            if spec.empirical:
                raise GenerationConfigError(f"{attr.name}: categorical attributes take no empirical curve terms")
            cat = fit_categorical(data, attr.name, neighbor_window=neighbor_window,
                                  empirical=spec.empirical_distribution)
            attrs[attr.name] = AttributeModel(attr.name, "categorical", categorical=cat)
            report[attr.name] = {"method": "categorical", "ages": len(cat.probabilities)}
            continue
        model, diag = estimate(spec, data, nonnegative=nonnegative)
        sigma = _sigma(data, model)
        entry = {"method": "combined", "full": diag.to_dict()}
        age_model = age_sigma = None
        if model.needs_previous:
            age_model, adiag = estimate(spec, data, age_only=True, nonnegative=nonnegative)
            age_sigma = _sigma(data, age_model)
            entry["age_only"] = adiag.to_dict()
        attrs[attr.name] = AttributeModel(attr.name, "combined", model, sigma, age_model, age_sigma)
        report[attr.name] = entry
    return ModelSet(tuple(training.schema), attrs, transform), report


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def _asset_key(asset_id: str) -> int:
    return int.from_bytes(hashlib.sha256(asset_id.encode("utf-8")).digest()[:8], "little")


def asset_rng(master_seed: int, step: int, asset_id: str) -> np.random.Generator:
    """Independent stream per (seed, step, asset), stable under any iteration order."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(step), _asset_key(asset_id)]))


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _draw_values(models: ModelSet, schema, age: float, previous: Mapping[str, float] | None,
                 mode: Mode, stochastic: bool, rng: np.random.Generator) -> dict[str, float | int]:
    values: dict[str, float | int] = {}
    for attr in schema:
        am = models.attributes[attr.name]
        if am.method == "categorical":
            if stochastic:
                values[attr.name] = sample_categorical(am.categorical, age, rng)
            else:
                values[attr.name] = int(np.argmax(am.categorical.resolve(age))) + 1
            continue
        model, sigma = am.for_mode(mode)
        expected = evaluate_combined(model, age, previous)
        x = expected
        if stochastic:
            x = diversify(expected, sigma.lookup(age, expected), rng,
                          nonnegative=attr.nonnegative and not attr.is_rating)
        values[attr.name] = numeric_to_rating(x, attr.rating_levels) if attr.is_rating else x
    return values


def _generate_asset(models: ModelSet, schema, rec: InspectionRecord, plan: GenerationPlan, step: int
                    ) -> InspectionRecord:
    attrs = {a.name: a for a in schema}
    new_age = rec.age_years + plan.interval
    previous = numeric_values(rec, attrs) if plan.mode is Mode.FULL else None
    rng = asset_rng(plan.master_seed, step, rec.asset_id)
    try:
        values = _draw_values(models, schema, new_age, previous, plan.mode, plan.stochastic, rng)
    except Exception as exc:
        raise GenerationError(f"asset {rec.asset_id}: {exc}") from exc
    return InspectionRecord(rec.asset_id, rec.inspection_year + plan.interval, new_age, values)


def _map(fn: Callable, items: Sequence, threads: int):
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def generate_step(models: ModelSet, current: InspectionDataset, plan: GenerationPlan, *, step: int = 1,
                  threads: int = 1) -> InspectionDataset:
    """Advance every asset by one inspection interval.

    ``current`` and the result are in model space (see ``ModelSet.to_model_space``).
    """
    models.check_covers(current.schema)
    recs = _map(lambda r: _generate_asset(models, current.schema, r, plan, step), list(current.records), threads)
    return InspectionDataset(current.schema, tuple(recs), plan.interval)


def generate_sequence(models: ModelSet, seed_dataset: InspectionDataset, plan: GenerationPlan, *,
                      threads: int = 1) -> list[InspectionDataset]:
    """``plan.steps`` successive inspections, each built from the one before."""
    if plan.mode is Mode.FULL and len(seed_dataset) and not any(r.values for r in seed_dataset.records):
        raise GenerationConfigError("full mode needs previous-inspection condition values")
    current = seed_dataset.latest() if seed_dataset.records else seed_dataset
    out = []
    for step in range(1, plan.steps + 1):
        try:
            current = generate_step(models, current, plan, step=step, threads=threads)
        except GenerationError as exc:
            raise GenerationError(f"step {step}: {exc}") from exc
        out.append(current)
    return out


AgeSampler = Callable[[np.random.Generator, int], np.ndarray]


def uniform_ages(low: float, high: float, *, integer: bool = True) -> AgeSampler:
    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        if integer:
            return rng.integers(int(low), int(high), endpoint=True, size=n).astype(float)
        return rng.uniform(low, high, size=n)
    return sample


def fixed_age(age: float) -> AgeSampler:
    return lambda rng, n: np.full(n, float(age))


def age_sampler_from_dict(d: Mapping) -> AgeSampler:
    kind = d.get("kind", "uniform")
    if kind == "uniform":
        return uniform_ages(d["low"], d["high"], integer=d.get("integer", True))
    if kind == "fixed":
        return fixed_age(d["age"])
    raise GenerationConfigError(f"unknown age distribution {kind!r}")


def generate_hypothetical(schema: Sequence[ConditionAttribute], models: ModelSet, asset_count: int,
                          initial_ages: AgeSampler, plan: GenerationPlan, *, interval: int | None = None,
                          threads: int = 1) -> list[InspectionDataset]:
    """Build a cohort from nothing, then roll it forward.

    Returns ``plan.steps + 1`` datasets: the initial cohort (ages drawn from
    ``initial_ages``, conditions from the age-driven models) and every
    generated inspection after it.
    """
    schema = tuple(schema)
    models.check_covers(schema)
    interval = interval or plan.interval
    if asset_count == 0:
        empty = InspectionDataset(schema, (), interval)
        return [empty] * (plan.steps + 1)
    rng = np.random.default_rng(np.random.SeedSequence([int(plan.master_seed) & (2**64 - 1), 0]))
    ages = np.asarray(initial_ages(rng, asset_count), dtype=float)
    width = len(str(asset_count - 1))
    ids = [f"H{i:0{width}d}" for i in range(asset_count)]

    def one(i):
        # step 0: the age-driven models evaluated at the drawn ages themselves
        r = asset_rng(plan.master_seed, 0, ids[i])
        try:
            values = _draw_values(models, schema, float(ages[i]), None, Mode.AGE_ONLY, plan.stochastic, r)
        except Exception as exc:
            raise GenerationError(f"asset {ids[i]}: {exc}") from exc
        return InspectionRecord(ids[i], plan.start_year, float(ages[i]), values)

    initial = InspectionDataset(schema, tuple(_map(one, range(asset_count), threads)), interval)
    return [initial, *generate_sequence(models, initial, plan, threads=threads)]
