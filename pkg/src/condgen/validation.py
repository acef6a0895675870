"""Hold-out validation of generated conditions (Tests I-IV)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .combination import ConditionModelSpec
from .data_model import InspectionDataset, InspectionRecord
from .generation import GenerationPlan, Mode, ModelSet, fit_model_set, generate_step
from .health_index import HealthIndexModel, HIMode, predict_many


class ValidationSetupError(ValueError):
    pass


def split_by_asset(dataset: InspectionDataset, n_train: int | None = None, *, train_fraction: float = 0.5,
                   seed: int = 0) -> tuple[InspectionDataset, InspectionDataset]:
    """Disjoint train/test datasets made of whole asset histories."""
    assets = sorted(dataset.by_asset())
    order = np.random.default_rng(np.random.SeedSequence([seed, 7])).permutation(len(assets))
    k = int(round(train_fraction * len(assets))) if n_train is None else int(n_train)
    if not 0 < k < len(assets):
        raise ValidationSetupError(f"cannot put {k} of {len(assets)} assets in the training split")
    train_ids = {assets[i] for i in order[:k]}
    train = [r for r in dataset.records if r.asset_id in train_ids]
    test = [r for r in dataset.records if r.asset_id not in train_ids]
    return dataset.with_records(train), dataset.with_records(test)


def subsample_assets(dataset: InspectionDataset, n: int, seed: int) -> InspectionDataset:
    assets = sorted(dataset.by_asset())
    if n > len(assets):
        raise ValidationSetupError(f"asked for {n} assets, only {len(assets)} available")
    pick = np.random.default_rng(np.random.SeedSequence([seed, 11])).choice(len(assets), n, replace=False)
    keep = {assets[i] for i in pick}
    return dataset.with_records(r for r in dataset.records if r.asset_id in keep)


@dataclass
class OneStep:
    """Actual and generated values for every test pair, both in data space."""

    actual: InspectionDataset
    generated: InspectionDataset
    expected: InspectionDataset


def one_step(models: ModelSet, test: InspectionDataset, mode: Mode, seed: int) -> OneStep:
    pairs = test.pairs()
    if not pairs:
        raise ValidationSetupError("test data holds no consecutive inspections")
    prev = [p.replace(asset_id=f"{p.asset_id}@{p.inspection_year}") for p, _ in pairs]
    cur = [c.replace(asset_id=f"{c.asset_id}@{p.inspection_year}") for p, c in pairs]
    prev_ds = models.to_model_space(test.with_records(prev))
    out = {}
    for stochastic in (True, False):
        plan = GenerationPlan(0, 1, test.inspection_interval_years, mode, seed, stochastic)
        out[stochastic] = models.to_data_space(generate_step(models, prev_ds, plan))
    return OneStep(test.with_records(cur), out[True], out[False])


def _columns(ds: InspectionDataset, name: str) -> np.ndarray:
    return np.array([r.values[name] for r in ds.records], dtype=float)


def score(result: OneStep, *, bins: int = metrics.DEFAULT_BINS, seed: int = 0) -> list[dict]:
    """Table-style rows: condition, KL, benchmark KL, MAPE, R^2, CMP."""
    rows = []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    for attr in result.actual.schema:
        a = _columns(result.actual, attr.name)
        g = _columns(result.generated, attr.name)
        e = _columns(result.expected, attr.name)
        row: dict = {"condition": attr.name, "type": attr.kind.value, "n": int(len(a))}
        if attr.is_rating:
            n = attr.rating_levels
            bench = rng.integers(1, n + 1, len(a))
            row.update(kl=metrics.kl_divergence(a, g, levels=n),
                       benchmark_kl=metrics.kl_divergence(a, bench, levels=n), mape=None, mape_expected=None,
                       r2=None, cmp=metrics.cmp(a, g), cmp_expected=metrics.cmp(a, e))
        else:
            bench = metrics.benchmark_uniform(a.min(), a.max(), len(a), rng)
            row.update(kl=metrics.kl_divergence(a, g, bins), benchmark_kl=metrics.kl_divergence(a, bench, bins),
                       mape=metrics.mape(a, g), mape_expected=metrics.mape(a, e),
                       r2=metrics.r_squared(a, g) if np.ptp(a) > 0 else None, cmp=None, cmp_expected=None)
        rows.append(row)
    return rows


def test1(models: ModelSet, test: InspectionDataset, seed: int = 0, **kw) -> list[dict]:
    """Next-inspection generation from age and previous conditions."""
    return score(one_step(models, test, Mode.FULL, seed), seed=seed, **kw)


def test2(models: ModelSet, test: InspectionDataset, seed: int = 0, **kw) -> list[dict]:
    """The same comparison when only the asset age is known."""
    return score(one_step(models, test, Mode.AGE_ONLY, seed), seed=seed, **kw)


def test3(models: ModelSet, test: InspectionDataset, hi_model: HealthIndexModel, seed: int = 0) -> dict:
    """Health index from generated versus actual conditions."""
    res = one_step(models, test, Mode.FULL, seed)
    truth = predict_many(hi_model, [res.actual.numeric(r) for r in res.actual.records])
    gen = predict_many(hi_model, [res.generated.numeric(r) for r in res.generated.records])
    if hi_model.mode is HIMode.DISCRETE:
        return {"mode": "discrete", "n": int(len(truth)), "himp": metrics.himp(truth, gen), "mape": None}
    ok = truth != 0
    return {"mode": "continuous", "n": int(len(truth)), "himp": None, "mape": metrics.mape(truth[ok], gen[ok]),
            "excluded_zero_hi": int((~ok).sum())}


def test4(pool: InspectionDataset, test: InspectionDataset, specs: Sequence[ConditionModelSpec],
          sizes: Sequence[int], seeds: Sequence[int], *, expected: bool = True) -> dict:
    """Error against training-set size.

    For each seed and size a random subset of training assets is fitted and
    scored on ``test``. ``expected`` scores the noise-free model output.
    """
    key = "mape_expected" if expected else "mape"
    per_seed: dict[int, dict[int, dict[str, float]]] = {}
    for seed in seeds:
        per_seed[seed] = {}
        for size in sizes:
            train = subsample_assets(pool, size, seed)
            models, _ = fit_model_set(train, specs)
            rows = score(one_step(models, test, Mode.FULL, seed), seed=seed)
            per_seed[seed][size] = {r["condition"]: r[key] for r in rows if r[key] is not None}
    conditions = sorted(next(iter(next(iter(per_seed.values())).values())))
    series = []
    for size in sizes:
        vals = np.array([[per_seed[s][size][c] for c in conditions] for s in seeds])
        series.append({"size": int(size), "mean_mape": float(vals.mean()),
                       **{c: float(vals[:, i].mean()) for i, c in enumerate(conditions)}})
    return {"metric": key, "conditions": conditions, "series": series}
