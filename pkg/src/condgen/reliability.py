"""Health-index trajectories, yearly sequential Monte Carlo of failures, and ownership cost.

Yearly loop for every Monte Carlo iteration::

    1. replace the X lowest-HI assets proactively (PRC); they restart as new
    2. every other asset fails with the probability of its HI band;
       each failure costs lost energy (FC) plus a reactive replacement (RRC)
       and the asset restarts as new
    3. TOC = PRC + RRC + FC

A replaced asset follows the new-asset HI curve from the year it went in.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data_model import InspectionDataset, InspectionRecord
from .generation import GenerationPlan, Mode, ModelSet, generate_sequence
from .health_index import HealthIndexModel, HIMode, predict_many


HI_FLOOR, HI_CEIL = 0.0, 100.0


class ReliabilityError(ValueError):
    pass


# (upper HI edge, annual failure probability); bands are (0,20], (20,40], ...
DEFAULT_BANDS: tuple[tuple[float, float], ...] = (
    (20.0, 0.10), (40.0, 0.05), (60.0, 0.02), (80.0, 0.01), (100.0, 0.005),
)


@dataclass(frozen=True)
class SimulationAssumptions:
    served_load_mw: float | tuple[float, ...]
    hi_band_failure_prob: tuple[tuple[float, float], ...] = DEFAULT_BANDS
    value_of_lost_energy: float = 10000.0
    restoration_hours: float = 1.0
    unit_replacement_cost: float = 500.0
    horizon_years: int = 10

    def __post_init__(self) -> None:
        bands = tuple((float(u), float(p)) for u, p in self.hi_band_failure_prob)
        object.__setattr__(self, "hi_band_failure_prob", bands)
        if isinstance(self.served_load_mw, (list, tuple, np.ndarray)):
            object.__setattr__(self, "served_load_mw", tuple(float(x) for x in self.served_load_mw))
        problems = []
        uppers = [u for u, _ in bands]
        if not bands or uppers != sorted(uppers) or len(set(uppers)) != len(uppers) or uppers[0] <= 0 \
                or uppers[-1] != 100.0:
            problems.append("HI bands must have strictly ascending upper edges ending at 100")
        if any(not 0.0 <= p <= 1.0 for _, p in bands):
            problems.append("failure probabilities must lie in [0, 1]")
        if self.horizon_years < 1:
            problems.append("horizon_years must be >= 1")
        loads = self.served_load_mw if isinstance(self.served_load_mw, tuple) else (self.served_load_mw,)
        if any(x < 0 or not math.isfinite(x) for x in loads):
            problems.append("served_load_mw must be finite and non-negative")
        for name in ("value_of_lost_energy", "restoration_hours", "unit_replacement_cost"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if problems:
            raise ReliabilityError("; ".join(problems))

    @property
    def band_uppers(self) -> np.ndarray:
        return np.array([u for u, _ in self.hi_band_failure_prob])

    @property
    def band_probs(self) -> np.ndarray:
        return np.array([p for _, p in self.hi_band_failure_prob])

    def failure_probability(self, hi) -> np.ndarray:
        """Annual failure probability for HI values in [0, 100]; HI 0 joins the first band."""
        idx = np.searchsorted(self.band_uppers, np.asarray(hi, dtype=float), side="left")
        return self.band_probs[np.minimum(idx, len(self.hi_band_failure_prob) - 1)]

    def failure_cost(self, n_assets: int) -> np.ndarray:
        """Lost-energy cost of one failure of each asset."""
        load = self.served_load_mw
        if isinstance(load, tuple):
            if len(load) != n_assets:
                raise ReliabilityError(f"served_load_mw lists {len(load)} loads for {n_assets} assets")
            load = np.array(load)
        return np.broadcast_to(self.value_of_lost_energy * np.asarray(load, dtype=float) * self.restoration_hours,
                               (n_assets,)).astype(float)

    def to_dict(self) -> dict:
        load = list(self.served_load_mw) if isinstance(self.served_load_mw, tuple) else self.served_load_mw
        return {
            "hi_band_failure_prob": [{"upper": u, "probability": p} for u, p in self.hi_band_failure_prob],
            "value_of_lost_energy": self.value_of_lost_energy,
            "restoration_hours": self.restoration_hours,
            "unit_replacement_cost": self.unit_replacement_cost,
            "horizon_years": self.horizon_years,
            "served_load_mw": load,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SimulationAssumptions":
        missing = [k for k in ("served_load_mw",) if k not in d]
        if missing:
            raise ReliabilityError(f"assumptions missing field(s): {', '.join(missing)}")
        kwargs = {k: d[k] for k in ("value_of_lost_energy", "restoration_hours", "unit_replacement_cost",
                                     "horizon_years") if k in d}
        if "hi_band_failure_prob" in d:
            kwargs["hi_band_failure_prob"] = tuple(
                (b["upper"], b["probability"]) if isinstance(b, Mapping) else tuple(b)
                for b in d["hi_band_failure_prob"])
        load = d["served_load_mw"]
        return cls(served_load_mw=tuple(load) if isinstance(load, list) else float(load), **kwargs)


@dataclass(frozen=True)
class TrajectorySet:
    """HI per asset and year over the horizon.

    ``hi[a, k]`` is the HI of asset ``a`` in ``years[k]``; ``inspected[k]``
    marks years holding a predicted (not interpolated) value.
    ``replacement_curve[k]`` is the HI of a new asset ``k`` years after installation.
    """

    asset_ids: tuple[str, ...]
    years: np.ndarray
    hi: np.ndarray
    inspected: np.ndarray
    replacement_curve: np.ndarray

    def __post_init__(self) -> None:
        hi = np.asarray(self.hi, dtype=float)
        if hi.shape != (len(self.asset_ids), len(self.years)):
            raise ReliabilityError("hi must be (assets, years)")
        if np.any(hi < HI_FLOOR) or np.any(hi > HI_CEIL) or not np.all(np.isfinite(hi)):
            raise ReliabilityError("HI values must lie in [0, 100]")
        curve = np.asarray(self.replacement_curve, dtype=float)
        if len(curve) < len(self.years):
            raise ReliabilityError("replacement curve shorter than the horizon")
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "replacement_curve", curve)
        object.__setattr__(self, "years", np.asarray(self.years))
        object.__setattr__(self, "inspected", np.asarray(self.inspected, dtype=bool))

    @property
    def horizon(self) -> int:
        return len(self.years)

    @classmethod
    def from_hi(cls, hi: np.ndarray, start_year: int = 0, replacement_curve: Sequence[float] | None = None,
                asset_ids: Sequence[str] | None = None) -> "TrajectorySet":
        hi = np.asarray(hi, dtype=float)
        n, h = hi.shape
        ids = tuple(asset_ids) if asset_ids is not None else tuple(f"A{i}" for i in range(n))
        curve = np.full(h, 100.0) if replacement_curve is None else np.asarray(replacement_curve, dtype=float)
        return cls(ids, start_year + np.arange(h), hi, np.ones(h, dtype=bool), curve)

    def to_rows(self) -> list[list]:
        rows = [["asset_id", *[str(int(y)) for y in self.years]]]
        for a, row in zip(self.asset_ids, self.hi):
            rows.append([a, *[repr(float(v)) for v in row]])
        return rows


def interpolate(offsets: Sequence[float], values: np.ndarray, horizon: int) -> np.ndarray:
    """Linear interpolation of per-asset HI from inspection offsets onto years ``0..horizon-1``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    grid = np.arange(horizon, dtype=float)
    return np.vstack([np.interp(grid, offsets, row) for row in values])


def _hi_of(hi_model: HealthIndexModel, dataset: InspectionDataset) -> np.ndarray:
    return predict_many(hi_model, [dataset.numeric(r) for r in dataset.records])


def build_trajectories(seed_conditions: InspectionDataset, models: ModelSet, hi_model: HealthIndexModel,
                       assumptions: SimulationAssumptions, *, master_seed: int = 0, stochastic: bool = True,
                       threads: int = 1) -> TrajectorySet:
    """HI trajectories from the latest seed inspection forward.

    Conditions are generated at every future inspection year, scored with
    ``hi_model`` and linearly interpolated in between. Enough inspections
    are generated to bracket the whole horizon.
    """
    if hi_model.mode is not HIMode.CONTINUOUS:
        raise ReliabilityError("trajectories need a continuous (0-100) health-index model")
    interval = seed_conditions.inspection_interval_years
    horizon = assumptions.horizon_years
    if horizon < interval:
        raise ReliabilityError(f"horizon {horizon} is shorter than one inspection interval ({interval})")
    latest = seed_conditions.latest()
    start_year = max(r.inspection_year for r in latest.records)
    if any(r.inspection_year != start_year for r in latest.records):
        raise ReliabilityError("seed conditions must share one inspection year")
    steps = math.ceil((horizon - 1) / interval)
    plan = GenerationPlan(start_year, steps, interval, Mode.FULL, master_seed, stochastic)

    seq = generate_sequence(models, models.to_model_space(latest), plan, threads=threads)
    inspections = [latest] + [models.to_data_space(ds) for ds in seq]
    his = np.column_stack([_hi_of(hi_model, ds) for ds in inspections])
    offsets = [k * interval for k in range(steps + 1)]
    hi = interpolate(offsets, his, horizon)
    inspected = np.isin(np.arange(horizon), offsets)

    curve = replacement_curve(models, hi_model, seed_conditions.schema, interval, horizon)
    return TrajectorySet(tuple(r.asset_id for r in latest.records), start_year + np.arange(horizon),
                         hi, inspected, curve)


def replacement_curve(models: ModelSet, hi_model: HealthIndexModel, schema, interval: int, horizon: int
                      ) -> np.ndarray:
    """Expected HI of a brand-new asset by years in service; 100 at installation.

    Later inspections use the age-driven models without noise.
    """
    steps = max(1, math.ceil((horizon - 1) / interval))
    blank = InspectionDataset(tuple(schema), (InspectionRecord("new", 0, 0.0, {}),), interval)
    plan = GenerationPlan(0, steps, interval, Mode.AGE_ONLY, 0, stochastic=False)
    seq = [models.to_data_space(ds) for ds in generate_sequence(models, blank, plan)]
    values = [HI_CEIL] + [float(_hi_of(hi_model, ds)[0]) for ds in seq]
    offsets = [k * interval for k in range(steps + 1)]
    return interpolate(offsets, np.array(values), max(horizon, offsets[-1] + 1))[0]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class CostReport:
    years: list[int]
    replacements_per_year: int
    iterations: int
    prc: np.ndarray
    rrc: np.ndarray
    fc: np.ndarray
    failures: np.ndarray
    toc: np.ndarray = field(init=False)
    total_prc: float = field(init=False)
    total_rrc: float = field(init=False)
    total_fc: float = field(init=False)
    total_toc: float = field(init=False)
    stderr: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.toc = self.prc + self.rrc + self.fc
        self.total_prc = float(self.prc.sum())
        self.total_rrc = float(self.rrc.sum())
        self.total_fc = float(self.fc.sum())
        self.total_toc = self.total_prc + self.total_rrc + self.total_fc

    def to_dict(self) -> dict:
        return {
            "replacements_per_year": self.replacements_per_year,
            "iterations": self.iterations,
            "years": list(self.years),
            "per_year": {
                "prc": self.prc.tolist(), "rrc": self.rrc.tolist(), "fc": self.fc.tolist(),
                "toc": self.toc.tolist(), "failures": self.failures.tolist(),
            },
            "total": {"prc": self.total_prc, "rrc": self.total_rrc, "fc": self.total_fc, "toc": self.total_toc},
            "stderr": dict(sorted(self.stderr.items())),
        }


def iteration_rng(master_seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), 1, int(iteration)]))


def _run_iteration(traj: TrajectorySet, probs_hi: np.ndarray, probs_curve: np.ndarray, x: int,
                   fail_cost: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Per-year (proactive count, failure count, lost-energy cost) for one iteration."""
    n, horizon = traj.hi.shape
    u = rng.random((horizon, n))
    installed = np.full(n, -1)  # year of last replacement, -1 for original assets
    out = np.zeros((horizon, 3))
    rows = np.arange(n)
    for y in range(horizon):
        replaced = installed >= 0
        service = np.where(replaced, y - installed, 0)
        hi = np.where(replaced, traj.replacement_curve[service], traj.hi[:, y])
        p = np.where(replaced, probs_curve[service], probs_hi[:, y])
        exempt = np.zeros(n, dtype=bool)
        if x:
            chosen = np.lexsort((rows, hi))[:x]
            installed[chosen] = y
            exempt[chosen] = True
        failed = (u[y] < p) & ~exempt
        installed[failed] = y
        out[y] = (x, failed.sum(), fail_cost[failed].sum())
    return out


def simulate(trajectories: TrajectorySet, assumptions: SimulationAssumptions, replacements_per_year: int,
             iterations: int, master_seed: int = 0, *, threads: int = 1) -> CostReport:
    if iterations < 1:
        raise ReliabilityError("iterations must be >= 1")
    if replacements_per_year < 0:
        raise ReliabilityError("replacements_per_year must be >= 0")
    n, horizon = trajectories.hi.shape
    horizon = min(horizon, assumptions.horizon_years)
    traj = trajectories if horizon == trajectories.horizon else TrajectorySet(
        trajectories.asset_ids, trajectories.years[:horizon], trajectories.hi[:, :horizon],
        trajectories.inspected[:horizon], trajectories.replacement_curve)
    x = replacements_per_year
    if x > n:
        warnings.warn(f"{x} replacements per year exceeds the fleet of {n}; clamped", stacklevel=2)
        x = n
    probs_hi = assumptions.failure_probability(traj.hi)
    probs_curve = assumptions.failure_probability(traj.replacement_curve)
    fail_cost = assumptions.failure_cost(n)

    def run(i: int) -> np.ndarray:
        return _run_iteration(traj, probs_hi, probs_curve, x, fail_cost, iteration_rng(master_seed, i))

    if threads > 1 and iterations > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(iterations), chunksize=max(1, iterations // (4 * threads))))
    else:
        results = [run(i) for i in range(iterations)]
    per_iter = np.stack(results)  # (iterations, horizon, 3), reduced in iteration order

    unit = assumptions.unit_replacement_cost
    mean = per_iter.mean(axis=0)
    prc = mean[:, 0] * unit
    rrc = mean[:, 1] * unit
    fc = mean[:, 2]
    totals = {
        "prc": per_iter[:, :, 0].sum(axis=1) * unit,
        "rrc": per_iter[:, :, 1].sum(axis=1) * unit,
        "fc": per_iter[:, :, 2].sum(axis=1),
        "failures": per_iter[:, :, 1].sum(axis=1),
    }
    totals["toc"] = totals["prc"] + totals["rrc"] + totals["fc"]
    stderr = {k: (float(v.std(ddof=1) / math.sqrt(iterations)) if iterations > 1 else 0.0)
              for k, v in totals.items()}
    return CostReport([int(y) for y in traj.years], x, iterations, prc, rrc, fc, mean[:, 1], stderr=stderr)


def optimize_replacement(trajectories: TrajectorySet, assumptions: SimulationAssumptions,
                         candidates: Sequence[int], iterations: int, master_seed: int = 0, *,
                         threads: int = 1) -> tuple[list[CostReport], int]:
    """Simulate every candidate X with common random numbers; return reports and the TOC-minimising X."""
    if not candidates:
        raise ReliabilityError("no replacement candidates given")
    xs = sorted(set(int(c) for c in candidates))
    reports = [simulate(trajectories, assumptions, x, iterations, master_seed, threads=threads) for x in xs]
    best = min(range(len(xs)), key=lambda i: (reports[i].total_toc, xs[i]))
    return reports, xs[best]
