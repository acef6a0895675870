"""Command-line front end.

Every command reads one JSON run configuration (paths inside it are relative
to the config file), checks all of its inputs before computing anything and
writes its outputs plus a manifest in one commit at the end.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import scipy

from . import __version__, validation
from .combination import ConditionModelSpec, ModelSpecError, load_model_specs
from .correlation import CorrelationConfigError
from .data_model import (DataError, InspectionDataset, ingest_csv, read_labels, schema_from_dict, schema_to_dict,
                         to_csv_text)
from .degradation import DomainError
from .fixtures import CABLE_MODEL_SPEC, cable_fixture
from .generation import (GenerationConfigError, GenerationPlan, Mode, ModelSet, age_sampler_from_dict,
                         fit_model_set, generate_hypothetical, generate_sequence)
from .health_index import BoostConfig, HealthIndexError, HealthIndexModel, HIMode, predict_many, train
from .metrics import MetricError
from .reliability import (ReliabilityError, SimulationAssumptions, build_trajectories, optimize_replacement,
                          simulate)


class ConfigError(ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


# errors caused by the inputs rather than by the computation
INPUT_ERRORS = (ConfigError, DataError, ModelSpecError, CorrelationConfigError, GenerationConfigError,
                ReliabilityError, HealthIndexError, validation.ValidationSetupError, MetricError, DomainError)

DEFAULT_SIZES = (50, 100, 250, 500, 1000)


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def table_csv(records: Sequence[Mapping], columns: Sequence[str]) -> str:
    return csv_text([list(columns), *[[r.get(c) for c in columns] for r in records]])


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

# which top-level entries each command needs
REQUIRED = {
    "fit": ("schema", "data", "model_spec"),
    "generate": ("schema", "models"),
    "validate": ("schema", "data", "model_spec"),
    "hi-train": ("schema", "data", "labels"),
    "hi-apply": ("schema", "data", "hi_model"),
    "simulate": ("schema", "data", "models", "hi_model", "assumptions"),
    "optimize": ("schema", "data", "models", "hi_model", "assumptions"),
}
# inputs read when present but not required
OPTIONAL = {"generate": ("data",), "validate": ("hi_model",)}


@dataclass
class RunConfig:
    """Parsed run configuration with every referenced input already loaded."""

    raw: dict
    base_dir: Path
    master_seed: int
    output_dir: Path
    interval: int | None = None
    schema: list | None = None
    data: InspectionDataset | None = None
    specs: list[ConditionModelSpec] | None = None
    models: ModelSet | None = None
    hi_model: HealthIndexModel | None = None
    labels: dict | None = None
    assumptions: SimulationAssumptions | None = None
    inputs: dict[str, dict] = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name) or {})


def _read(base: Path, rel: str, key: str, inputs: dict) -> bytes:
    path = base / rel
    data = path.read_bytes()
    inputs[key] = {"path": rel, "sha256": _sha256(data)}
    return data


def load_config(path: str | Path | None, command: str, *, seed: int | None = None, out: str | None = None,
                extra: Mapping | None = None, mode: str | None = None) -> RunConfig:
    """Validate and load everything ``command`` needs; raise one ConfigError listing all problems.

    Entries the command does not use are ignored, so one config file can
    serve the whole pipeline.
    """
    problems: list[str] = []
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        base = Path(path).resolve().parent
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {path}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file is not valid JSON: {exc}"]) from None
        if not isinstance(raw, dict):
            raise ConfigError(["config file must hold a JSON object"])
    raw.update(extra or {})

    uses = set(REQUIRED[command]) | set(OPTIONAL.get(command, ()))
    missing = [k for k in REQUIRED[command] if raw.get(k) in (None, "")]
    hypothetical = "hypothetical" in (raw.get("generation") or {})
    if command == "generate":
        if hypothetical:
            uses.discard("data")
        elif raw.get("data") in (None, ""):
            missing.append("data (or generation.hypothetical)")
    if command == "validate":
        if mode == "test3":
            if raw.get("hi_model") in (None, ""):
                missing.append("hi_model (validate test3 compares health indices)")
        else:
            uses.discard("hi_model")
    if missing:
        problems.extend(f"missing field: {k}" for k in missing)

    master_seed = seed if seed is not None else raw.get("master_seed", 0)
    if not isinstance(master_seed, int) or isinstance(master_seed, bool) or not 0 <= master_seed < 2**64:
        problems.append("master_seed must be an unsigned 64-bit integer")
        master_seed = 0
    out_dir = Path(out) if out is not None else base / raw.get("output_dir", "out")
    cfg = RunConfig(raw, base, master_seed, out_dir)

    def attempt(key: str, fn: Callable[[bytes], Any]) -> Any:
        rel = raw.get(key)
        if key not in uses or rel in (None, ""):
            return None
        if isinstance(rel, Mapping):
            rel = rel.get("path")
        if not isinstance(rel, str):
            problems.append(f"{key}: expected a file path")
            return None
        try:
            return fn(_read(base, rel, key, cfg.inputs))
        except FileNotFoundError:
            problems.append(f"{key}: file not found: {rel}")
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            problems.append(f"{key}: cannot parse {rel}: {exc}")
        except (DataError, ValueError, KeyError, TypeError) as exc:
            problems.append(f"{key}: {rel}: {exc}")
        return None

    schema_doc = attempt("schema", lambda b: schema_from_dict(json.loads(b)))
    if schema_doc is not None:
        cfg.schema, interval = schema_doc
        cfg.interval = raw.get("interval", interval)
        if cfg.interval is None:
            problems.append("inspection interval missing from both schema and config")
    if cfg.schema is not None and cfg.interval is not None:
        cfg.data = attempt("data", lambda b: ingest_csv(base / raw["data"], cfg.schema, cfg.interval))
    cfg.specs = attempt("model_spec", lambda b: load_model_specs(json.loads(b)))
    cfg.models = attempt("models", lambda b: ModelSet.from_dict(json.loads(b)))
    cfg.hi_model = attempt("hi_model", lambda b: HealthIndexModel.from_dict(json.loads(b)))
    cfg.assumptions = attempt("assumptions", lambda b: SimulationAssumptions.from_dict(json.loads(b)))
    if "labels" in uses and raw.get("labels") and cfg.schema is not None:
        lab = raw["labels"]
        column = lab.get("column", "hi") if isinstance(lab, Mapping) else "hi"
        cfg.labels = attempt("labels", lambda b: read_labels(base / (lab["path"] if isinstance(lab, Mapping)
                                                                      else lab), column))

    if cfg.schema is not None:
        names = {a.name for a in cfg.schema}
        for spec in cfg.specs or []:
            unknown = sorted(n for n in spec.attributes if n not in names)
            if unknown:
                problems.append(f"model_spec: condition {spec.target!r} references unknown attribute(s) "
                                f"{', '.join(unknown)}")
        if cfg.specs is not None:
            unspecified = sorted(names - {s.target for s in cfg.specs})
            if unspecified:
                problems.append(f"model_spec: no model for attribute(s) {', '.join(unspecified)}")
        if cfg.models is not None:
            lacking = sorted(names - set(cfg.models.attributes))
            if lacking:
                problems.append(f"models: no fitted model for attribute(s) {', '.join(lacking)}")
    if problems:
        raise ConfigError(problems)
    return cfg


# ---------------------------------------------------------------------------
# output commit
# ---------------------------------------------------------------------------

def commit(out_dir: Path, files: Mapping[str, str]) -> None:
    """Write every file to a staging directory first, then move them in place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir, prefix=".staging-") as tmp:
        for name, text in files.items():
            p = Path(tmp) / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8")
        for name in sorted(files):
            dest = out_dir / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(Path(tmp) / name, dest)


def manifest(command: str, cfg: RunConfig, files: Mapping[str, str], parameters: Mapping, seeds: Mapping) -> str:
    return dumps({
        "command": command,
        "versions": {"condgen": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": ".".join(map(str, sys.version_info[:3]))},
        "inputs": cfg.inputs,
        "seeds": {"master_seed": cfg.master_seed, **seeds},
        "parameters": parameters,
        "outputs": {name: _sha256(text.encode("utf-8")) for name, text in sorted(files.items())},
    })


# ---------------------------------------------------------------------------
# commands; each returns (files, parameters, derived seeds)
# ---------------------------------------------------------------------------

def _fit_options(cfg: RunConfig) -> dict:
    sigma, cat, fit = cfg.section("sigma"), cfg.section("categorical"), cfg.section("fit")
    return {"fallback_fraction": float(sigma.get("fallback_fraction", 0.05)),
            "max_gap": int(sigma.get("max_gap", 1)),
            "fixed_sigma": sigma.get("fixed"),
            "neighbor_window": int(cat.get("neighbor_window", 2)),
            "nonnegative": bool(fit.get("nonnegative_weights", False))}


def _require_pairs(specs: Sequence[ConditionModelSpec], data: InspectionDataset) -> None:
    needs = sorted(s.target for s in specs if s.correlation)
    if needs and not data.pairs():
        raise ConfigError([f"correlation terms for {', '.join(needs)} need inspections from at least two "
                           f"consecutive inspection years; the training data has {len(data.years())} year(s)"])


def fit_report_text(models: ModelSet, report: Mapping[str, dict]) -> str:
    lines = [f"condgen {__version__} fitted models", ""]
    for attr in models.schema:
        am = models.attributes[attr.name]
        lines.append(f"[{attr.name}] {attr.kind.value}, {attr.direction.value}")
        if am.method == "categorical":
            cat = am.categorical
            lines.append(f"  categorical by age: {len(cat.probabilities)} ages, {cat.levels} levels, "
                         f"neighbour window {cat.neighbor_window}")
            lines.append("")
            continue
        for label, model, sigma in (("full", am.model, am.sigma), ("age-only", am.age_only_model, am.age_only_sigma)):
            if model is None:
                continue
            lines.append(f"  {label} model:")
            for t in model.degradation_terms:
                m = t.model
                lines.append(f"    degradation family={m.family.value} a={m.a:.6g} b={m.b:.6g} "
                             f"weight={t.weight:.6g}{' (fixed)' if t.fixed else ''}")
            for t in model.correlation_terms:
                m = t.model
                lines.append(f"    correlation regressors={','.join(m.regressors)} weight={t.weight:.6g}"
                             f"{' (fixed)' if t.fixed else ''}")
                lines.append(f"      intercept={m.beta0:.6g}")
                for r, b1, b2 in zip(m.regressors, m.beta_linear, m.beta_quadratic):
                    lines.append(f"      {r}: linear={b1:.6g} quadratic={b2:.6g}")
            for t in model.empirical_terms:
                lines.append(f"    empirical {t.model.description!r} weight={t.weight:.6g}")
            diag = report[attr.name]["full" if label == "full" else "age_only"]
            lines.append(f"    training rows={diag['rows']} rmse={diag['rmse']:.6g}")
            for note in diag.get("notes", []):
                lines.append(f"    note: {note}")
            if sigma.fixed is not None:
                lines.append(f"    sigma fixed at {sigma.fixed:.6g}")
            elif sigma.sigmas:
                vals = np.array(list(sigma.sigmas.values()))
                lines.append(f"    sigma over {len(vals)} ages: min={vals.min():.4g} median={np.median(vals):.4g} "
                             f"max={vals.max():.4g}; fallback {sigma.fallback_fraction:g} x expected")
            else:
                lines.append(f"    sigma: fallback {sigma.fallback_fraction:g} x expected at every age")
        lines.append("")
    return "\n".join(lines)


def cmd_fit(cfg: RunConfig, threads: int):
    _require_pairs(cfg.specs, cfg.data)
    opts = _fit_options(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        models, report = fit_model_set(cfg.data, cfg.specs, **opts)
    files = {"models.json": dumps(models.to_dict()),
             "fit_report.json": dumps({"conditions": report, "warnings": sorted({str(w.message) for w in caught})}),
             "fit_report.txt": fit_report_text(models, report)}
    for name, am in models.attributes.items():
        files[f"models/{name}.json"] = dumps(am.to_dict())
    return files, {"fit": opts, "records": len(cfg.data), "assets": len(cfg.data.by_asset())}, {}


def _records_json(datasets: Sequence[InspectionDataset]) -> list[dict]:
    return [{"asset_id": r.asset_id, "inspection_year": r.inspection_year, "age_years": r.age_years,
             "values": dict(sorted(r.values.items()))} for ds in datasets for r in ds.records]


def cmd_generate(cfg: RunConfig, threads: int):
    gen = cfg.section("generation")
    mode = Mode(gen.get("mode", "full"))
    steps = int(gen.get("steps", 1))
    stochastic = bool(gen.get("stochastic", True))
    models = cfg.models
    schema = tuple(cfg.schema)
    if "hypothetical" in gen:
        hyp = gen["hypothetical"]
        plan = GenerationPlan(int(hyp.get("start_year", 0)), steps, cfg.interval, mode, cfg.master_seed, stochastic)
        sampler = age_sampler_from_dict(hyp.get("ages", {"kind": "uniform", "low": 1, "high": 40}))
        seq = generate_hypothetical(schema, models, int(hyp["count"]), sampler, plan, threads=threads)
        seq = [models.to_data_space(ds) for ds in seq]
    else:
        latest = cfg.data.latest()
        plan = GenerationPlan(max(cfg.data.years()), steps, cfg.interval, mode, cfg.master_seed, stochastic)
        seq = [models.to_data_space(ds)
               for ds in generate_sequence(models, models.to_model_space(latest), plan, threads=threads)]
    combined = InspectionDataset(schema, tuple(r for ds in seq for r in ds.records), cfg.interval)
    files = {"generated.csv": to_csv_text(combined), "generated.json": dumps(_records_json(seq))}
    return files, {"generation": plan.to_dict(), "records": len(combined)}, {}


def cmd_hi_train(cfg: RunConfig, threads: int):
    conf = BoostConfig.from_dict(cfg.section("hi"))
    names = [a.name for a in cfg.schema]
    rows, y, skipped = [], [], 0
    for rec in cfg.data.records:
        label = cfg.labels.get((rec.asset_id, rec.inspection_year))
        vals = cfg.data.numeric(rec)
        if label is None or any(n not in vals for n in names):
            skipped += 1
            continue
        rows.append([vals[n] for n in names])
        y.append(label)
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    model = train(X, y, names, conf)
    pred = model.predict_matrix(X)
    y = np.asarray(y)
    summary = {"records": len(y), "skipped_unlabelled_or_incomplete": skipped,
               "training_mse": float(np.mean((pred - y) ** 2)), "trees": len(model.trees),
               "constant_labels": model.constant, "used_features": sorted(model.used_features)}
    if conf.mode is HIMode.DISCRETE:
        summary["training_mismatch_pct"] = float(np.mean(np.abs(pred - y)) * 100.0)
    files = {"hi_model.json": dumps(model.to_dict()), "hi_train_report.json": dumps(summary)}
    return files, {"hi": conf.to_dict()}, {}


def cmd_hi_apply(cfg: RunConfig, threads: int):
    ds = cfg.data
    hi = predict_many(cfg.hi_model, [ds.numeric(r) for r in ds.records])
    rows = [{"asset_id": r.asset_id, "inspection_year": r.inspection_year, "age_years": r.age_years,
             "hi": float(h)} for r, h in zip(ds.records, hi)]
    cols = ["asset_id", "inspection_year", "age_years", "hi"]
    return {"hi.csv": table_csv(rows, cols), "hi.json": dumps(rows)}, {"records": len(rows)}, {}


def _trajectories(cfg: RunConfig, threads: int):
    sim = cfg.section("simulation")
    return build_trajectories(cfg.data, cfg.models, cfg.hi_model, cfg.assumptions, master_seed=cfg.master_seed,
                              stochastic=bool(sim.get("stochastic_trajectories", True)), threads=threads)


def _cost_rows(report) -> list[dict]:
    return [{"year": y, "prc": float(report.prc[k]), "rrc": float(report.rrc[k]), "fc": float(report.fc[k]),
             "toc": float(report.toc[k]), "failures": float(report.failures[k])}
            for k, y in enumerate(report.years)]


def _traj_files(traj) -> dict:
    curve = [{"years_in_service": k, "hi": float(v)} for k, v in enumerate(traj.replacement_curve)]
    return {"trajectories.csv": csv_text(traj.to_rows()),
            "replacement_curve.csv": table_csv(curve, ["years_in_service", "hi"])}


def cmd_simulate(cfg: RunConfig, threads: int):
    sim = cfg.section("simulation")
    iterations = int(sim.get("iterations", 10000))
    x = int(sim.get("replacements", 0))
    traj = _trajectories(cfg, threads)
    report = simulate(traj, cfg.assumptions, x, iterations, cfg.master_seed, threads=threads)
    cols = ["year", "prc", "rrc", "fc", "toc", "failures"]
    files = {"costs.csv": table_csv(_cost_rows(report), cols), "costs.json": dumps(report.to_dict()),
             **_traj_files(traj)}
    params = {"assumptions": cfg.assumptions.to_dict(), "iterations": iterations, "replacements": x}
    return files, params, {}


def _candidates(sim: Mapping, n_assets: int) -> list[int]:
    c = sim.get("candidates")
    if c is None:
        step = max(1, n_assets // 20)
        return list(range(0, n_assets + 1, step))
    if isinstance(c, Mapping):
        return list(range(int(c.get("start", 0)), int(c["stop"]) + 1, int(c.get("step", 1))))
    return [int(v) for v in c]


def cmd_optimize(cfg: RunConfig, threads: int):
    sim = cfg.section("simulation")
    iterations = int(sim.get("iterations", 10000))
    traj = _trajectories(cfg, threads)
    xs = _candidates(sim, len(traj.asset_ids))
    reports, best = optimize_replacement(traj, cfg.assumptions, xs, iterations, cfg.master_seed, threads=threads)
    rows = [{"replacements": r.replacements_per_year, "prc": r.total_prc, "rrc": r.total_rrc, "fc": r.total_fc,
             "toc": r.total_toc, "toc_stderr": r.stderr.get("toc")} for r in reports]
    files = {"optimize.csv": table_csv(rows, ["replacements", "prc", "rrc", "fc", "toc", "toc_stderr"]),
             "optimize.json": dumps({"best_replacements": best, "candidates": [r.to_dict() for r in reports]}),
             **_traj_files(traj)}
    params = {"assumptions": cfg.assumptions.to_dict(), "iterations": iterations, "candidates": xs}
    return files, params, {}


TABLE_COLUMNS = ["condition", "type", "n", "kl", "benchmark_kl", "mape", "mape_expected", "r2", "cmp",
                 "cmp_expected"]


def cmd_validate(cfg: RunConfig, threads: int, mode: str):
    val = cfg.section("validation")
    if mode == "test3" and cfg.hi_model is None:
        raise ConfigError(["missing field: hi_model (validate test3 compares health indices)"])
    seed = cfg.master_seed
    opts = _fit_options(cfg)
    params: dict = {"mode": mode, "fit": opts}
    if mode == "test4":
        sizes = [int(s) for s in val.get("sizes", DEFAULT_SIZES)]
        n_seeds = int(val.get("seeds", 10))
        n_test = int(val.get("test_assets", max(1, len(cfg.data.by_asset()) - max(sizes))))
        pool, test = validation.split_by_asset(cfg.data, len(cfg.data.by_asset()) - n_test, seed=seed)
        seeds = [seed + i for i in range(n_seeds)]
        res = validation.test4(pool, test, cfg.specs, sizes, seeds,
                               expected=bool(val.get("expected", True)))
        cols = ["size", "mean_mape", *res["conditions"]]
        params.update(sizes=sizes, test_assets=n_test)
        return ({"validate_test4.csv": table_csv(res["series"], cols), "validate_test4.json": dumps(res)},
                params, {"sweep_seeds": seeds})

    train_fraction = float(val.get("train_fraction", 0.5))
    train, test = validation.split_by_asset(cfg.data, train_fraction=train_fraction, seed=seed)
    _require_pairs(cfg.specs, train)
    models, _ = fit_model_set(train, cfg.specs, **opts)
    params.update(train_fraction=train_fraction, train_assets=len(train.by_asset()),
                  test_assets=len(test.by_asset()))
    if mode == "test3":
        res = validation.test3(models, test, cfg.hi_model, seed)
        cols = ["mode", "n", "mape", "himp"]
        return {"validate_test3.csv": table_csv([res], cols), "validate_test3.json": dumps(res)}, params, {}
    fn = validation.test1 if mode == "test1" else validation.test2
    rows = fn(models, test, seed, bins=int(val.get("bins", 20)))
    return ({f"validate_{mode}.csv": table_csv(rows, TABLE_COLUMNS), f"validate_{mode}.json": dumps(rows)},
            params, {})


def cmd_fixture(out_dir: Path, assets: int, seed: int) -> dict[str, str]:
    """Synthetic cable cohort with a ready-to-run configuration."""
    ds, labels = cable_fixture(assets, seed)
    lab_rows = [[a, y, repr(v)] for (a, y), v in sorted(labels.items())]
    n_test = max(1, min(300, assets // 3))
    sizes = [s for s in DEFAULT_SIZES if s <= assets - n_test] or [max(1, (assets - n_test) // 2)]
    config = {
        "schema": "schema.json", "data": "inspections.csv", "model_spec": "model_spec.json",
        "models": "out/models.json", "hi_model": "out/hi_model.json", "assumptions": "assumptions.json",
        "labels": {"path": "labels.csv", "column": "hi"},
        "master_seed": seed, "output_dir": "out",
        "sigma": {"fallback_fraction": 0.05}, "categorical": {"neighbor_window": 2},
        "hi": {"n_trees": 100, "max_depth": 3, "learning_rate": 0.1, "mode": "continuous"},
        "generation": {"steps": 3, "mode": "full", "stochastic": True},
        "simulation": {"iterations": 1000, "replacements": 20, "candidates": {"start": 0, "stop": 100, "step": 10}},
        "validation": {"train_fraction": 0.5, "sizes": sizes, "seeds": 10, "test_assets": n_test},
    }
    assumptions = SimulationAssumptions(served_load_mw=1.0).to_dict()
    return {"schema.json": dumps(schema_to_dict(ds.schema, ds.inspection_interval_years)),
            "inspections.csv": to_csv_text(ds),
            "labels.csv": csv_text([["asset_id", "inspection_year", "hi"], *lab_rows]),
            "model_spec.json": dumps(CABLE_MODEL_SPEC),
            "assumptions.json": dumps(assumptions),
            "config.json": dumps(config)}


COMMANDS = {"fit": cmd_fit, "generate": cmd_generate, "hi-train": cmd_hi_train, "hi-apply": cmd_hi_apply,
            "simulate": cmd_simulate, "optimize": cmd_optimize}


def build_parser() -> argparse.ArgumentParser:
    def flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommand copies must not reset values given before the subcommand
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", default=d(None), help="run configuration JSON")
        g.add_argument("--seed", type=int, default=d(None), help="master seed (overrides the config)")
        g.add_argument("--out", default=d(None), help="output directory (overrides the config)")
        g.add_argument("--threads", type=int, default=d(1), help="worker threads (default 1)")
        return g

    common = flags(True)
    p = argparse.ArgumentParser(prog="condgen", description="Condition data generation and reliability studies.",
                                parents=[flags(False)])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="estimate condition models from inspection data")
    sub.add_parser("generate", parents=[common], help="generate future or hypothetical inspections")
    v = sub.add_parser("validate", parents=[common], help="score generated data against held-out inspections")
    v.add_argument("mode", choices=["test1", "test2", "test3", "test4"])
    sub.add_parser("hi-train", parents=[common], help="train the health-index model on labelled records")
    sub.add_parser("hi-apply", parents=[common], help="score records with a trained health-index model")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo costs for one replacement rate")
    sub.add_parser("optimize", parents=[common], help="search the replacement rate minimising total cost")
    f = sub.add_parser("fixture", parents=[common], help="write a synthetic dataset with a ready config")
    f.add_argument("--assets", type=int, default=1000)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        if args.command == "fixture":
            out = Path(args.out or "fixture")
            commit(out, cmd_fixture(out, args.assets, args.seed or 0))
            print(f"wrote fixture to {out}")
            return 0
        cfg = load_config(args.config, args.command, seed=args.seed, out=args.out,
                          mode=getattr(args, "mode", None))
        if args.command == "validate":
            files, params, seeds = cmd_validate(cfg, args.threads, args.mode)
            name = f"validate-{args.mode}"
        else:
            files, params, seeds = COMMANDS[args.command](cfg, args.threads)
            name = args.command
        files[f"{name}.manifest.json"] = manifest(name, cfg, files, params, seeds)
        commit(cfg.output_dir, files)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{name}: wrote {len(files)} file(s) to {cfg.output_dir}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
