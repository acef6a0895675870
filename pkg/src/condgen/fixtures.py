"""Synthetic inspection data with known structure, for tests and demos.

The cable-style cohort has five numerical conditions and one 3-level rating.
Each asset carries persistent multiplicative offsets, so the previous
inspection tells more about the next one than age alone does.
"""

from __future__ import annotations

import numpy as np

from .data_model import ConditionAttribute, InspectionDataset, InspectionRecord, Kind

CABLE_SCHEMA = (
    ConditionAttribute("PD"),
    ConditionAttribute("TDS"),
    ConditionAttribute("DTD"),
    ConditionAttribute("MTD"),
    ConditionAttribute("NC"),
    ConditionAttribute("VC", Kind.RATING, 3),
)

CABLE_MODEL_SPEC = {
    "conditions": [
        {"target": "PD", "families": ["exponential", "power"], "correlations": [["PD"]]},
        {"target": "TDS", "families": ["linear", "exponential"], "correlations": [["TDS", "DTD", "MTD"]]},
        {"target": "DTD", "families": ["exponential", "power"], "correlations": [["DTD", "TDS", "MTD"]]},
        {"target": "MTD", "families": ["linear", "exponential"], "correlations": [["MTD", "TDS", "DTD"]]},
        {"target": "NC", "families": ["logarithmic", "power"], "correlations": [["NC"]]},
        {"target": "VC", "rating_method": "categorical"},
    ]
}

CABLE_YEARS = (2010, 2013, 2016, 2019)


def _vc_probs(age: float) -> np.ndarray:
    worn = min(max((age - 5.0) / 50.0, 0.0), 1.0)
    p = np.array([0.8 * (1 - worn) + 0.1, 0.3, 0.1 + 0.8 * worn])
    return p / p.sum()


def cable_conditions(age: float, frailty: np.ndarray, rng: np.random.Generator, noise: float = 0.03) -> dict:
    """One inspection's condition values for an asset of ``age`` years."""
    e = 1.0 + noise * rng.standard_normal(5)
    td = (0.5 + 0.02 * age) * frailty[1]
    return {
        "PD": 2.0 * np.exp(0.04 * age) * frailty[0] * e[0],
        "TDS": td * e[1],
        "DTD": 0.3 * td ** 1.3 * e[2],
        "MTD": 1.2 * td * e[3],
        "NC": (5.0 * np.log(max(age, 1.0)) + 3.0) * frailty[2] * e[4],
        "VC": int(rng.choice(3, p=_vc_probs(age))) + 1,
    }


def cable_health_index(values: dict) -> float:
    """Ground-truth HI rule for the cable fixture, 0 (worst) to 100 (best)."""
    score = 100.0 - 1.1 * values["PD"] - 22.0 * values["TDS"] - 1.0 * values["NC"] - 6.0 * (values["VC"] - 1)
    return float(min(max(score, 0.0), 100.0))


def cable_fixture(n_assets: int = 1000, seed: int = 0, years=CABLE_YEARS, max_age: int = 45,
                  frailty_sd: float = 0.2, noise: float = 0.03) -> tuple[InspectionDataset, dict]:
    """Cohort inspected every 3 years; returns the dataset and HI labels keyed by (asset, year)."""
    rng = np.random.default_rng(seed)
    recs, labels = [], {}
    width = len(str(max(n_assets - 1, 0)))
    for i in range(n_assets):
        asset = f"C{i:0{width}d}"
        age0 = int(rng.integers(1, max_age + 1))
        frailty = np.exp(frailty_sd * rng.standard_normal(3))
        for year in years:
            age = float(age0 + (year - years[0]))
            vals = cable_conditions(age, frailty, rng, noise)
            recs.append(InspectionRecord(asset, year, age, {k: (float(v) if k != "VC" else v)
                                                             for k, v in vals.items()}))
            labels[(asset, year)] = cable_health_index(vals)
    interval = years[1] - years[0] if len(years) > 1 else 1
    return InspectionDataset(CABLE_SCHEMA, tuple(recs), interval), labels

