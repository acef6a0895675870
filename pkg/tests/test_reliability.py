import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condgen.combination import CombinedModel, Term, load_model_specs
from condgen.correlation import CorrelationModel
from condgen.data_model import ConditionAttribute, InspectionDataset, InspectionRecord
from condgen.degradation import DegradationModel, Family
from condgen.fixtures import CABLE_MODEL_SPEC, cable_fixture
from condgen.generation import AttributeModel, ModelSet, fit_model_set
from condgen.health_index import BoostConfig, HealthIndexModel, HIMode, train
from condgen.reliability import (
    ReliabilityError, SimulationAssumptions, TrajectorySet, build_trajectories, interpolate,
    optimize_replacement, simulate,
)
from condgen.stochastic import SigmaTable

UNIT = 500.0


def assumptions(probs=(0.10, 0.05, 0.02, 0.01, 0.005), **kw):
    bands = tuple(zip((20.0, 40.0, 60.0, 80.0, 100.0), probs))
    return SimulationAssumptions(served_load_mw=kw.pop("load", 1.0), hi_band_failure_prob=bands, **kw)


def mixed_fleet(n=200, horizon=10, seed=0):
    hi = np.random.default_rng(seed).uniform(5, 95, (n, 1)) - np.linspace(0, 20, horizon)[None, :]
    return TrajectorySet.from_hi(np.clip(hi, 0, 100), 2019)


# assumptions --------------------------------------------------------------

def test_band_membership():
    a = assumptions()
    got = a.failure_probability([0.0, 10.0, 20.0, 20.0001, 40.0, 59.9, 80.0, 80.5, 100.0])
    assert got.tolist() == [0.10, 0.10, 0.10, 0.05, 0.05, 0.02, 0.01, 0.005, 0.005]


def test_defaults_are_echoed():
    d = SimulationAssumptions.from_dict({"served_load_mw": 2.0}).to_dict()
    assert d["value_of_lost_energy"] == 10000.0
    assert d["restoration_hours"] == 1.0
    assert d["unit_replacement_cost"] == 500.0
    assert d["horizon_years"] == 10
    assert [b["probability"] for b in d["hi_band_failure_prob"]] == [0.10, 0.05, 0.02, 0.01, 0.005]
    assert SimulationAssumptions.from_dict(d) == SimulationAssumptions.from_dict({"served_load_mw": 2.0})


def test_served_load_required():
    with pytest.raises(ReliabilityError, match="served_load_mw"):
        SimulationAssumptions.from_dict({})


@pytest.mark.parametrize("bad", [
    {"hi_band_failure_prob": ((20.0, 1.5), (100.0, 0.1))},
    {"hi_band_failure_prob": ((50.0, 0.1), (40.0, 0.1), (100.0, 0.1))},
    {"hi_band_failure_prob": ((20.0, 0.1), (90.0, 0.1))},
    {"horizon_years": 0},
    {"unit_replacement_cost": -1.0},
])
def test_invalid_assumptions(bad):
    with pytest.raises(ReliabilityError):
        SimulationAssumptions(served_load_mw=1.0, **bad)


def test_per_asset_loads():
    a = SimulationAssumptions(served_load_mw=(1.0, 2.0), value_of_lost_energy=100.0, restoration_hours=2.0)
    assert a.failure_cost(2).tolist() == [200.0, 400.0]
    with pytest.raises(ReliabilityError):
        a.failure_cost(3)


# trajectories -------------------------------------------------------------

def test_hand_interpolation():
    assert interpolate([0, 3], np.array([90.0, 60.0]), 4).tolist() == [[90.0, 80.0, 70.0, 60.0]]


SCHEMA = (ConditionAttribute("X"), ConditionAttribute("Y"))


def frozen_world():
    attrs = {}
    for a in SCHEMA:
        persist = CorrelationModel(a.name, (a.name,), 0.0, (1.0,), (0.0,))
        still = DegradationModel(Family.LINEAR, -1.0, 100.0)
        model = CombinedModel(a.name, (Term(still, 0.0, True),), (Term(persist, 1.0, True),))
        aged = CombinedModel(a.name, (Term(still, 1.0, True),))
        attrs[a.name] = AttributeModel(a.name, "combined", model, SigmaTable(fixed=0.0), aged)
    return ModelSet(SCHEMA, attrs)


def xy_hi_model():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 100, (60, 2))
    return train(X, np.clip(X[:, 0] - 0.2 * X[:, 1] + 20, 0, 100), ["X", "Y"], BoostConfig(n_trees=20))


def test_frozen_world_gives_flat_trajectories():
    recs = tuple(InspectionRecord(f"A{i}", 2019, 10.0 + i, {"X": 10.0 * i, "Y": 5.0 * i}) for i in range(8))
    seed = InspectionDataset(SCHEMA, recs, 3)
    traj = build_trajectories(seed, frozen_world(), xy_hi_model(), assumptions())
    assert traj.hi.shape == (8, 10)
    assert np.all(traj.hi == traj.hi[:, :1])


def test_horizon_shorter_than_interval():
    recs = (InspectionRecord("A", 2019, 1.0, {"X": 1.0, "Y": 1.0}),)
    with pytest.raises(ReliabilityError, match="shorter"):
        build_trajectories(InspectionDataset(SCHEMA, recs, 3), frozen_world(), xy_hi_model(),
                           assumptions(horizon_years=2))


def test_discrete_hi_model_rejected():
    recs = (InspectionRecord("A", 2019, 1.0, {"X": 1.0, "Y": 1.0}),)
    discrete = HealthIndexModel(("X", "Y"), HIMode.DISCRETE, 3.0, 0.1)
    with pytest.raises(ReliabilityError):
        build_trajectories(InspectionDataset(SCHEMA, recs, 3), frozen_world(), discrete, assumptions())


@pytest.fixture(scope="module")
def cable_trajectories():
    ds, labels = cable_fixture(120, seed=3)
    models, _ = fit_model_set(ds, load_model_specs(CABLE_MODEL_SPEC))
    names = [a.name for a in ds.schema]
    X = np.array([[ds.numeric(r)[n] for n in names] for r in ds.records])
    y = [labels[(r.asset_id, r.inspection_year)] for r in ds.records]
    hi_model = train(X, y, names)
    return build_trajectories(ds, models, hi_model, assumptions(), master_seed=4)


def test_inspection_years_2022_2025_2028(cable_trajectories):
    t = cable_trajectories
    assert t.years.tolist() == list(range(2019, 2029))
    assert t.years[t.inspected].tolist() == [2019, 2022, 2025, 2028]
    # between inspections the values lie on the chord
    k = np.searchsorted(t.years, 2022)
    for j in (1, 2):
        np.testing.assert_allclose(t.hi[:, j], t.hi[:, 0] + (t.hi[:, k] - t.hi[:, 0]) * j / 3, atol=1e-9)


def test_replacement_curve_starts_new(cable_trajectories):
    curve = cable_trajectories.replacement_curve
    assert curve[0] == 100.0 and len(curve) >= 10
    assert np.all((curve >= 0) & (curve <= 100))


# simulation ---------------------------------------------------------------

def test_no_events_no_cost():
    rep = simulate(mixed_fleet(), assumptions((0.0,) * 5), 0, 50, master_seed=1)
    assert rep.total_toc == 0.0 and not rep.toc.any() and not rep.failures.any()


def test_toc_identity_per_year():
    rep = simulate(mixed_fleet(), assumptions(), 7, 200, master_seed=2)
    np.testing.assert_array_equal(rep.toc, rep.prc + rep.rrc + rep.fc)
    assert rep.total_toc == rep.total_prc + rep.total_rrc + rep.total_fc
    d = rep.to_dict()
    assert d["per_year"]["toc"] == [p + r + f for p, r, f in zip(d["per_year"]["prc"], d["per_year"]["rrc"],
                                                                 d["per_year"]["fc"])]


def test_prc_accounting_is_exact():
    rep = simulate(mixed_fleet(50), assumptions(), 12, 30, master_seed=3)
    assert rep.total_prc == 12 * UNIT * 10
    assert rep.prc.tolist() == [12 * UNIT] * 10


def test_rrc_is_unit_cost_per_failure():
    rep = simulate(mixed_fleet(), assumptions(), 3, 100, master_seed=5)
    np.testing.assert_allclose(rep.rrc, rep.failures * UNIT, rtol=1e-12)
    np.testing.assert_allclose(rep.fc, rep.failures * 10000.0, rtol=1e-12)


def test_certain_failure_is_preempted():
    fleet = mixed_fleet(40)
    a = assumptions((1.0,) * 5)
    fc = 10000.0
    reports, best = optimize_replacement(fleet, a, [0, 10, 20, 40], 5, master_seed=6)
    for x, rep in zip([0, 10, 20, 40], reports):
        assert rep.total_toc == pytest.approx(10 * (x * UNIT + (40 - x) * (UNIT + fc)))
    tocs = [r.total_toc for r in reports]
    assert tocs == sorted(tocs, reverse=True)
    assert best == 40


def test_zero_probabilities_pick_no_replacement():
    _, best = optimize_replacement(mixed_fleet(), assumptions((0.0,) * 5), [30, 0, 10], 10)
    assert best == 0


def test_ties_break_to_smaller_x():
    free = SimulationAssumptions(served_load_mw=0.0, hi_band_failure_prob=((100.0, 0.0),),
                                 unit_replacement_cost=0.0)
    _, best = optimize_replacement(mixed_fleet(), free, [5, 3, 9], 4)
    assert best == 3


def test_replaced_assets_start_new():
    # every original asset fails in year one; new assets never fail
    traj = TrajectorySet.from_hi(np.full((30, 5), 10.0), 0, replacement_curve=np.full(5, 100.0))
    a = SimulationAssumptions(served_load_mw=1.0, hi_band_failure_prob=((20.0, 1.0), (100.0, 0.0)),
                              horizon_years=5)
    rep = simulate(traj, a, 0, 3)
    assert rep.failures.tolist() == [30.0, 0.0, 0.0, 0.0, 0.0]


def test_replacement_curve_follows_service_years():
    # new assets fail only once they age past year 2 of service
    traj = TrajectorySet.from_hi(np.full((10, 6), 10.0), 0, replacement_curve=[100, 100, 10, 10, 10, 10])
    a = SimulationAssumptions(served_load_mw=1.0, hi_band_failure_prob=((20.0, 1.0), (100.0, 0.0)),
                              horizon_years=6)
    rep = simulate(traj, a, 0, 2)
    assert rep.failures.tolist() == [10.0, 0.0, 10.0, 0.0, 10.0, 0.0]


def test_proactive_targets_lowest_hi():
    hi = np.array([[10.0], [90.0], [15.0], [95.0]])
    traj = TrajectorySet.from_hi(hi, 0)
    a = SimulationAssumptions(served_load_mw=1.0, hi_band_failure_prob=((20.0, 1.0), (100.0, 0.0)),
                              horizon_years=1)
    assert simulate(traj, a, 2, 3).failures.tolist() == [0.0]
    assert simulate(traj, a, 1, 3).failures.tolist() == [1.0]


def test_clamped_replacements_warn():
    with pytest.warns(UserWarning, match="clamped"):
        rep = simulate(mixed_fleet(5), assumptions(), 9, 2)
    assert rep.replacements_per_year == 5


def test_bad_arguments():
    with pytest.raises(ReliabilityError):
        simulate(mixed_fleet(), assumptions(), 0, 0)
    with pytest.raises(ReliabilityError):
        simulate(mixed_fleet(), assumptions(), -1, 5)
    with pytest.raises(ReliabilityError):
        optimize_replacement(mixed_fleet(), assumptions(), [], 5)


def test_hi_outside_range_rejected():
    with pytest.raises(ReliabilityError):
        TrajectorySet.from_hi(np.array([[101.0]]))


def test_deterministic_and_thread_invariant():
    fleet = mixed_fleet()
    a = simulate(fleet, assumptions(), 4, 300, master_seed=9).to_dict()
    b = simulate(fleet, assumptions(), 4, 300, master_seed=9).to_dict()
    c = simulate(fleet, assumptions(), 4, 300, master_seed=9, threads=4).to_dict()
    assert a == b == c
    assert simulate(fleet, assumptions(), 4, 300, master_seed=10).to_dict() != a


def test_year_one_failures_within_three_standard_errors():
    rng = np.random.default_rng(11)
    hi = rng.uniform(0, 100, (400, 1))
    a = assumptions(horizon_years=1)
    p = a.failure_probability(hi[:, 0])
    iterations = 2000
    rep = simulate(TrajectorySet.from_hi(hi), a, 0, iterations, master_seed=12)
    se = math.sqrt(float(np.sum(p * (1 - p))) / iterations)
    assert abs(rep.failures[0] - p.sum()) < 3 * se


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 30))
def test_identity_holds_for_any_seed(seed, x):
    rep = simulate(mixed_fleet(30, 4), assumptions(horizon_years=4), x, 5, master_seed=seed)
    np.testing.assert_array_equal(rep.toc, rep.prc + rep.rrc + rep.fc)
    assert np.all(rep.failures <= 30 - min(x, 30))
