import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from junctio.model import (
    ScenarioError,
    ThermostatConfig,
    load_scenario,
    scenario_from_dict,
    validate_scenario,
)


def _doc(**over):
    doc = {
        "branches": [
            {"id": -1, "dynamics": "a", "cost": "1"},
            {"id": 1, "dynamics": "a", "cost": "2"},
        ],
        "controls": [-1, 0, 1],
        "lambda": 1.0,
        "domain_radius": 3.0,
        "grid_step": 0.01,
    }
    doc.update(over)
    return doc


def test_controllability_true_for_f_equals_a():
    report = validate_scenario(scenario_from_dict(_doc()))
    assert report.all_controllable
    assert report.dynamics_bound == 1.0


def test_controllability_false_for_square_dynamics():
    doc = _doc(branches=[
        {"id": -1, "dynamics": "a * a", "cost": "1"},
        {"id": 1, "dynamics": "a * a", "cost": "1"},
    ])
    report = validate_scenario(scenario_from_dict(doc))
    assert not report.all_controllable


def test_cost_negativity_reported_not_raised():
    doc = _doc(branches=[
        {"id": -1, "dynamics": "a", "cost": "1"},
        {"id": 1, "dynamics": "a", "cost": "x - 1"},
    ])
    report = validate_scenario(scenario_from_dict(doc))
    assert not report.branch(1).cost_nonnegative
    assert report.branch(1).cost_min < 0


def test_validation_deterministic():
    s = scenario_from_dict(_doc())
    assert validate_scenario(s).to_dict() == validate_scenario(s).to_dict()


def test_lipschitz_estimate_nondecreasing_under_refinement():
    # nested grids only add secant pairs, so the estimate can only grow
    doc = _doc(branches=[
        {"id": -1, "dynamics": "exp(-x * x) * a", "cost": "1"},
        {"id": 1, "dynamics": "exp(-x * x) * a", "cost": "1"},
    ])
    coarse = validate_scenario(scenario_from_dict(dict(doc, grid_step=0.5)))
    fine = validate_scenario(scenario_from_dict(dict(doc, grid_step=0.25)))
    for b in (-1, 1):
        assert fine.branch(b).lipschitz_estimate >= coarse.branch(b).lipschitz_estimate - 1e-12


def test_unknown_keys_rejected():
    with pytest.raises(ScenarioError, match="unknown scenario keys"):
        scenario_from_dict(_doc(extra=1))
    doc = _doc()
    doc["branches"][0]["typo"] = 1
    with pytest.raises(ScenarioError, match="unknown branch keys"):
        scenario_from_dict(doc)


def test_missing_keys_rejected():
    doc = _doc()
    del doc["lambda"]
    with pytest.raises(ScenarioError, match="missing scenario keys"):
        scenario_from_dict(doc)


def test_bad_branch_ids_rejected():
    doc = _doc(branches=[
        {"id": 1, "dynamics": "a", "cost": "1"},
        {"id": 2, "dynamics": "a", "cost": "1"},
    ])
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_load_scenario_round_trip(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(_doc()))
    s = load_scenario(path)
    assert s.kind == "twofold"
    assert s.content_hash() == scenario_from_dict(_doc()).content_hash()


def test_load_scenario_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario(path)


def test_control_set_sorted_dedup():
    s = scenario_from_dict(_doc(controls=[1, -1, 0, 1, 0]))
    assert s.controls.values == (-1.0, 0.0, 1.0)


def test_thermostat_twofold_requires_equal_thresholds():
    with pytest.raises(ScenarioError):
        ThermostatConfig({-1: 0.1, 1: 0.2})
    cfg = ThermostatConfig.twofold(0.1)
    assert cfg.kind == "twofold"
    assert cfg.next_mode(1) == -1


def test_thermostat_threefold_cycle():
    cfg = ThermostatConfig.threefold(0.1, 0.1, 0.01, order=(1, 3, 2))
    assert cfg.next_mode(1) == 3
    assert cfg.next_mode(3) == 2
    assert cfg.next_mode(2) == 1
    with pytest.raises(ScenarioError):
        ThermostatConfig.threefold(0.1, 0.1, 0.1, order=(1, 1, 2))
    with pytest.raises(ScenarioError):
        ThermostatConfig.threefold(-0.1, 0.1, 0.1)


def test_thermostat_check_against():
    s = scenario_from_dict(_doc())
    with pytest.raises(ScenarioError):
        ThermostatConfig.twofold(5.0).check_against(s)
    ThermostatConfig.twofold(0.1).check_against(s)


@given(st.floats(0.01, 1.0))
def test_uniform_constructor(eps):
    s = scenario_from_dict(_doc(domain_radius=3.0))
    cfg = ThermostatConfig.uniform(s, eps)
    assert set(cfg.thresholds.values()) == {eps}
