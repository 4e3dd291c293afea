import json

import pytest

from junctio.cli import main as junctio_main

SYMMETRIC = {
    "branches": [
        {"id": -1, "dynamics": "a", "cost": "3"},
        {"id": 1, "dynamics": "a", "cost": "3"},
    ],
    "controls": [-1, 0, 1],
    "lambda": 1.0,
    "domain_radius": 3.0,
    "grid_step": 0.02,
}

ASYMMETRIC = {
    "branches": [
        {"id": -1, "dynamics": "a", "cost": "1"},
        {"id": 1, "dynamics": "a", "cost": "2"},
    ],
    "controls": [-1, 0, 1],
    "lambda": 1.0,
    "domain_radius": 3.0,
    "grid_step": 0.02,
}


@pytest.fixture(scope="session")
def exports(tmp_path_factory):
    """CSV/JSON inputs produced once by the solver CLI at a coarse step."""
    root = tmp_path_factory.mktemp("exports")
    sym = root / "symmetric.json"
    sym.write_text(json.dumps(SYMMETRIC))
    asym = root / "asymmetric.json"
    asym.write_text(json.dumps(ASYMMETRIC))

    solve_dir = root / "solve"
    assert junctio_main(
        ["solve", str(sym), "--epsilon", "0.1", "--out", str(solve_dir)]
    ) == 0
    study_dir = root / "study"
    assert junctio_main(
        [
            "converge", str(asym), "--mode", "twofold",
            "--epsilons", "0.2,0.1,0.05", "--out", str(study_dir),
        ]
    ) == 0
    traj_dir = root / "traj"
    assert junctio_main(
        [
            "simulate", str(asym), "--epsilon", "0.1",
            "--start-mode", "1", "--start-x", "0.1",
            "--policy", "permode:1=-1,-1=1", "--horizon", "1.5",
            "--dt", "0.001", "--out", str(traj_dir),
        ]
    ) == 0
    return {
        "field_csv": str(solve_dir / "field.csv"),
        "study_csv": str(study_dir / "study.csv"),
        "study_json": str(study_dir / "study.json"),
        "trajectory_csv": str(traj_dir / "trajectory.csv"),
    }
