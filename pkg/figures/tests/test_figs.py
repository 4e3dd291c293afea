import json

import numpy as np
import pytest

from netfigs import (
    FigureSpec,
    SchemaError,
    read_field_csv,
    read_study,
    read_trajectory_csv,
    render,
)
from netfigs.cli import main_convergence, main_profile, main_trajectory
from netfigs.render import fit_order


def test_profile_symmetric_flat(exports, tmp_path):
    branches = read_field_csv(exports["field_csv"])
    for branch, (xs, vs) in branches.items():
        assert np.max(np.abs(vs - 3.0)) < 1e-4, branch
    out = tmp_path / "profile.png"
    spec = FigureSpec("profile", [exports["field_csv"]], str(out))
    assert render(spec) == str(out)
    assert out.stat().st_size > 0


def test_convergence_slope_matches_reported_order(exports, tmp_path):
    study = read_study(exports["study_csv"], exports["study_json"])
    slope = fit_order(study["epsilon"], study["sup_error"])
    reported = study["meta"]["empirical_order"]
    assert round(slope, 2) == round(reported, 2)
    assert np.all(np.diff(study["sup_error"]) < 0)  # decreasing curve
    out = tmp_path / "conv.png"
    render(FigureSpec("convergence", [exports["study_csv"]], str(out)))
    assert out.stat().st_size > 0


def test_render_deterministic_bytes(exports, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(FigureSpec("convergence", [exports["study_csv"]], str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_gap_figure(exports, tmp_path):
    out = tmp_path / "gap.png"
    render(FigureSpec("gap", [exports["study_csv"]], str(out)))
    assert out.stat().st_size > 0


def test_trajectory_sawtooth(exports, tmp_path):
    traj = read_trajectory_csv(exports["trajectory_csv"])
    assert np.sum(traj["switch"]) >= 2  # the forced cycle keeps switching
    assert np.min(traj["x"]) == pytest.approx(-0.1, abs=1e-6)
    assert np.max(traj["x"]) == pytest.approx(0.1, abs=1e-6)
    out = tmp_path / "traj.png"
    spec = FigureSpec(
        "trajectory", [exports["trajectory_csv"]], str(out),
        extra={"thresholds": [0.1]},
    )
    render(spec)
    assert out.stat().st_size > 0


def test_schema_mismatch_names_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    with pytest.raises(SchemaError) as err:
        read_field_csv(str(bad))
    msg = str(err.value)
    assert "branch,mode,x,value" in msg and "foo,bar" in msg
    with pytest.raises(SchemaError, match="epsilon,sup_error,junction_gap"):
        read_study(str(bad))
    with pytest.raises(SchemaError):
        read_trajectory_csv(str(bad))


def test_bad_kind_rejected(exports, tmp_path):
    with pytest.raises(ValueError, match="unknown figure kind"):
        FigureSpec("pie", [exports["study_csv"]], str(tmp_path / "x.png"))
    with pytest.raises(ValueError, match="input"):
        FigureSpec("profile", [], str(tmp_path / "x.png"))


def test_cli_profile_and_errors(exports, tmp_path, capsys):
    out = tmp_path / "cli.png"
    code = main_profile([exports["field_csv"], "--out", str(out)])
    assert code == 0
    assert capsys.readouterr().out.strip() == str(out)
    assert out.exists()

    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n")
    code = main_profile([str(bad), "--out", str(tmp_path / "no.png")])
    assert code == 1
    assert "branch,mode,x,value" in capsys.readouterr().err


def test_cli_convergence_with_json(exports, tmp_path, capsys):
    out = tmp_path / "conv.png"
    code = main_convergence(
        [exports["study_csv"], exports["study_json"], "--out", str(out),
         "--title", "custom title"]
    )
    assert code == 0
    assert out.exists()


def test_cli_trajectory_threshold_flag(exports, tmp_path):
    out = tmp_path / "traj.png"
    code = main_trajectory(
        [exports["trajectory_csv"], "--out", str(out), "--threshold", "0.1"]
    )
    assert code == 0
    assert out.exists()
