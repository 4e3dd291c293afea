"""Acceptance suite: one test per headline guarantee, pinned tolerances.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible with
``pytest -s``) before asserting, so a full run doubles as a checklist.
All solves use the production grid step H = 1e-3 unless a criterion
needs a coarser companion run, in which case the coarser step is stated
inline with its own tolerance.
"""

import math
import sys
import time

import numpy as np
import pytest

from junctio.hjb import make_branch_grid, solve_state_constraint, solve_thermostatic
from junctio.junction import cycle_value, mu_threefold
from junctio.model import ThermostatConfig, scenario_from_dict
from junctio.relay import RelayState, simulate
from junctio.verify import (
    check_maximal_subsolution,
    check_viscosity,
    cross_check_dpp,
    generate_candidates,
    limit_report_and_field,
)

from corpus import ORACLE, THREEFOLD_CYCLE, TWOFOLD_ASYM

H = 1e-3                     # production grid step
C_TWOFOLD = 2.0              # epsilon-rate constant, twofold scenario
C_THREEFOLD = 100.0          # epsilon-rate constant, threefold scenario (cost scale)
C1 = 5.0                     # interior residual constant, calibrated on the oracle


def _line(ok, name, detail):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}: {detail}", file=sys.stderr)


def _curvature_tol(field, h, c=C1):
    curv = 0.0
    for b in field.branch_ids():
        v = field.values[b]
        if len(v) >= 3:
            curv = max(curv, float(np.max(np.abs(v[2:] - 2 * v[1:-1] + v[:-2]) / h**2)))
    return c * h * max(1.0, curv / 2.0)


@pytest.fixture(scope="module")
def twofold():
    return scenario_from_dict(TWOFOLD_ASYM)


@pytest.fixture(scope="module")
def threefold():
    return scenario_from_dict(THREEFOLD_CYCLE)


@pytest.fixture(scope="module")
def oracle():
    return scenario_from_dict(ORACLE)


@pytest.fixture(scope="module")
def twofold_limits(twofold):
    return limit_report_and_field(twofold, "twofold", h=H)


@pytest.fixture(scope="module")
def threefold_limits(threefold):
    return {
        variant: limit_report_and_field(threefold, variant, h=H)
        for variant in ("threefold_uniform", "threefold_nonuniform")
    }


def test_analytic_oracle_accuracy_and_speed(oracle):
    # warm the compiled kernels on a tiny grid so the timing below
    # measures the solve itself, not one-time compilation
    solve_state_constraint(oracle, 1, make_branch_grid(0.0, 0.1, 0.01))
    grid = make_branch_grid(0.0, 5.0, H)
    t0 = time.perf_counter()
    fld = solve_state_constraint(oracle, 1, grid)
    elapsed = time.perf_counter() - t0
    xs = grid.nodes
    err = float(np.max(np.abs(fld.values[1] - (xs - 1 + np.exp(-xs)))))
    ok = err <= 5 * H and elapsed < 5.0
    _line(ok, "analytic oracle", f"sup error {err:.3e} <= {5*H:.0e}, {elapsed:.2f}s < 5s")
    assert err <= 5 * H
    assert elapsed < 5.0


def test_twofold_limit_rate(twofold):
    epsilons = (0.2, 0.1, 0.05, 0.025)
    gaps = []
    worst = 0.0
    for eps in epsilons:
        fld = solve_thermostatic(twofold, ThermostatConfig.twofold(eps), h=H)
        v1, vm = fld.junction_value(1), fld.junction_value(-1)
        bound = C_TWOFOLD * eps + 5 * H
        worst = max(worst, max(abs(v1 - 1.0), abs(vm - 1.0)) / bound)
        gaps.append(abs(v1 - vm))
        assert abs(v1 - 1.0) <= bound and abs(vm - 1.0) <= bound, (eps, v1, vm)
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    _line(
        decreasing and worst <= 1.0,
        "twofold limit",
        f"max |V_eps(0,i)-1| / (C eps + 5h) = {worst:.2f}, gaps {gaps}",
    )
    assert decreasing


def test_mu_formulas_exact_and_normalized():
    assert mu_threefold(-1.0, -1.0, -1.0) == (1 / 3, 1 / 3, 1 / 3)
    assert mu_threefold(-1.0, -2.0, -2.0) == (0.5, 0.25, 0.25)
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(1000):
        f = -rng.uniform(1e-3, 10.0, 3)
        worst = max(worst, abs(sum(mu_threefold(*f)) - 1.0))
    ok = worst <= 1e-12
    _line(ok, "mu formulas", f"exact values, worst weight-sum deviation {worst:.2e}")
    assert worst <= 1e-12


def test_threefold_uniform_vs_nonuniform(threefold, threefold_limits):
    epsilons = (0.2, 0.1, 0.05)
    targets = {"uniform": 34.0, (2, 1, 1): 1.0}
    t0 = time.perf_counter()
    worst = 0.0
    for family, target in targets.items():
        for eps in epsilons:
            if family == "uniform":
                cfg = ThermostatConfig.threefold(eps, eps, eps)
            else:
                cfg = ThermostatConfig.threefold(eps**2, eps, eps)
            fld = solve_thermostatic(threefold, cfg, h=H)
            bound = C_THREEFOLD * eps + 5 * H
            for b in (1, 2, 3):
                dev = abs(fld.junction_value(b) - target)
                worst = max(worst, dev / bound)
                assert dev <= bound, (family, eps, b, fld.junction_value(b))
    elapsed = time.perf_counter() - t0
    uni_report, _ = threefold_limits["threefold_uniform"]
    non_report, _ = threefold_limits["threefold_nonuniform"]
    argmins_ok = uni_report.argmin == ["123"] and non_report.argmin == ["23"]
    ok = worst <= 1.0 and argmins_ok and elapsed < 60.0
    _line(
        ok,
        "threefold limits",
        f"max dev ratio {worst:.2f}, argmin {uni_report.argmin}/{non_report.argmin}, "
        f"sweep {elapsed:.1f}s < 60s",
    )
    assert argmins_ok
    assert elapsed < 60.0


def test_cycle_closed_form(twofold):
    controls = {1: -1.0, -1: 1.0}
    cfg = ThermostatConfig.twofold(0.1)
    cv = cycle_value(twofold, cfg, controls)
    horizon = 15.0  # tail 2 e^{-15} ~ 6e-7, inside the 1e-4 budget
    rec = simulate(twofold, cfg, RelayState(1, 0.1), controls, horizon, 0.01)
    mismatch = abs(rec.discounted_cost - cv.threshold_values[1])
    assert mismatch <= 1e-4

    sups = []
    for eps in (0.1, 0.05, 0.025):
        cve = cycle_value(twofold, ThermostatConfig.twofold(eps), controls)
        xs = np.linspace(-eps, eps, 201)
        sups.append(
            max(abs(cve.derivative(x, 1) - cve.derivative(x, -1)) for x in xs)
        )
    decreasing = sups[0] > sups[1] > sups[2]
    assert decreasing

    # linear-in-epsilon extrapolation of the one-sided derivatives at 0
    e1, e2 = 0.05, 0.025
    worst_dev = 0.0
    for mode in (1, -1):
        d1 = cycle_value(twofold, ThermostatConfig.twofold(e1), controls).derivative(0.0, mode)
        d2 = cycle_value(twofold, ThermostatConfig.twofold(e2), controls).derivative(0.0, mode)
        d0 = d2 + (d1 - d2) * (0 - e2) / (e1 - e2)
        worst_dev = max(worst_dev, abs(d0 - 0.5))
    ok = mismatch <= 1e-4 and decreasing and worst_dev <= 1e-3
    _line(
        ok,
        "cycle closed form",
        f"sim mismatch {mismatch:.2e} <= 1e-4, deriv sups {sups}, "
        f"extrapolated deviation {worst_dev:.2e} <= 1e-3",
    )
    assert worst_dev <= 1e-3


def test_ishii_residuals(oracle, twofold, threefold, twofold_limits, threefold_limits):
    # calibration: the analytic oracle meets the plain c1 h bound
    grid = make_branch_grid(0.0, 5.0, H)
    sc = solve_state_constraint(oracle, 1, grid)
    calib = check_viscosity(oracle, sc).interior_residuals[1]
    assert calib <= C1 * H, f"calibration residual {calib:.3e} exceeds c1 h"

    fields = [("twofold", twofold, twofold_limits[1])]
    fields += [(v, threefold, threefold_limits[v][1]) for v in threefold_limits]
    worst = 0.0
    for name, scenario, limit in fields:
        tol = _curvature_tol(limit, H)
        rr = check_viscosity(scenario, limit)
        for b, r in rr.interior_residuals.items():
            worst = max(worst, r / tol)
            assert r <= tol, (name, b, r, tol)
        assert rr.junction_min <= tol, (name, rr.junction_min)
        assert rr.junction_max >= -tol, (name, rr.junction_max)

    # negative control: one corrupted node must break the interior bound
    bad = twofold_limits[1].copy()
    bad.values[1][len(bad.values[1]) // 2] += 1.0
    tol = _curvature_tol(twofold_limits[1], H)
    corrupted = max(check_viscosity(twofold, bad).interior_residuals.values())
    assert corrupted > tol
    _line(
        True,
        "Ishii residuals",
        f"calibration {calib:.2e} <= {C1*H:.0e}, worst residual ratio {worst:.2f}, "
        f"corrupted control {corrupted:.2f} > tol",
    )


def test_maximal_subsolution(twofold, threefold, twofold_limits, threefold_limits):
    cases = [("twofold", twofold, twofold_limits[1])]
    cases += [(v, threefold, threefold_limits[v][1]) for v in threefold_limits]
    summary = []
    for variant, scenario, limit in cases:
        tol = _curvature_tol(limit, H)
        cands = generate_candidates(scenario, limit, variant)
        assert len(cands) >= 20, (variant, len(cands))
        verdicts = check_maximal_subsolution(scenario, limit, cands, variant, tol)
        for v in verdicts:
            if v.subsolution_ok:
                assert v.dominated, (variant, v.name, v.max_excess)
        itself = next(v for v in verdicts if v.name == "field_itself")
        assert itself.subsolution_ok and itself.max_excess <= tol
        n_ok = sum(v.subsolution_ok for v in verdicts)
        summary.append(f"{variant}: {n_ok}/{len(verdicts)} subsolutions, all dominated")
    _line(True, "maximal subsolution", "; ".join(summary))


def test_order_independence(threefold):
    eps = 0.05
    orders = [(1, 2, 3), (2, 3, 1), (3, 1, 2), (1, 3, 2)]
    values = []
    for order in orders:
        cfg = ThermostatConfig.threefold(eps, eps, eps, order=order)
        fld = solve_thermostatic(threefold, cfg, h=H)
        values.append(float(np.mean([fld.junction_value(b) for b in (1, 2, 3)])))
    spread = max(values) - min(values)
    bound = C_THREEFOLD * eps + 5 * H
    ok = spread <= bound
    _line(ok, "order independence", f"junction spread {spread:.3f} <= {bound:.3f}")
    assert spread <= bound


def test_solver_simulation_consistency(twofold, threefold):
    # twofold at h = 1e-2: scheme tolerance 5h * cost scale 2
    h2 = 1e-2
    horizon = 25.0
    cfg2 = ThermostatConfig.twofold(0.1)
    worst2, details2 = cross_check_dpp(twofold, cfg2, h=h2, horizon=horizon)
    tol2 = 5 * h2 * 2.0 + 2.0 * math.exp(-horizon)
    assert len(details2) == 50
    assert worst2 <= tol2, (worst2, tol2)

    cfg3 = ThermostatConfig.threefold(0.1, 0.1, 0.1)
    worst3, details3 = cross_check_dpp(threefold, cfg3, h=H, horizon=horizon)
    tol3 = 5 * H * 100.0 + 1000.0 * math.exp(-horizon)
    assert len(details3) == 50
    assert worst3 <= tol3, (worst3, tol3)
    _line(
        True,
        "solver vs simulation",
        f"twofold worst gap {worst2:.3f} <= {tol2:.3f}, "
        f"threefold worst gap {worst3:.3f} <= {tol3:.3f} (50 starts each)",
    )
