"""Numerical verification harness for the limit theory.

Turns the qualitative limit statements into measurable checks:
convergence of the thermostatic values to the assembled limit field,
finite-difference residuals for the junction HJB system (Ishii
conditions), the maximal-subsolution property, and solver-vs-simulation
consistency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hjb import (
    ValueField,
    build_tables,
    make_branch_grid,
    sl_sweep,
    solve_branch_dirichlet,
    solve_state_constraint,
    solve_thermostatic,
)
from .junction import assemble_limit, junction_value, u0_twofold, u123, u_pair
from .model import ThermostatConfig
from .relay import RelayState, best_rollout

__all__ = [
    "ConvergenceStudy",
    "ResidualReport",
    "CandidateVerdict",
    "run_convergence",
    "check_viscosity",
    "check_maximal_subsolution",
    "generate_candidates",
    "cross_check_dpp",
]


# ---------------------------------------------------------------------------
# Convergence studies


@dataclass
class ConvergenceStudy:
    """Sup-norm errors and junction gaps of the thermostatic values."""

    epsilons: list[float]
    thresholds: list[dict[int, float]]
    sup_errors: list[float]
    junction_gaps: list[float]
    junction_values: list[dict[int, float]]
    empirical_order: float
    matched_tag: str
    limit_value: float
    mode: str

    def __post_init__(self):
        if any(e2 >= e1 for e1, e2 in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if not all(math.isfinite(e) for e in self.sup_errors):
            raise ValueError("sup errors must be finite")

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epsilon,sup_error,junction_gap\n")
            for eps, err, gap in zip(self.epsilons, self.sup_errors, self.junction_gaps):
                fh.write(f"{eps:.12g},{err:.12g},{gap:.12g}\n")

    def to_dict(self):
        return {
            "mode": self.mode,
            "epsilons": self.epsilons,
            "thresholds": [{str(k): v for k, v in t.items()} for t in self.thresholds],
            "sup_errors": self.sup_errors,
            "junction_gaps": self.junction_gaps,
            "junction_values": [
                {str(k): v for k, v in jv.items()} for jv in self.junction_values
            ],
            "empirical_order": self.empirical_order,
            "matched_tag": self.matched_tag,
            "limit_value": self.limit_value,
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _family_thresholds(scenario, family, eps):
    """Threshold set for one epsilon of a named family.

    ``family`` is "uniform" or a per-branch exponent tuple such as
    (2, 1, 1) meaning thresholds (eps^2, eps, eps).
    """
    if family == "uniform":
        return ThermostatConfig.uniform(scenario, eps)
    if scenario.kind != "threefold":
        raise ValueError("anisotropic families need a threefold scenario")
    exps = tuple(family)
    if len(exps) != 3 or any(e not in (1, 2) for e in exps):
        raise ValueError(f"unsupported threshold family {family!r}")
    return ThermostatConfig.threefold(*(eps**e for e in exps))


def compute_v_sc(scenario, h=None, tol=1e-9):
    """State-constraint value fields per branch on the limit grids."""
    h = h or scenario.grid_step
    X = scenario.domain_radius
    fields = {}
    for b in scenario.branch_ids:
        if scenario.kind == "twofold" and b == -1:
            grid = make_branch_grid(-X, 0.0, h, pin=-X)
        else:
            grid = make_branch_grid(0.0, X, h)
        fields[b] = solve_state_constraint(scenario, b, grid, tol=tol)
    return fields


def limit_report_and_field(scenario, mode, h=None, tol=1e-9, sc_fields=None):
    """Junction report plus assembled limit field for one characterization."""
    sc_fields = sc_fields or compute_v_sc(scenario, h=h, tol=tol)
    v_sc = {b: f.value_at(b, 0.0) for b, f in sc_fields.items()}
    report = junction_value(scenario, mode, v_sc)
    sc_values = {b: f.values[b] for b, f in sc_fields.items()}
    limit = assemble_limit(
        scenario,
        report,
        h=h,
        tol=tol,
        sc_fields={b: sc_fields[b] for b in sc_fields},
    )
    return report, limit


def _sup_error(limit, thermo, branch_ids):
    worst = 0.0
    for b in branch_ids:
        xs = limit.grids[b].nodes
        approx = np.interp(xs, thermo.grids[b].nodes, thermo.values[b])
        worst = max(worst, float(np.max(np.abs(approx - limit.values[b]))))
    return worst


def run_convergence(scenario, mode, epsilons, family="uniform", h=None, tol=1e-8):
    """Solve the thermostatic system along an epsilon list and measure
    the distance to the assembled limit field.

    ``mode`` picks the limit characterization ("twofold",
    "threefold_uniform", "threefold_nonuniform"); for anisotropic
    families the study also reports which junction ingredient the
    computed values approach (``matched_tag``).
    """
    epsilons = sorted(set(float(e) for e in epsilons), reverse=True)
    report, limit = limit_report_and_field(scenario, mode, h=h)
    sup_errors = []
    gaps = []
    jvals = []
    thresholds = []
    for eps in epsilons:
        config = _family_thresholds(scenario, family, eps)
        thermo = solve_thermostatic(scenario, config, tol=tol, h=h)
        sup_errors.append(_sup_error(limit, thermo, scenario.branch_ids))
        vals = thermo.junction_values()
        jvals.append(vals)
        ids = scenario.branch_ids
        gaps.append(
            max(
                abs(vals[i] - vals[j])
                for k, i in enumerate(ids)
                for j in ids[k + 1 :]
            )
        )
        thresholds.append(dict(config.thresholds))
    # least-squares slope of log error vs log epsilon
    errs = np.maximum(sup_errors, 1e-300)
    order = float(np.polyfit(np.log(epsilons), np.log(errs), 1)[0]) if len(epsilons) > 1 else math.nan
    # which junction ingredient do the computed values approach?
    candidates = {f"sc({b})": v for b, v in report.v_sc.items()}
    if mode == "twofold":
        candidates["u0"] = report.u0
    else:
        candidates["123"] = report.u123
        candidates.update(report.u_pair)
    means = [float(np.mean(list(jv.values()))) for jv in jvals]
    if len(means) > 1:
        # linear-in-epsilon extrapolation from the two finest runs
        e1, e2 = epsilons[-2], epsilons[-1]
        v0 = means[-1] + (means[-2] - means[-1]) * (0 - e2) / (e1 - e2)
    else:
        v0 = means[-1]
    finite = {k: v for k, v in candidates.items() if math.isfinite(v)}
    matched = min(finite, key=lambda k: abs(finite[k] - v0))
    return ConvergenceStudy(
        epsilons=epsilons,
        thresholds=thresholds,
        sup_errors=sup_errors,
        junction_gaps=gaps,
        junction_values=jvals,
        empirical_order=order,
        matched_tag=matched,
        limit_value=report.v_junction,
        mode=mode,
    )


# ---------------------------------------------------------------------------
# Viscosity residuals


@dataclass
class ResidualReport:
    """Finite-difference residuals of the junction HJB system."""

    interior_residuals: dict[int, float]
    junction_min: float
    junction_max: float
    junction_slopes: dict[int, float]
    junction_value: float

    def to_dict(self):
        return {
            "interior_residuals": {str(k): v for k, v in self.interior_residuals.items()},
            "junction_min": self.junction_min,
            "junction_max": self.junction_max,
            "junction_slopes": {str(k): v for k, v in self.junction_slopes.items()},
            "junction_value": self.junction_value,
        }


def _interior_residual(scenario, branch_id, grid, V):
    """Sup over interior nodes of |lam V + H(x, DV)| with per-control
    upwind differences (forward where f > 0, backward where f < 0)."""
    lam = scenario.lam
    h = grid.step
    xs = grid.nodes
    b = scenario.branch(branch_id)
    fwd = (V[2:] - V[1:-1]) / h
    bwd = (V[1:-1] - V[:-2]) / h
    ham = np.full(grid.n - 2, -math.inf)
    xin = xs[1:-1]
    for a in scenario.controls:
        f = np.asarray(b.f(xin, a), dtype=float)
        f = np.broadcast_to(f, xin.shape)
        ell = np.broadcast_to(np.asarray(b.ell(xin, a), dtype=float), xin.shape)
        dv = np.where(f > 0, fwd, np.where(f < 0, bwd, 0.0))
        ham = np.maximum(ham, -f * dv - ell)
    return float(np.max(np.abs(lam * V[1:-1] + ham)))


def _junction_slope(scenario, field, branch_id):
    """One-sided derivative at the junction on the branch's own axis."""
    grid = field.grids[branch_id]
    V = field.values[branch_id]
    h = grid.step
    k = grid.index_of(0.0)
    if scenario.kind == "twofold" and branch_id == -1:
        return (V[k] - V[k - 1]) / h
    return (V[k + 1] - V[k]) / h


def _hamiltonian_at(scenario, branch_id, x, p):
    b = scenario.branch(branch_id)
    return max(
        -float(b.f(x, a)) * p - float(b.ell(x, a)) for a in scenario.controls
    )


def check_viscosity(scenario, field, fd_step=None):
    """Residual report for a network value field.

    Interior: sup |lam V + H_i(x, DV)| per branch, upwind differences.
    Junction: the Ishii expressions lam V(0) + H_i(0, d_i) with one-sided
    junction slopes d_i, reported as their min and max over branches.
    """
    interior = {}
    for b in field.branch_ids():
        interior[b] = _interior_residual(scenario, b, field.grids[b], field.values[b])
    has_junction = all(
        any(abs(x) < 1e-12 for x in field.grids[b].nodes) for b in field.branch_ids()
    )
    if has_junction:
        v0 = float(np.mean([field.junction_value(b) for b in field.branch_ids()]))
        slopes = {b: _junction_slope(scenario, field, b) for b in field.branch_ids()}
        exprs = [
            scenario.lam * v0 + _hamiltonian_at(scenario, b, 0.0, slopes[b])
            for b in field.branch_ids()
        ]
        jmin, jmax = min(exprs), max(exprs)
    else:
        slopes = {}
        jmin = jmax = math.nan
        v0 = math.nan
    return ResidualReport(
        interior_residuals=interior,
        junction_min=jmin,
        junction_max=jmax,
        junction_slopes=slopes,
        junction_value=v0,
    )


# ---------------------------------------------------------------------------
# Maximal subsolution


@dataclass
class CandidateVerdict:
    name: str
    subsolution_ok: bool
    reason: str
    dominated: bool | None
    max_excess: float | None

    def to_dict(self):
        return {
            "name": self.name,
            "subsolution_ok": self.subsolution_ok,
            "reason": self.reason,
            "dominated": self.dominated,
            "max_excess": self.max_excess,
        }


def _scheme_subsolution_gap(scenario, candidate):
    """Max over nodes of u - S[u] for one monotone-scheme sweep per branch.

    A discrete subsolution satisfies u <= S[u] + O(h^2) node-wise; the
    junction coupling is checked separately.
    """
    worst = -math.inf
    for b in candidate.branch_ids():
        grid = candidate.grids[b]
        F, L = build_tables(scenario, b, grid)
        u = candidate.values[b]
        swept = sl_sweep(grid, F, L, scenario.lam, float(np.max(u)) + 1.0, u)
        worst = max(worst, float(np.max(u - swept)))
    return worst


def _junction_pair_ok(scenario, u0, i, j, p_lo, p_hi, slope_j, tol, n_samples):
    """C1-test-function sweep across the branch pair (i, j).

    A test slope p on branch i's axis is admissible when p in
    [p_lo, p_hi]; ``slope_j`` maps p to the slope seen by branch j. For
    every sampled p the smaller of the two Ishii expressions must be
    <= tol; an empty interval (convex kink) admits no test function.
    """
    lam = scenario.lam
    if p_lo > p_hi:
        return True
    for p in np.linspace(p_lo, p_hi, n_samples):
        gi = lam * u0 + _hamiltonian_at(scenario, i, 0.0, p)
        gj = lam * u0 + _hamiltonian_at(scenario, j, 0.0, slope_j(p))
        if min(gi, gj) > tol:
            return False
    return True


def _junction_subsolution_ok(scenario, candidate, variant, tol, n_samples=101):
    """Junction-side subsolution pre-check, variant dependent."""
    ids = candidate.branch_ids()
    vals = [candidate.junction_value(b) for b in ids]
    if max(vals) - min(vals) > tol:
        return False, "discontinuous at junction"
    u0 = float(np.mean(vals))
    slopes = {b: _junction_slope(scenario, candidate, b) for b in ids}
    if variant == "twofold":
        # both branches share the signed axis: admissible test slopes run
        # from the right derivative up to the left derivative
        ok = _junction_pair_ok(
            scenario, u0, 1, -1, slopes[1], slopes[-1], lambda p: p, tol, n_samples
        )
        return ok, "" if ok else "junction pair (-1,1) violates the subsolution sweep"
    if variant == "threefold_uniform":
        # the uniform-threshold subsolution class admits only full-cycle
        # test functions at the junction, which bounds the junction value
        # by the triple cycle cost; pairwise cycles are not admissible
        bound = u123(scenario)[0]
        if math.isfinite(bound) and u0 > bound + tol:
            return False, f"junction value {u0:.6g} above cycle bound {bound:.6g}"
        exprs = [
            scenario.lam * u0 + _hamiltonian_at(scenario, b, 0.0, slopes[b])
            for b in ids
        ]
        ok = min(exprs) <= tol
        return ok, "" if ok else "junction min expression positive"
    if variant == "threefold_nonuniform":
        for i, j in ((1, 2), (1, 3), (2, 3)):
            # branch j glued to branch i's negative axis: its native slope
            # is the negated test slope, admissible for p in [d_i, -d_j]
            ok = _junction_pair_ok(
                scenario, u0, i, j, slopes[i], -slopes[j], lambda p: -p, tol, n_samples
            )
            if not ok:
                return False, f"junction pair ({i},{j}) violates the subsolution sweep"
        return True, ""
    raise ValueError(f"unknown variant {variant!r}")


def check_maximal_subsolution(scenario, field, candidates, variant, tol):
    """Verify candidate ≤ field for every discrete subsolution candidate.

    ``candidates`` maps name -> ValueField on the same grids as ``field``.
    Candidates failing the subsolution pre-check (interior monotone-scheme
    inequality plus the junction condition of the given ``variant``) are
    excluded and reported with the failing reason.
    """
    verdicts = []
    for name, cand in candidates.items():
        gap = _scheme_subsolution_gap(scenario, cand)
        if gap > tol:
            verdicts.append(
                CandidateVerdict(name, False, f"interior gap {gap:.3e} > tol", None, None)
            )
            continue
        ok, reason = _junction_subsolution_ok(scenario, cand, variant, tol)
        if not ok:
            verdicts.append(CandidateVerdict(name, False, reason, None, None))
            continue
        excess = max(
            float(np.max(cand.values[b] - field.values[b])) for b in field.branch_ids()
        )
        verdicts.append(
            CandidateVerdict(name, True, "", bool(excess <= tol), excess)
        )
    return verdicts


def _bump(xs, center, width, height):
    return height * np.exp(-(((xs - center) / width) ** 2))


def generate_candidates(scenario, field, variant, n_constants=10):
    """Standard candidate battery for the maximal-subsolution check.

    Recipes: (i) constants below the cheapest standing cost, (ii) the
    field minus nonnegative smooth bumps (proportional shrinkages and
    localized bumps), (iii) branch-wise solutions with alternative
    junction data (other pairwise/triple cycle values).
    """
    floor = math.inf
    for b in scenario.branches:
        for a in scenario.controls:
            xs = field.grids[b.id].nodes
            floor = min(floor, float(np.min(b.ell(xs, a))))
    c_max = floor / scenario.lam
    out = {"field_itself": field.copy()}
    for k in range(n_constants):
        c = c_max * k / (n_constants - 1)
        out[f"const_{k}"] = ValueField(
            grids=dict(field.grids),
            values={b: np.full(field.grids[b].n, c) for b in field.branch_ids()},
            metadata={"kind": "candidate_const", "c": c},
        )
    # proportional shrinkage: convex combination with the zero subsolution
    for k, theta in enumerate((0.05, 0.15, 0.3, 0.5, 0.75)):
        out[f"shrink_{k}"] = ValueField(
            grids=dict(field.grids),
            values={b: (1 - theta) * field.values[b] for b in field.branch_ids()},
            metadata={"kind": "candidate_shrink", "theta": theta},
        )
    # localized bumps subtracted away from the junction
    X = scenario.domain_radius
    span = max(abs(v) for b in field.branch_ids() for v in
               (float(np.max(field.values[b])), 1.0))
    for k, (center, width, height) in enumerate(
        ((X / 2, X / 2, 0.02 * span), (X / 3, X / 2, 0.05 * span),
         (2 * X / 3, X, 0.03 * span), (X / 2, X, 0.1 * span))
    ):
        values = {}
        for b in field.branch_ids():
            xs = field.grids[b].nodes
            bump = _bump(np.abs(xs), center, width, height)
            values[b] = np.maximum(field.values[b] - bump, 0.0)
        out[f"bump_{k}"] = ValueField(
            grids=dict(field.grids),
            values=values,
            metadata={"kind": "candidate_bump"},
        )
    # alternative junction data (threefold: other sigma cycles; twofold: u0)
    data = {}
    if scenario.kind == "twofold":
        data["u0"] = u0_twofold(scenario)[0]
    else:
        data["123"] = u123(scenario)[0]
        for i, j in ((1, 2), (1, 3), (2, 3)):
            data[f"{i}{j}"] = u_pair(scenario, i, j)[0]
    for tag, datum in data.items():
        if not math.isfinite(datum):
            continue
        values = {}
        for b in field.branch_ids():
            grid = field.grids[b]
            side = "right" if (scenario.kind == "twofold" and b == -1) else "left"
            fld = solve_branch_dirichlet(scenario, b, grid, datum, exit_side=side)
            values[b] = fld.values[b]
        out[f"sigma_{tag}"] = ValueField(
            grids=dict(field.grids),
            values=values,
            metadata={"kind": "candidate_sigma", "sigma": tag, "datum": datum},
        )
    return out


# ---------------------------------------------------------------------------
# Solver vs simulation


def cross_check_dpp(
    scenario,
    config,
    n_starts=50,
    seed=0,
    horizon=25.0,
    dt=0.02,
    switch_budget=2,
    n_durations=4,
    h=None,
    field=None,
):
    """Worst gap (solver value − rollout cost) over sampled starts.

    Rollout costs are upper bounds on the thermostatic value, so the gap
    should not exceed the scheme tolerance plus the truncation tail.
    Returns (worst_gap, details list).
    """
    if field is None:
        field = solve_thermostatic(scenario, config, h=h)
    rng = np.random.default_rng(seed)
    ids = field.branch_ids()
    worst = -math.inf
    details = []
    for _ in range(n_starts):
        mode = ids[rng.integers(len(ids))]
        grid = field.grids[mode]
        # restrict to the solver-accurate core of the domain
        xs = grid.nodes
        usable = np.nonzero(np.abs(xs) <= min(scenario.domain_radius - 0.5, 2.0))[0]
        k = int(usable[rng.integers(len(usable))])
        start = RelayState(mode=mode, position=float(xs[k]))
        _, cost = best_rollout(
            scenario,
            config,
            start,
            horizon,
            dt,
            switch_budget=switch_budget,
            n_durations=n_durations,
        )
        gap = float(field.values[mode][k]) - cost
        worst = max(worst, gap)
        details.append({"mode": mode, "x": start.position, "solver": float(field.values[mode][k]), "rollout": cost, "gap": gap})
    return worst, details
