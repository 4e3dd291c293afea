"""Closed-form junction analysis for the epsilon -> 0 limit.

Feasible control combinations at the junction generate switching cycles
whose time-fraction weights convexify dynamics and cost; the junction
value of the limit problem is the minimum of the convexified cycle costs
and the per-branch state-constraint values.

Conventions: the twofold network uses the signed axis, so "toward the
junction" means f_{-1}(0, a) >= 0 on branch -1 and f_1(0, a) <= 0 on
branch 1. Threefold branches all use f_i(0, a) <= 0 for inward motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hjb import make_branch_grid, solve_branch_dirichlet, solve_state_constraint, ValueField

__all__ = [
    "FeasibleCombo",
    "JunctionReport",
    "CycleValue",
    "JunctionError",
    "mu_twofold",
    "mu_threefold",
    "u0_twofold",
    "u123",
    "u_pair",
    "junction_value",
    "assemble_limit",
    "cycle_value",
]

INFEASIBLE = math.inf
_TIE_RTOL = 1e-10


class JunctionError(ValueError):
    """Invalid junction computation input."""


@dataclass(frozen=True)
class FeasibleCombo:
    """One admissible junction cycle: controls, weights, and its cost."""

    controls: tuple[float, ...]
    weights: tuple[float, ...]
    sigma: str  # scope tag: "2fold", "123", "12", "13", "23", or "rest(i)"
    cycle_cost: float

    def to_dict(self):
        return {
            "controls": list(self.controls),
            "weights": list(self.weights),
            "sigma": self.sigma,
            "cycle_cost": self.cycle_cost,
        }


def mu_twofold(f_minus, f_plus):
    """Weight mu solving mu*f_minus + (1 - mu)*f_plus = 0.

    ``f_minus`` is the branch -1 dynamics at 0 (>= 0, toward the
    junction), ``f_plus`` the branch 1 dynamics (<= 0).
    """
    if f_minus < 0 or f_plus > 0:
        raise JunctionError(f"need f_minus >= 0 >= f_plus, got ({f_minus}, {f_plus})")
    if f_minus == 0 and f_plus == 0:
        raise JunctionError("both dynamics zero: excluded combination")
    return f_plus / (f_plus - f_minus)


def mu_threefold(f1, f2, f3):
    """Time-fraction weights of the full three-branch cycle.

    All dynamics values must be <= 0 (inward) with at most one zero;
    mu_i = f_j * f_k / (f2*f3 + f1*f3 + f1*f2), summing to 1.
    """
    fs = (f1, f2, f3)
    if any(f > 0 for f in fs):
        raise JunctionError(f"inward dynamics must be <= 0, got {fs}")
    if sum(1 for f in fs if f == 0) >= 2:
        raise JunctionError("at most one zero dynamics value allowed")
    D = f2 * f3 + f1 * f3 + f1 * f2
    return (f2 * f3 / D, f1 * f3 / D, f1 * f2 / D)


def _rest_value(scenario, branch_id):
    """Cheapest standing-still cost at the junction on one branch, / lam."""
    b = scenario.branch(branch_id)
    best = INFEASIBLE
    best_a = None
    for a in scenario.controls:
        if float(b.f(0.0, a)) == 0.0:
            v = float(b.ell(0.0, a)) / scenario.lam
            if v < best:
                best, best_a = v, a
    return best, best_a


def u0_twofold(scenario):
    """Minimal convexified junction cost over feasible twofold pairs.

    Returns (value, argmin combo); (inf, None) when no pair is feasible.
    """
    if scenario.kind != "twofold":
        raise JunctionError("u0_twofold needs a twofold scenario")
    bm = scenario.branch(-1)
    bp = scenario.branch(1)
    lam = scenario.lam
    best = INFEASIBLE
    combo = None
    for am in scenario.controls:
        fm = float(bm.f(0.0, am))
        if fm < 0:
            continue
        for ap in scenario.controls:
            fp = float(bp.f(0.0, ap))
            if fp > 0 or (fm == 0 and fp == 0):
                continue
            mu = mu_twofold(fm, fp)
            cost = (mu * float(bm.ell(0.0, am)) + (1 - mu) * float(bp.ell(0.0, ap))) / lam
            if cost < best:
                best = cost
                combo = FeasibleCombo((am, ap), (mu, 1 - mu), "2fold", cost)
    return best, combo


def u123(scenario):
    """Minimal convexified cost of the full threefold cycle.

    Standing-still controls (f_i(0, a) = 0) are also admitted as
    degenerate cycles, so non-compact feasible sets are never undercut.
    """
    if scenario.kind != "threefold":
        raise JunctionError("u123 needs a threefold scenario")
    lam = scenario.lam
    best = INFEASIBLE
    combo = None
    branches = [scenario.branch(i) for i in (1, 2, 3)]
    for a1 in scenario.controls:
        f1 = float(branches[0].f(0.0, a1))
        if f1 > 0:
            continue
        for a2 in scenario.controls:
            f2 = float(branches[1].f(0.0, a2))
            if f2 > 0:
                continue
            for a3 in scenario.controls:
                f3 = float(branches[2].f(0.0, a3))
                if f3 > 0 or sum(1 for f in (f1, f2, f3) if f == 0) >= 2:
                    continue
                mus = mu_threefold(f1, f2, f3)
                ells = (
                    float(branches[0].ell(0.0, a1)),
                    float(branches[1].ell(0.0, a2)),
                    float(branches[2].ell(0.0, a3)),
                )
                cost = sum(m * l for m, l in zip(mus, ells)) / lam
                if cost < best:
                    best = cost
                    combo = FeasibleCombo((a1, a2, a3), mus, "123", cost)
    for i in (1, 2, 3):
        rest, a = _rest_value(scenario, i)
        if rest < best:
            best = rest
            combo = FeasibleCombo((a,), (1.0,), f"rest({i})", rest)
    return best, combo


def u_pair(scenario, i, j):
    """Minimal convexified cost of the two-branch cycle on branches i, j.

    Weights are time fractions: mubar_i = |f_j| / (|f_i| + |f_j|).
    Standing-still controls on branch i or j are admitted as above.
    """
    if scenario.kind != "threefold":
        raise JunctionError("u_pair needs a threefold scenario")
    if i == j or {i, j} - {1, 2, 3}:
        raise JunctionError(f"invalid branch pair ({i}, {j})")
    lam = scenario.lam
    bi = scenario.branch(i)
    bj = scenario.branch(j)
    best = INFEASIBLE
    combo = None
    tag = f"{min(i, j)}{max(i, j)}"
    for ai in scenario.controls:
        fi = float(bi.f(0.0, ai))
        if fi > 0:
            continue
        for aj in scenario.controls:
            fj = float(bj.f(0.0, aj))
            if fj > 0 or (fi == 0 and fj == 0):
                continue
            wi = abs(fj) / (abs(fi) + abs(fj))
            cost = (wi * float(bi.ell(0.0, ai)) + (1 - wi) * float(bj.ell(0.0, aj))) / lam
            if cost < best:
                best = cost
                combo = FeasibleCombo((ai, aj), (wi, 1 - wi), tag, cost)
    for b in (i, j):
        rest, a = _rest_value(scenario, b)
        if rest < best:
            best = rest
            combo = FeasibleCombo((a,), (1.0,), f"rest({b})", rest)
    return best, combo


@dataclass
class JunctionReport:
    """All junction scalars and the provenance of the limit value."""

    mode: str  # "twofold" | "threefold_uniform" | "threefold_nonuniform"
    u0: float
    u123: float | None
    u_pair: dict[str, float]
    v_sc: dict[int, float]
    v_junction: float
    argmin: list[str]
    combos: dict[str, FeasibleCombo]

    def to_dict(self):
        return {
            "mode": self.mode,
            "u0": self.u0,
            "u123": self.u123,
            "u_pair": dict(self.u_pair),
            "v_sc": {str(k): v for k, v in self.v_sc.items()},
            "v_junction": self.v_junction,
            "argmin": list(self.argmin),
            "combos": {k: c.to_dict() for k, c in self.combos.items()},
        }


def _minimizers(entries):
    """Tags of all entries within relative tolerance of the minimum."""
    finite = {k: v for k, v in entries.items() if math.isfinite(v)}
    if not finite:
        return math.inf, list(entries)
    vmin = min(finite.values())
    scale = max(abs(vmin), 1.0)
    tags = [k for k, v in finite.items() if v - vmin <= _TIE_RTOL * scale]
    return vmin, tags


def junction_value(scenario, mode, v_sc):
    """Junction value of the limit problem and its argmin provenance.

    ``mode`` selects the characterization: "twofold",
    "threefold_uniform" (full cycle only), or "threefold_nonuniform"
    (pairwise cycles admitted as well). ``v_sc`` maps branch id to its
    state-constraint value at 0.
    """
    combos = {}
    pair_vals = {}
    u123_val = None
    if mode == "twofold":
        if scenario.kind != "twofold":
            raise JunctionError("scenario/mode mismatch")
        u0, c0 = u0_twofold(scenario)
        if c0 is not None:
            combos[c0.sigma] = c0
        entries = {"u0": u0}
    elif mode in ("threefold_uniform", "threefold_nonuniform"):
        if scenario.kind != "threefold":
            raise JunctionError("scenario/mode mismatch")
        u123_val, c123 = u123(scenario)
        if c123 is not None:
            combos["123"] = c123
        if mode == "threefold_uniform":
            u0 = u123_val
            entries = {"123": u123_val}
        else:
            cand = {"123": u123_val}
            for i, j in ((1, 2), (1, 3), (2, 3)):
                tag = f"{i}{j}"
                pair_vals[tag], cp = u_pair(scenario, i, j)
                cand[tag] = pair_vals[tag]
                if cp is not None:
                    combos[tag] = cp
            u0, tags = _minimizers(cand)
            entries = {t: cand[t] for t in tags}
    else:
        raise JunctionError(f"unknown junction mode {mode!r}")
    for b, v in v_sc.items():
        entries[f"sc({b})"] = float(v)
    v_junction, argmin = _minimizers(entries)
    return JunctionReport(
        mode=mode,
        u0=u0,
        u123=u123_val,
        u_pair=pair_vals,
        v_sc={int(k): float(v) for k, v in v_sc.items()},
        v_junction=v_junction,
        argmin=argmin,
        combos=combos,
    )


def assemble_limit(scenario, report, h=None, tol=1e-9, sc_fields=None):
    """Limit value function: per-branch Dirichlet solve with datum V(0).

    On a branch whose state-constraint value is the argmin, the assembled
    field is checked against (and replaced by) the state-constraint
    solution; elsewhere the Dirichlet datum V(0) applies at the junction.
    """
    h = h or scenario.grid_step
    X = scenario.domain_radius
    if not math.isfinite(report.v_junction):
        raise JunctionError("cannot assemble a limit field from an infeasible junction")
    grids = {}
    values = {}
    for b in scenario.branch_ids:
        if scenario.kind == "twofold" and b == -1:
            grid = make_branch_grid(-X, 0.0, h, pin=-X)
            side = "right"
        else:
            grid = make_branch_grid(0.0, X, h)
            side = "left"
        fld = solve_branch_dirichlet(
            scenario, b, grid, report.v_junction, tol=tol, exit_side=side
        )
        if f"sc({b})" in report.argmin:
            sc = (
                sc_fields[b]
                if sc_fields and b in sc_fields
                else solve_state_constraint(scenario, b, grid, tol=tol)
            )
            gap = float(np.max(np.abs(sc.values[b] - fld.values[b])))
            if gap > 10 * max(h, tol):
                raise JunctionError(
                    f"branch {b}: state-constraint argmin but fields differ by {gap:.3e}"
                )
            fld = sc
        grids[b] = grid
        values[b] = fld.values[b]
    return ValueField(
        grids=grids,
        values=values,
        metadata={
            "scenario_hash": scenario.content_hash(),
            "kind": "limit",
            "junction_mode": report.mode,
            "v_junction": report.v_junction,
            "argmin": list(report.argmin),
        },
    )


# ---------------------------------------------------------------------------
# Closed-form cycle value functions


@dataclass
class CycleValue:
    """Closed-form value of the forced switching cycle.

    Coefficients are frozen at the junction (f_i(0, a_i), ell_i(0, a_i)),
    exact whenever dynamics and cost are x-independent near 0 — the
    regime the closed forms describe.
    """

    kind: str  # "twofold" | "threefold"
    lam: float
    controls: dict[int, float]
    speeds: dict[int, float]  # f_i(0, a_i)
    costs: dict[int, float]   # ell_i(0, a_i)
    thresholds: dict[int, float]
    travel_times: dict[int, float]
    threshold_values: dict[int, float]  # value when entering each mode
    derivative_limit: float | None
    _next: dict[int, int] | None = None

    def value(self, x, mode):
        """V-bar at position ``x`` in ``mode`` (x inside the mode's band)."""
        lam = self.lam
        f = self.speeds[mode]
        ell = self.costs[mode]
        eps = self.thresholds[mode]
        if self.kind == "twofold":
            # mode 1 rides down to -eps, mode -1 rides up to +eps
            tau = (x + eps) / (-f) if mode == 1 else (eps - x) / f
            nxt = -mode
        else:
            tau = (x + eps) / (-f)
            nxt = self._next[mode]
        w_next = self.threshold_values[nxt]
        return ell / lam + math.exp(-lam * tau) * (w_next - ell / lam)

    def derivative(self, x, mode):
        lam = self.lam
        f = self.speeds[mode]
        ell = self.costs[mode]
        eps = self.thresholds[mode]
        if self.kind == "twofold":
            tau = (x + eps) / (-f) if mode == 1 else (eps - x) / f
            dtau = 1.0 / (-f) if mode == 1 else -1.0 / f
            nxt = -mode
        else:
            tau = (x + eps) / (-f)
            dtau = 1.0 / (-f)
            nxt = self._next[mode]
        w_next = self.threshold_values[nxt]
        return -lam * dtau * math.exp(-lam * tau) * (w_next - ell / lam)


def cycle_value(scenario, config, controls):
    """Closed-form value of the forced cycle with constant per-mode controls.

    ``controls`` maps mode -> control value. Solves the linear fixed
    point induced by one full period of switching; threshold matching
    holds exactly by construction. Requires nonzero cycling speed in
    every mode with the cycle-consistent sign.
    """
    lam = scenario.lam
    speeds = {}
    costs = {}
    for mode, a in controls.items():
        b = scenario.branch(mode)
        speeds[mode] = float(b.f(0.0, a))
        costs[mode] = float(b.ell(0.0, a))
    if config.kind == "twofold":
        f1, fm = speeds[1], speeds[-1]
        if not (f1 < 0 < fm):
            raise JunctionError(
                f"twofold cycle needs f_1 < 0 < f_-1, got ({f1}, {fm})"
            )
        eps = config.thresholds[1]
        T1 = 2 * eps / (-f1)   # mode 1: +eps down to -eps
        T2 = 2 * eps / fm      # mode -1: -eps up to +eps
        l1, lm = costs[1], costs[-1]
        e1, e2 = math.exp(-lam * T1), math.exp(-lam * T2)
        # w = value entering mode 1 at +eps, u = entering mode -1 at -eps
        u = (lm / lam * (1 - e2) + e2 * l1 / lam * (1 - e1)) / (1 - e1 * e2)
        w = l1 / lam * (1 - e1) + e1 * u
        cv = CycleValue(
            kind="twofold",
            lam=lam,
            controls=dict(controls),
            speeds=speeds,
            costs=costs,
            thresholds=dict(config.thresholds),
            travel_times={1: T1, -1: T2},
            threshold_values={1: w, -1: u},
            derivative_limit=(l1 - lm) / (fm - f1),
        )
        return cv
    # threefold: W_i = value entering mode i at +eps_i
    order = config.order
    nxt = {order[k]: order[(k + 1) % 3] for k in range(3)}
    T = {}
    E = {}
    for i in (1, 2, 3):
        if speeds[i] >= 0:
            raise JunctionError(f"threefold cycle needs f_{i} < 0, got {speeds[i]}")
        T[i] = 2 * config.thresholds[i] / (-speeds[i])
        E[i] = math.exp(-lam * T[i])
    # W_i = c_i + E_i W_{next(i)} with c_i = ell_i (1 - E_i) / lam;
    # composing around the cycle gives a scalar fixed point per mode
    c = {i: costs[i] / lam * (1 - E[i]) for i in (1, 2, 3)}
    W = {}
    for i in (1, 2, 3):
        j = nxt[i]
        k = nxt[j]
        num = c[i] + E[i] * (c[j] + E[j] * c[k])
        W[i] = num / (1 - E[i] * E[j] * E[k])
    cv = CycleValue(
        kind="threefold",
        lam=lam,
        controls=dict(controls),
        speeds=speeds,
        costs=costs,
        thresholds=dict(config.thresholds),
        travel_times=T,
        threshold_values=W,
        derivative_limit=None,
        _next=nxt,
    )
    return cv
