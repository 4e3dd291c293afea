"""Semi-Lagrangian solver for the discounted HJB equation on one branch
and the coupled thermostatic fixed point.

Scheme: V(x) = min_a [ dt * ell(x, a) + exp(-lam * dt) * I[V](x + dt * f) ]
with linear interpolation I and local step dt = h / max(|f|, F_FLOOR), so
the foot of the characteristic is always the neighbouring node. Stationary
controls (|f| <= F_FLOOR) contribute their closed-form fixed point
ell / lam. The scheme is monotone and converges from the constant
supersolution sup(ell) / lam.

Boundary handling:
  * Dirichlet side: node value = min(exit_cost, in-branch continuation),
    the discrete version of a boundary condition in the viscosity sense.
  * Constrained side: controls stepping outside the domain are excluded;
    with no admissible control left the node is capped at sup(ell) / lam.

Gauss-Seidel sweeps with alternating direction propagate information
across the whole grid per pass, so convergence takes few passes even for
small h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import Scenario, ThermostatConfig, validate_scenario

__all__ = [
    "F_FLOOR",
    "Grid",
    "BranchKey",
    "ValueField",
    "SolverError",
    "make_branch_grid",
    "hamiltonian",
    "build_tables",
    "sl_sweep",
    "solve_branch_dirichlet",
    "solve_state_constraint",
    "solve_thermostatic",
]

F_FLOOR = 1e-6

DIRICHLET = 0
CONSTRAINED = 1


class SolverError(RuntimeError):
    """Solver failed to converge; carries the last residual."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history or []


@dataclass(frozen=True)
class Grid:
    """Uniform grid; both endpoints are nodes exactly."""

    left: float
    right: float
    step: float
    n: int

    def __post_init__(self):
        if self.left >= self.right:
            raise ValueError("grid needs left < right")

    @property
    def nodes(self):
        return self.left + self.step * np.arange(self.n)

    def index_of(self, x, tol=1e-9):
        k = int(round((x - self.left) / self.step))
        if k < 0 or k >= self.n or abs(self.left + k * self.step - x) > tol:
            raise KeyError(f"{x} is not a grid node")
        return k

    def interp(self, values, x):
        return float(np.interp(x, self.nodes, values))


def make_branch_grid(left, right, h, pin=0.0):
    """Uniform grid over ~[left, right] whose nodes include ``pin`` exactly.

    The step is snapped so that ``left`` and ``pin`` are both nodes; the
    right end moves by at most one cell to stay on the lattice.
    """
    if not (left <= pin < right):
        raise ValueError("need left <= pin < right")
    if left == pin:
        step = (right - left) / max(1, round((right - left) / h))
        n = round((right - left) / step) + 1
        return Grid(left, left + step * (n - 1), step, n)
    m = max(1, round((pin - left) / h))
    step = (pin - left) / m
    n_right = max(1, round((right - pin) / step))
    return Grid(left, pin + step * n_right, step, m + n_right + 1)


BranchKey = int  # branch id doubles as the thermostat mode


@dataclass
class ValueField:
    """Grid-sampled value function per branch/mode, plus solve metadata."""

    grids: dict[BranchKey, Grid]
    values: dict[BranchKey, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def branch_ids(self):
        return sorted(self.grids)

    def value_at(self, branch_id, x):
        return self.grids[branch_id].interp(self.values[branch_id], x)

    def junction_value(self, branch_id):
        grid = self.grids[branch_id]
        return float(self.values[branch_id][grid.index_of(0.0)])

    def junction_values(self):
        return {b: self.junction_value(b) for b in self.grids}

    def copy(self):
        return ValueField(
            grids=dict(self.grids),
            values={k: v.copy() for k, v in self.values.items()},
            metadata=dict(self.metadata),
        )

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("branch,mode,x,value\n")
            for b in self.branch_ids():
                xs = self.grids[b].nodes
                vs = self.values[b]
                for x, v in zip(xs, vs):
                    fh.write(f"{b},{b},{x:.12g},{v:.12g}\n")


# ---------------------------------------------------------------------------
# Pointwise Hamiltonian


def hamiltonian(scenario, branch_id, x, p):
    """H_i(x, p) = max over sampled controls of -f_i(x, a) p - ell_i(x, a)."""
    b = scenario.branch(branch_id)
    best = -math.inf
    for a in scenario.controls:
        best = max(best, -float(b.f(x, a)) * p - float(b.ell(x, a)))
    return best


# ---------------------------------------------------------------------------
# Tables and kernels


def build_tables(scenario, branch_id, grid):
    """Evaluate dynamics and cost on grid x controls -> (F, L) arrays."""
    b = scenario.branch(branch_id)
    xs = grid.nodes
    controls = scenario.controls.as_array()
    F = np.empty((grid.n, len(controls)))
    L = np.empty_like(F)
    for j, a in enumerate(controls):
        F[:, j] = b.f(xs, a)
        L[:, j] = b.ell(xs, a)
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(L))):
        raise SolverError(f"branch {branch_id}: non-finite dynamics or cost")
    return F, L


@njit(cache=True)
def _node_update(V, F, L, k, lam, h, cap, lo, hi):
    """Best semi-Lagrangian candidate at node k, feet clamped to [lo, hi]."""
    best = cap
    for j in range(F.shape[1]):
        f = F[k, j]
        if abs(f) <= F_FLOOR:
            cand = L[k, j] / lam
        else:
            tgt = k + 1 if f > 0.0 else k - 1
            if tgt < lo or tgt > hi:
                continue
            dt = h / abs(f)
            cand = dt * L[k, j] + math.exp(-lam * dt) * V[tgt]
        if cand < best:
            best = cand
    return best


@njit(cache=True)
def _gs_pass(V, F, L, lam, h, cap, left_type, left_value, right_type, right_value, forward):
    n = V.shape[0]
    delta = 0.0
    ks = range(n) if forward else range(n - 1, -1, -1)
    for k in ks:
        if k == 0:
            new = _node_update(V, F, L, 0, lam, h, cap, 0, n - 1)
            if left_type == 0:
                new = min(new, left_value)
        elif k == n - 1:
            new = _node_update(V, F, L, n - 1, lam, h, cap, 0, n - 1)
            if right_type == 0:
                new = min(new, right_value)
        else:
            new = _node_update(V, F, L, k, lam, h, cap, 0, n - 1)
        change = abs(new - V[k])
        if change > delta:
            delta = change
        V[k] = new
    return delta


@njit(cache=True)
def _solve_kernel(V, F, L, lam, h, cap, lt, lv, rt, rv, tol, max_passes):
    residual = math.inf
    passes = 0
    while passes < max_passes:
        r1 = _gs_pass(V, F, L, lam, h, cap, lt, lv, rt, rv, True)
        r2 = _gs_pass(V, F, L, lam, h, cap, lt, lv, rt, rv, False)
        residual = max(r1, r2)
        passes += 2
        if residual < tol:
            break
    return passes, residual


def sl_sweep(grid, F, L, lam, cap, V, left_bc=(CONSTRAINED, 0.0), right_bc=(CONSTRAINED, 0.0)):
    """One synchronous (Jacobi) semi-Lagrangian sweep; monotone in V."""
    n = grid.n
    out = np.empty_like(V)
    for k in range(n):
        out[k] = _node_update(V, F, L, k, lam, grid.step, cap, 0, n - 1)
    if left_bc[0] == DIRICHLET:
        out[0] = min(out[0], left_bc[1])
    if right_bc[0] == DIRICHLET:
        out[-1] = min(out[-1], right_bc[1])
    return out


def _solve_branch(grid, F, L, lam, cap, left_bc, right_bc, tol, v0=None, max_passes=200_000):
    V = np.full(grid.n, cap) if v0 is None else np.array(v0, dtype=float)
    lt, lv = left_bc
    rt, rv = right_bc
    passes, residual = _solve_kernel(
        V, F, L, lam, grid.step, cap, lt, lv, rt, rv, tol, max_passes
    )
    if residual >= tol:
        raise SolverError(
            f"branch solve did not converge: residual {residual:.3e}", residual
        )
    return V, passes, residual


def _cap(scenario, report=None):
    report = report or validate_scenario(scenario)
    return report.cost_sup / scenario.lam, report


def solve_branch_dirichlet(
    scenario, branch_id, grid, exit_cost, tol=1e-9, exit_side="left", v0=None
):
    """Exit-time value on one branch with a viscosity Dirichlet boundary.

    ``exit_side`` is the junction-facing end of the grid ('left' for the
    native orientation, 'right' for the twofold branch -1). The opposite
    end is state-constrained (truncation surrogate).
    """
    cap, report = _cap(scenario)
    F, L = build_tables(scenario, branch_id, grid)
    left = (DIRICHLET, float(exit_cost)) if exit_side == "left" else (CONSTRAINED, 0.0)
    right = (DIRICHLET, float(exit_cost)) if exit_side == "right" else (CONSTRAINED, 0.0)
    V, passes, residual = _solve_branch(grid, F, L, scenario.lam, cap, left, right, tol, v0)
    return ValueField(
        grids={branch_id: grid},
        values={branch_id: V},
        metadata={
            "scenario_hash": scenario.content_hash(),
            "kind": "dirichlet",
            "exit_cost": float(exit_cost),
            "tol": tol,
            "passes": passes,
            "residual": residual,
            "cap": cap,
            "tail_bound": _tail_bound(scenario, report),
        },
    )


def solve_state_constraint(scenario, branch_id, grid, tol=1e-9, v0=None):
    """State-constrained value on one branch: no exit at the junction."""
    cap, report = _cap(scenario)
    F, L = build_tables(scenario, branch_id, grid)
    V, passes, residual = _solve_branch(
        grid, F, L, scenario.lam, cap, (CONSTRAINED, 0.0), (CONSTRAINED, 0.0), tol, v0
    )
    return ValueField(
        grids={branch_id: grid},
        values={branch_id: V},
        metadata={
            "scenario_hash": scenario.content_hash(),
            "kind": "state_constraint",
            "tol": tol,
            "passes": passes,
            "residual": residual,
            "cap": cap,
            "tail_bound": _tail_bound(scenario, report),
        },
    )


def _tail_bound(scenario, report):
    M = max(report.dynamics_bound, F_FLOOR)
    return (
        report.cost_sup
        / scenario.lam
        * math.exp(-scenario.lam * scenario.domain_radius / M)
    )


# ---------------------------------------------------------------------------
# Coupled thermostatic system


def thermostatic_grids(scenario, config, h=None):
    """Per-branch grids for the coupled system.

    Threefold branch i lives on [-eps_i, X]; twofold branch 1 on
    [-eps, X] and branch -1 on [-X, eps]. The junction x = 0 and every
    threshold are grid nodes.
    """
    h = h or scenario.grid_step
    X = scenario.domain_radius
    grids = {}
    if config.kind == "twofold":
        eps = config.thresholds[1]
        step = eps / max(1, round(eps / h))
        reach = max(1, round(X / step)) * step
        n = round((reach + eps) / step) + 1
        grids[1] = Grid(-eps, reach, step, n)
        grids[-1] = Grid(-reach, eps, step, n)
    else:
        for i in (1, 2, 3):
            eps = config.thresholds[i]
            step = eps / max(1, round(eps / h))
            reach = max(1, round(X / step)) * step
            grids[i] = Grid(-eps, reach, step, round((reach + eps) / step) + 1)
    return grids


def _exchange_nodes(scenario, config, grids):
    """(branch, dirichlet side, feeding branch, feeding x) per branch."""
    links = {}
    if config.kind == "twofold":
        eps = config.thresholds[1]
        links[1] = ("left", -1, -eps)   # V(-eps, 1) = V(-eps, -1)
        links[-1] = ("right", 1, eps)   # V(eps, -1) = V(eps, 1)
    else:
        for i in (1, 2, 3):
            nxt = config.next_mode(i)
            links[i] = ("left", nxt, config.thresholds[nxt])
    return links


def solve_thermostatic(
    scenario,
    config,
    tol=1e-8,
    h=None,
    inner_tol=None,
    max_outer=5000,
):
    """Value function of the coupled delayed-relay system.

    Picard iteration on the vector of mutually exchanged exit costs
    (synchronous update between outer iterations); every outer iteration
    re-solves each branch Dirichlet problem warm-started from the previous
    field. Starts from the constant supersolution sup(ell) / lam.
    """
    config.check_against(scenario)
    inner_tol = inner_tol if inner_tol is not None else min(tol * 1e-2, 1e-9)
    cap, report = _cap(scenario)
    grids = thermostatic_grids(scenario, config, h)
    links = _exchange_nodes(scenario, config, grids)
    tables = {b: build_tables(scenario, b, grids[b]) for b in grids}
    fields = {b: np.full(grids[b].n, cap) for b in grids}
    exit_costs = {b: cap for b in grids}
    history = []
    passes_total = 0
    residual = math.inf
    for outer in range(1, max_outer + 1):
        for b, grid in grids.items():
            side = links[b][0]
            F, L = tables[b]
            left = (DIRICHLET, exit_costs[b]) if side == "left" else (CONSTRAINED, 0.0)
            right = (DIRICHLET, exit_costs[b]) if side == "right" else (CONSTRAINED, 0.0)
            fields[b], passes, _ = _solve_branch(
                grid, F, L, scenario.lam, cap, left, right, inner_tol, v0=fields[b]
            )
            passes_total += passes
        new_costs = {}
        for b, (_, src, x_src) in links.items():
            new_costs[b] = float(fields[src][grids[src].index_of(x_src)])
        residual = max(abs(new_costs[b] - exit_costs[b]) for b in grids)
        history.append(residual)
        exit_costs = new_costs
        if residual < tol:
            break
    else:
        raise SolverError(
            f"thermostatic outer iteration did not converge: residual {residual:.3e}",
            residual,
            history,
        )
    return ValueField(
        grids=grids,
        values=fields,
        metadata={
            "scenario_hash": scenario.content_hash(),
            "kind": "thermostatic",
            "thresholds": dict(config.thresholds),
            "order": list(config.order),
            "tol": tol,
            "outer_iterations": outer,
            "passes": passes_total,
            "residual": residual,
            "residual_history": history,
            "cap": cap,
            "tail_bound": _tail_bound(scenario, report),
        },
    )
