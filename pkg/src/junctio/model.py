"""Scenario description: branches, controls, discount, and validation.

A scenario is a star-shaped network of 2 or 3 branches meeting at a
junction. The twofold case uses branch ids -1 and 1 on a signed axis
(branch -1 lives on x <= 0, branch 1 on x >= 0); the threefold case uses
ids 1, 2, 3, each with its own nonnegative coordinate pointing away from
the junction.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, parse_expr

__all__ = [
    "BranchSpec",
    "ControlSet",
    "Scenario",
    "ThermostatConfig",
    "ValidationReport",
    "ScenarioError",
    "load_scenario",
    "scenario_from_dict",
    "validate_scenario",
]

TWOFOLD_IDS = (-1, 1)
THREEFOLD_IDS = (1, 2, 3)


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class BranchSpec:
    """One branch: controlled dynamics and nonnegative running cost."""

    id: int
    dynamics: Expr
    cost: Expr

    def f(self, x, a):
        return self.dynamics.evaluate(x, a)

    def ell(self, x, a):
        return self.cost.evaluate(x, a)


@dataclass(frozen=True)
class ControlSet:
    """Finite sample of the compact control set, sorted and deduplicated."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ScenarioError("control set must be nonempty")
        cleaned = tuple(sorted(set(float(v) for v in self.values)))
        object.__setattr__(self, "values", cleaned)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def as_array(self):
        return np.asarray(self.values)


@dataclass(frozen=True)
class Scenario:
    """Full problem description for a twofold or threefold junction."""

    branches: tuple[BranchSpec, ...]
    controls: ControlSet
    lam: float
    domain_radius: float
    grid_step: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ScenarioError("discount rate lambda must be positive")
        if self.domain_radius <= 0:
            raise ScenarioError("domain_radius must be positive")
        if self.grid_step <= 0:
            raise ScenarioError("grid_step must be positive")
        ids = tuple(b.id for b in self.branches)
        if ids not in (TWOFOLD_IDS, THREEFOLD_IDS):
            raise ScenarioError(
                f"branch ids must be {TWOFOLD_IDS} or {THREEFOLD_IDS}, got {ids}"
            )

    @property
    def kind(self):
        return "twofold" if len(self.branches) == 2 else "threefold"

    @property
    def branch_ids(self):
        return tuple(b.id for b in self.branches)

    def branch(self, branch_id):
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise KeyError(branch_id)

    def branch_axis(self, branch_id):
        """Native coordinate sign: -1 only for the twofold left branch."""
        return -1.0 if (self.kind == "twofold" and branch_id == -1) else 1.0

    def to_dict(self):
        return {
            "branches": [
                {"id": b.id, "dynamics": b.dynamics.to_source(), "cost": b.cost.to_source()}
                for b in self.branches
            ],
            "controls": list(self.controls.values),
            "lambda": self.lam,
            "domain_radius": self.domain_radius,
            "grid_step": self.grid_step,
        }

    def content_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class ThermostatConfig:
    """Threshold per branch and the cyclic switching order.

    Twofold: both thresholds must be equal and define the hysteresis band
    [-eps, eps]. Threefold: branch i lives on [-eps_i, +inf) and switching
    at -eps_i teleports the state to +eps_next on the next branch of the
    cycle.
    """

    thresholds: dict[int, float]
    order: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        object.__setattr__(self, "thresholds", dict(self.thresholds))
        object.__setattr__(self, "order", tuple(self.order))
        for eps in self.thresholds.values():
            if eps <= 0:
                raise ScenarioError("thresholds must be positive")
        ids = set(self.thresholds)
        if ids == set(TWOFOLD_IDS):
            vals = set(self.thresholds.values())
            if len(vals) != 1:
                raise ScenarioError("twofold thresholds must coincide")
        elif ids == set(THREEFOLD_IDS):
            if sorted(self.order) != list(THREEFOLD_IDS) or len(self.order) != 3:
                raise ScenarioError("order must be a cyclic permutation of (1, 2, 3)")
        else:
            raise ScenarioError(f"threshold ids {sorted(ids)} match no supported junction")

    @classmethod
    def twofold(cls, eps):
        return cls({-1: eps, 1: eps}, order=(1, -1))

    @classmethod
    def threefold(cls, eps1, eps2, eps3, order=(1, 2, 3)):
        return cls({1: eps1, 2: eps2, 3: eps3}, order=order)

    @classmethod
    def uniform(cls, scenario, eps):
        if scenario.kind == "twofold":
            return cls.twofold(eps)
        return cls.threefold(eps, eps, eps)

    @property
    def kind(self):
        return "twofold" if set(self.thresholds) == set(TWOFOLD_IDS) else "threefold"

    def next_mode(self, mode):
        """Successor of ``mode`` in the switching cycle."""
        if self.kind == "twofold":
            return -mode
        i = self.order.index(mode)
        return self.order[(i + 1) % 3]

    def check_against(self, scenario):
        if set(self.thresholds) != set(scenario.branch_ids):
            raise ScenarioError("thermostat branch ids do not match scenario")
        for eps in self.thresholds.values():
            if eps >= scenario.domain_radius:
                raise ScenarioError("thresholds must be smaller than domain_radius")


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class BranchValidation:
    branch_id: int
    cost_nonnegative: bool
    cost_min: float
    lipschitz_estimate: float
    controllable: bool
    inward_controls: tuple[float, ...] = ()
    outward_controls: tuple[float, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    branches: tuple[BranchValidation, ...]
    dynamics_bound: float  # M = sup |f_i| over grid x controls
    cost_sup: float
    all_controllable: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "all_controllable", all(b.controllable for b in self.branches)
        )

    def branch(self, branch_id):
        for b in self.branches:
            if b.branch_id == branch_id:
                return b
        raise KeyError(branch_id)

    def to_dict(self):
        return {
            "dynamics_bound": self.dynamics_bound,
            "cost_sup": self.cost_sup,
            "all_controllable": self.all_controllable,
            "branches": [
                {
                    "id": b.branch_id,
                    "cost_nonnegative": b.cost_nonnegative,
                    "cost_min": b.cost_min,
                    "lipschitz_estimate": b.lipschitz_estimate,
                    "controllable": b.controllable,
                }
                for b in self.branches
            ],
        }


_MAX_VALIDATION_NODES = 2001


def _validation_grid(scenario, branch_id):
    """Sample points of the branch domain, capped for large grids."""
    X = scenario.domain_radius
    axis = scenario.branch_axis(branch_id)
    n = min(_MAX_VALIDATION_NODES, max(2, int(round(X / scenario.grid_step)) + 1))
    xs = np.linspace(0.0, X, n)
    return axis * xs


def validate_scenario(scenario):
    """Check cost nonnegativity, Lipschitz bounds, and controllability.

    Never raises on a *bad* scenario; failures are recorded in the report.
    Evaluation producing NaN or infinity is a hard error.
    """
    controls = scenario.controls.as_array()
    reports = []
    M = 0.0
    cost_sup = 0.0
    for b in scenario.branches:
        xs = _validation_grid(scenario, b.id)
        fx = np.empty((len(xs), len(controls)))
        lx = np.empty_like(fx)
        for j, a in enumerate(controls):
            fx[:, j] = b.f(xs, a)
            lx[:, j] = b.ell(xs, a)
        if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(lx))):
            raise ScenarioError(f"branch {b.id}: non-finite dynamics or cost on grid")
        # max secant slope over all grid pairs; grows toward the true
        # Lipschitz constant as nested grids are refined
        lip = 0.0
        for j in range(len(controls)):
            diffs = np.abs(fx[:, j][:, None] - fx[:, j][None, :])
            gaps = np.abs(xs[:, None] - xs[None, :])
            mask = gaps > 0
            if np.any(mask):
                lip = max(lip, float(np.max(diffs[mask] / gaps[mask])))
        f0 = np.array([b.f(0.0, a) for a in controls], dtype=float)
        inward = tuple(float(a) for a, v in zip(controls, f0) if v > 0)
        outward = tuple(float(a) for a, v in zip(controls, f0) if v < 0)
        # controllability: on the native axis the junction must be
        # approachable and leavable, i.e. f(0, .) takes both signs
        controllable = bool(np.any(f0 > 0) and np.any(f0 < 0))
        reports.append(
            BranchValidation(
                branch_id=b.id,
                cost_nonnegative=bool(np.all(lx >= 0)),
                cost_min=float(np.min(lx)),
                lipschitz_estimate=lip,
                controllable=controllable,
                inward_controls=inward,
                outward_controls=outward,
            )
        )
        M = max(M, float(np.max(np.abs(fx))))
        cost_sup = max(cost_sup, float(np.max(lx)))
    return ValidationReport(branches=tuple(reports), dynamics_bound=M, cost_sup=cost_sup)


# ---------------------------------------------------------------------------
# JSON loading

_TOP_KEYS = {"branches", "controls", "lambda", "domain_radius", "grid_step"}
_BRANCH_KEYS = {"id", "dynamics", "cost"}


def scenario_from_dict(data):
    """Build a :class:`Scenario` from a parsed JSON document.

    Unknown keys are rejected so that typos in config files fail loudly.
    """
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    missing = _TOP_KEYS - set(data)
    if missing:
        raise ScenarioError(f"missing scenario keys: {sorted(missing)}")
    branches = []
    for entry in data["branches"]:
        unknown = set(entry) - _BRANCH_KEYS
        if unknown:
            raise ScenarioError(f"unknown branch keys: {sorted(unknown)}")
        missing = _BRANCH_KEYS - set(entry)
        if missing:
            raise ScenarioError(f"missing branch keys: {sorted(missing)}")
        branches.append(
            BranchSpec(
                id=int(entry["id"]),
                dynamics=parse_expr(entry["dynamics"]),
                cost=parse_expr(entry["cost"]),
            )
        )
    branches.sort(key=lambda b: b.id)
    if not all(math.isfinite(float(v)) for v in data["controls"]):
        raise ScenarioError("controls must be finite numbers")
    return Scenario(
        branches=tuple(branches),
        controls=ControlSet(tuple(float(v) for v in data["controls"])),
        lam=float(data["lambda"]),
        domain_radius=float(data["domain_radius"]),
        grid_step=float(data["grid_step"]),
    )


def load_scenario(path):
    """Load a scenario from a UTF-8 JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    return scenario_from_dict(data)
