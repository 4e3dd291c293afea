"""Discounted optimal control on one-dimensional networks with a junction.

The junction is approximated by a delayed relay (thermostat) with
threshold gap epsilon; the package solves the resulting coupled HJB
system, evaluates the closed-form junction quantities of the epsilon -> 0
limit, and verifies the limit theory numerically.
"""

__version__ = "0.1.0"

from .expr import Expr, ExprError, ExprEvalError, ExprSyntaxError, parse_expr
from .model import (
    BranchSpec,
    ControlSet,
    Scenario,
    ScenarioError,
    ThermostatConfig,
    ValidationReport,
    load_scenario,
    scenario_from_dict,
    validate_scenario,
)

__all__ = [
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse_expr",
    "BranchSpec",
    "ControlSet",
    "Scenario",
    "ScenarioError",
    "ThermostatConfig",
    "ValidationReport",
    "load_scenario",
    "scenario_from_dict",
    "validate_scenario",
    "__version__",
]
