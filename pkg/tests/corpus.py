"""Shared scenario documents for the test suites."""

TWOFOLD_ASYM = {
    "branches": [
        {"id": -1, "dynamics": "a", "cost": "1"},
        {"id": 1, "dynamics": "a", "cost": "2"},
    ],
    "controls": [-1, 0, 1],
    "lambda": 1.0,
    "domain_radius": 3.0,
    "grid_step": 0.001,
}

TWOFOLD_SYM = {
    "branches": [
        {"id": -1, "dynamics": "a", "cost": "3"},
        {"id": 1, "dynamics": "a", "cost": "3"},
    ],
    "controls": [-1, 0, 1],
    "lambda": 1.0,
    "domain_radius": 3.0,
    "grid_step": 0.001,
}

THREEFOLD_CYCLE = {
    "branches": [
        {"id": 1, "dynamics": "a", "cost": "100 * (1 - a) / 2 + 1000 * (1 + a) / 2"},
        {"id": 2, "dynamics": "a", "cost": "1 * (1 - a) / 2 + 1000 * (1 + a) / 2"},
        {"id": 3, "dynamics": "a", "cost": "1 * (1 - a) / 2 + 1000 * (1 + a) / 2"},
    ],
    "controls": [-1, 1],
    "lambda": 1.0,
    "domain_radius": 3.0,
    "grid_step": 0.001,
}

ORACLE = {
    "branches": [
        {"id": -1, "dynamics": "a", "cost": "abs(x)"},
        {"id": 1, "dynamics": "a", "cost": "x"},
    ],
    "controls": [-1, 0, 1],
    "lambda": 1.0,
    "domain_radius": 5.0,
    "grid_step": 0.001,
}
