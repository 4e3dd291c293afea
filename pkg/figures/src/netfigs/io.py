"""Readers for the documented CSV/JSON export schemas."""

from __future__ import annotations

import csv
import json

import numpy as np

FIELD_COLUMNS = ["branch", "mode", "x", "value"]
STUDY_COLUMNS = ["epsilon", "sup_error", "junction_gap"]
TRAJECTORY_COLUMNS = ["t", "x", "mode", "control", "running_cost", "switch"]


class SchemaError(ValueError):
    """An input file does not match its documented schema."""


def _check_header(path, header, expected):
    if header != expected:
        raise SchemaError(
            f"{path}: expected columns {','.join(expected)}, "
            f"found {','.join(header) if header else '(empty file)'}"
        )


def read_field_csv(path):
    """Value field export -> {branch: (x array, value array)}, x-sorted."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(path, next(reader, []), FIELD_COLUMNS)
        for row in reader:
            branch = int(row[0])
            rows.setdefault(branch, []).append((float(row[2]), float(row[3])))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {}
    for branch, pts in rows.items():
        pts.sort()
        out[branch] = (np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
    return out


def read_study(csv_path, json_path=None):
    """Convergence study -> dict of column arrays plus optional JSON doc."""
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(csv_path, next(reader, []), STUDY_COLUMNS)
        data = [[float(v) for v in row] for row in reader]
    if not data:
        raise SchemaError(f"{csv_path}: no data rows")
    arr = np.array(data)
    study = {name: arr[:, k] for k, name in enumerate(STUDY_COLUMNS)}
    if json_path is not None:
        with open(json_path, encoding="utf-8") as fh:
            study["meta"] = json.load(fh)
    return study


def read_trajectory_csv(path):
    """Trajectory export -> dict of column arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(path, next(reader, []), TRAJECTORY_COLUMNS)
        data = [[float(v) for v in row] for row in reader]
    if not data:
        raise SchemaError(f"{path}: no data rows")
    arr = np.array(data)
    return {name: arr[:, k] for k, name in enumerate(TRAJECTORY_COLUMNS)}
