"""Figure scripts for the network-control CSV/JSON exports.

Reads the files written by the ``junctio`` CLI (value fields,
convergence studies, trajectories) and renders publication-quality figures.
Rendering never recomputes anything and never mutates its inputs.
"""

from .io import SchemaError, read_field_csv, read_study, read_trajectory_csv
from .render import KINDS, FigureSpec, render

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "KINDS",
    "SchemaError",
    "read_field_csv",
    "read_study",
    "read_trajectory_csv",
    "render",
]
