"""Figure rendering for cfpinn run directories.

Reads only the delimited-text artifacts a run writes (grid export, summary,
training points, optimizer history) and never recomputes any physics.
"""

from cfpinn_figures.io import (
    GridTable,
    MalformedTableError,
    MissingInputError,
    read_grid,
    read_history,
    read_points,
    read_summary,
)
from cfpinn_figures.render import DEFAULT_SLICE_TIMES, KINDS, FigureJob, render

__all__ = [
    "DEFAULT_SLICE_TIMES",
    "FigureJob",
    "GridTable",
    "KINDS",
    "MalformedTableError",
    "MissingInputError",
    "read_grid",
    "read_history",
    "read_points",
    "read_summary",
    "render",
]

__version__ = "0.1.0"
