"""Parsers for the delimited-text files a run directory contains.

All figure data comes from these files; nothing is recomputed.  Parse
failures carry the offending path and 1-indexed line number.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

GRID_FILE = "grid.csv"
SUMMARY_FILE = "summary.txt"
POINTS_FILE = "points.csv"
HISTORY_FILE = "history.csv"

GRID_COLUMNS = ("t", "x", "u_pred", "u_exact", "abs_error")


class MissingInputError(FileNotFoundError):
    """A file the figure kind requires is absent from the run directory."""

    def __init__(self, path):
        super().__init__(str(path))
        self.path = Path(path)


class MalformedTableError(ValueError):
    """A present input file failed to parse; reports the line number."""

    def __init__(self, path, line_no: int, why: str):
        super().__init__(f"{path}:{line_no}: {why}")
        self.path = Path(path)
        self.line_no = line_no


def _read_lines(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path)
    return path.read_text(encoding="utf-8").splitlines()


@dataclass(frozen=True)
class GridTable:
    """Rectangular evaluation-grid export in t-major row order."""

    t: np.ndarray        # (n_t,) grid times
    x: np.ndarray        # (n_x,) grid positions
    u_pred: np.ndarray   # (n_t, n_x)
    u_exact: np.ndarray  # (n_t, n_x)
    abs_error: np.ndarray  # (n_t, n_x)

    @property
    def n_t(self) -> int:
        return len(self.t)

    @property
    def n_x(self) -> int:
        return len(self.x)


def read_grid(run_dir) -> GridTable:
    path = Path(run_dir) / GRID_FILE
    lines = _read_lines(path)
    if not lines or not lines[0].startswith("# resolution "):
        raise MalformedTableError(path, 1, "expected '# resolution TxX' header")
    try:
        n_t, n_x = (int(v) for v in lines[0][len("# resolution "):].split("x"))
    except ValueError as exc:
        raise MalformedTableError(path, 1, f"bad resolution: {exc}") from exc
    if len(lines) < 2 or lines[1] != ",".join(GRID_COLUMNS):
        raise MalformedTableError(path, 2, "unexpected column header")
    body = lines[2:]
    if len(body) != n_t * n_x:
        raise MalformedTableError(
            path, len(lines), f"expected {n_t * n_x} data rows, found {len(body)}")
    data = np.empty((len(body), 5), dtype=np.float64)
    for i, row in enumerate(body):
        parts = row.split(",")
        if len(parts) != 5:
            raise MalformedTableError(path, i + 3, f"expected 5 columns, got {len(parts)}")
        try:
            data[i] = [float(v) for v in parts]
        except ValueError as exc:
            raise MalformedTableError(path, i + 3, f"non-numeric value: {exc}") from exc
    tt = data[:, 0].reshape(n_t, n_x)
    xx = data[:, 1].reshape(n_t, n_x)
    if not ((tt == tt[:, :1]).all() and (xx == xx[:1, :]).all()):
        raise MalformedTableError(path, 3, "rows are not in t-major grid order")
    return GridTable(t=tt[:, 0], x=xx[0], u_pred=data[:, 2].reshape(n_t, n_x),
                     u_exact=data[:, 3].reshape(n_t, n_x),
                     abs_error=data[:, 4].reshape(n_t, n_x))


def read_summary(run_dir) -> dict:
    """key=value lines; values decode to bool, int, float, or str."""
    path = Path(run_dir) / SUMMARY_FILE
    values = {}
    for ln, raw in enumerate(_read_lines(path), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedTableError(path, ln, "expected key=value")
        key, _, val = line.partition("=")
        values[key.strip()] = _decode(val.strip())
    return values


def _decode(s: str):
    if s == "true":
        return True
    if s == "false":
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_points(run_dir) -> list:
    """Training points as (role, t, x, target-or-None) tuples."""
    path = Path(run_dir) / POINTS_FILE
    lines = _read_lines(path)
    if not lines or lines[0] != "role,t,x,target":
        raise MalformedTableError(path, 1, "unexpected column header")
    out = []
    for ln, row in enumerate(lines[1:], start=2):
        parts = row.split(",")
        if len(parts) != 4:
            raise MalformedTableError(path, ln, f"expected 4 columns, got {len(parts)}")
        role, t_s, x_s, tgt_s = parts
        try:
            t, x = float(t_s), float(x_s)
            tgt = None if tgt_s == "" else float(tgt_s)
        except ValueError as exc:
            raise MalformedTableError(path, ln, f"non-numeric value: {exc}") from exc
        out.append((role, t, x, tgt))
    return out


def read_history(run_dir) -> list:
    """Optimizer trace as (phase, iter, loss, grad_inf, step) tuples."""
    path = Path(run_dir) / HISTORY_FILE
    lines = _read_lines(path)
    if not lines or lines[0] != "phase,iter,loss,grad_inf,step":
        raise MalformedTableError(path, 1, "unexpected column header")
    out = []
    for ln, row in enumerate(lines[1:], start=2):
        parts = row.split(",")
        if len(parts) != 5:
            raise MalformedTableError(path, ln, f"expected 5 columns, got {len(parts)}")
        try:
            out.append((parts[0], int(parts[1]), float(parts[2]),
                        float(parts[3]), float(parts[4])))
        except ValueError as exc:
            raise MalformedTableError(path, ln, f"non-numeric value: {exc}") from exc
    return out
