"""Error measures for trained solutions: relative L2 norm, mean absolute and
squared pointwise deviations, and the percent error of an identified lambda.

Metrics are evaluated on a fixed uniform grid (256 x 100 in t x x by
default) so reported numbers are comparable across runs; the grid resolution
is recorded in every run summary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfpinn.conformable import DomainSpec
from cfpinn.losses import LengthMismatchError

GRID_T = 256
GRID_X = 100


class ZeroReferenceError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorReport:
    relative_l2: float
    mean_abs_error: float
    mean_sq_error: float
    n_points: int


def _aligned(pred, exact):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if pred.shape[0] != exact.shape[0]:
        raise LengthMismatchError(
            f"pred has {pred.shape[0]} entries, exact has {exact.shape[0]}")
    if pred.shape[0] == 0:
        raise LengthMismatchError("empty vectors")
    return pred, exact


def relative_l2(pred, exact) -> float:
    """||pred - exact||_2 / ||exact||_2."""
    pred, exact = _aligned(pred, exact)
    ref = float(np.linalg.norm(exact))
    if ref == 0.0:
        raise ZeroReferenceError("reference vector has zero norm")
    return float(np.linalg.norm(pred - exact)) / ref


def error_stats(pred, exact) -> ErrorReport:
    pred, exact = _aligned(pred, exact)
    d = pred - exact
    return ErrorReport(
        relative_l2=relative_l2(pred, exact),
        mean_abs_error=float(np.mean(np.abs(d))),
        mean_sq_error=float(np.mean(d * d)),
        n_points=len(d))


def lambda_error(lambda_hat: float, lambda_true: float) -> float:
    """Percent error 100 |hat - true| / |true|."""
    if lambda_true == 0.0:
        raise ZeroReferenceError("true lambda is zero")
    return 100.0 * abs(lambda_hat - lambda_true) / abs(lambda_true)


def eval_grid(domain: DomainSpec, n_t: int = GRID_T, n_x: int = GRID_X) -> np.ndarray:
    """Uniform (n_t * n_x, 2) grid of (t, x) rows in t-major order."""
    t = np.linspace(domain.t_lo, domain.t_hi, n_t)
    x = np.linspace(domain.x_lo, domain.x_hi, n_x)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel()])
