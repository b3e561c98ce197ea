"""Figure rendering from run-directory files.

Five kinds: `heatmap` (predicted field with the training points overlaid),
`slices` (exact vs predicted profiles at chosen times), `error-surface`
(absolute error over the space-time grid), `inverse-panel` (identified
equation next to the true one), and `convergence` (optimizer trace).

Every plotted number is read from the run's exported files; requested slice
times not on the grid snap to the nearest grid time and the snap distance is
written into the legend rather than interpolating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from cfpinn_figures.io import read_grid, read_history, read_points, read_summary

KINDS = ("heatmap", "slices", "error-surface", "inverse-panel", "convergence")

DEFAULT_SLICE_TIMES = (0.01, 0.05, 0.10, 0.25, 0.50, 0.75)

# Pinned so identical inputs produce identical PNG bytes.
_SAVE_OPTS = dict(format="png", dpi=150, metadata={"Software": "cfpinn-figures"})

_POINT_STYLES = {
    "initial": dict(marker="o", s=18, facecolors="none", edgecolors="white",
                    linewidths=0.8, label="initial"),
    "boundary": dict(marker="s", s=18, facecolors="none", edgecolors="cyan",
                     linewidths=0.8, label="boundary"),
    "collocation": dict(marker=".", s=1.5, color="black", alpha=0.35,
                        label="collocation"),
    "interior-data": dict(marker="^", s=14, facecolors="none",
                          edgecolors="white", linewidths=0.8, label="data"),
}


@dataclass(frozen=True)
class FigureJob:
    """One figure to produce from one run directory."""

    run_dir: Path
    kind: str
    out_path: Path
    slice_times: tuple = DEFAULT_SLICE_TIMES

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        object.__setattr__(self, "run_dir", Path(self.run_dir))
        object.__setattr__(self, "out_path", Path(self.out_path))
        times = tuple(float(v) for v in self.slice_times)
        if not times:
            raise ValueError("need at least one slice time")
        object.__setattr__(self, "slice_times", times)


def render(job: FigureJob) -> dict:
    """Write the figure as a PNG; returns the plotted data (out_path key
    included) so callers can cross-check values against the source files."""
    fig = Figure(figsize=(8.0, 5.0))
    if job.kind == "heatmap":
        data = _heatmap(job, fig)
    elif job.kind == "slices":
        data = _slices(job, fig)
    elif job.kind == "error-surface":
        data = _error_surface(job, fig)
    elif job.kind == "inverse-panel":
        data = _inverse_panel(job, fig)
    else:
        data = _convergence(job, fig)
    job.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.out_path, **_SAVE_OPTS)
    data["out_path"] = job.out_path
    return data


def _heatmap(job: FigureJob, fig: Figure) -> dict:
    grid = read_grid(job.run_dir)
    points = read_points(job.run_dir)
    summary = read_summary(job.run_dir)
    ax = fig.add_subplot()
    im = ax.imshow(grid.u_pred.T, origin="lower", aspect="auto",
                   extent=(grid.t[0], grid.t[-1], grid.x[0], grid.x[-1]),
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label="predicted u")
    for role, style in _POINT_STYLES.items():
        sel = [(t, x) for r, t, x, _ in points if r == role]
        if sel:
            arr = np.asarray(sel)
            ax.scatter(arr[:, 0], arr[:, 1], **style)
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title(f"predicted field, {summary['mode']} run, "
                 f"alpha={summary['alpha']:g}")
    ax.legend(loc="upper right", fontsize=7, framealpha=0.9)
    return {"t": grid.t, "x": grid.x, "u_pred": grid.u_pred,
            "n_overlay_points": len(points)}


def _snap(grid_t: np.ndarray, requested) -> list:
    """Nearest grid time for each requested time: (requested, index, dist)."""
    out = []
    for s in requested:
        idx = int(np.argmin(np.abs(grid_t - s)))
        out.append((float(s), idx, float(abs(grid_t[idx] - s))))
    return out


def _slices(job: FigureJob, fig: Figure) -> dict:
    grid = read_grid(job.run_dir)
    snapped = _snap(grid.t, job.slice_times)
    ax = fig.add_subplot()
    exact_rows, pred_rows, err_rows, labels = [], [], [], []
    for k, (req, idx, dist) in enumerate(snapped):
        color = f"C{k}"
        label = f"t={grid.t[idx]:.4g}"
        if dist > 0:
            label += f" (snapped {dist:.1e} from {req:g})"
        ax.plot(grid.x, grid.u_exact[idx], color=color, linestyle="-",
                linewidth=1.4, label=label)
        ax.plot(grid.x, grid.u_pred[idx], color=color, linestyle="--",
                linewidth=1.4)
        exact_rows.append(grid.u_exact[idx])
        pred_rows.append(grid.u_pred[idx])
        err_rows.append(grid.abs_error[idx])
        labels.append(label)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title("exact (solid) vs predicted (dashed)")
    ax.legend(fontsize=8)
    return {"x": grid.x,
            "times": [(req, float(grid.t[idx]), dist) for req, idx, dist in snapped],
            "labels": labels,
            "exact": np.array(exact_rows), "pred": np.array(pred_rows),
            "abs_error": np.array(err_rows)}


def _error_surface(job: FigureJob, fig: Figure) -> dict:
    grid = read_grid(job.run_dir)
    ax = fig.add_subplot(projection="3d")
    tt, xx = np.meshgrid(grid.t, grid.x, indexing="ij")
    ax.plot_surface(tt, xx, grid.abs_error, cmap="magma",
                    rstride=max(1, grid.n_t // 64),
                    cstride=max(1, grid.n_x // 64), linewidth=0)
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_zlabel("|u_pred - u_exact|")
    ax.set_title(f"absolute error (max {np.max(grid.abs_error):.2e})")
    return {"t": grid.t, "x": grid.x, "abs_error": grid.abs_error,
            "max_abs_error": float(np.max(grid.abs_error))}


def _equation(alpha: float, lam: float) -> str:
    return f"T^{alpha:g} u = {lam:.4f} u_xx"


def _inverse_panel(job: FigureJob, fig: Figure) -> dict:
    summary = read_summary(job.run_dir)
    alpha = float(summary["alpha"])
    lam_true = float(summary["lam"])
    identified = summary.get("lambda_hat")
    ax = fig.add_subplot()
    ax.axis("off")
    lines = [f"true:        {_equation(alpha, lam_true)}"]
    if identified is not None:
        lam_hat = float(identified)
        lines.insert(0, f"identified:  {_equation(alpha, lam_hat)}")
        lines.append(f"relative error: {float(summary['lambda_error_percent']):.4f}%")
        bars = {"true": lam_true, "identified": lam_hat}
    else:
        lam_hat = None
        lines.append("(forward run: diffusivity fixed by configuration)")
        bars = {"true": lam_true}
    ax.text(0.03, 0.95, "\n".join(lines), transform=ax.transAxes,
            va="top", family="monospace", fontsize=12)
    inset = fig.add_axes((0.58, 0.15, 0.36, 0.45))
    inset.bar(list(bars), list(bars.values()), color=["C0", "C1"][:len(bars)])
    inset.set_ylabel("diffusivity")
    for side in ("top", "right"):
        inset.spines[side].set_visible(False)
    return {"alpha": alpha, "lam_true": lam_true, "lam_hat": lam_hat,
            "equation_true": _equation(alpha, lam_true),
            "equation_identified":
                None if lam_hat is None else _equation(alpha, lam_hat),
            "text_lines": lines}


def _convergence(job: FigureJob, fig: Figure) -> dict:
    history = read_history(job.run_dir)
    phases: dict = {}
    order = []
    for phase, it, loss, ginf, step in history:
        if phase not in phases:
            phases[phase] = {"iter": [], "loss": [], "grad_inf": []}
            order.append(phase)
        phases[phase]["iter"].append(it)
        phases[phase]["loss"].append(loss)
        phases[phase]["grad_inf"].append(ginf)
    ax = fig.add_subplot()
    offset = 0
    data = {"phases": order, "global_iter": {}, "loss": {}}
    for k, phase in enumerate(order):
        its = np.asarray(phases[phase]["iter"])
        loss = np.asarray(phases[phase]["loss"])
        global_it = its + offset
        ax.semilogy(global_it, loss, color=f"C{k}", label=phase)
        offset = int(global_it[-1]) + 1 if len(global_it) else offset
        data["global_iter"][phase] = global_it
        data["loss"][phase] = loss
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    ax.legend()
    return data
