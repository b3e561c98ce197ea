"""Experiment runner: configuration, training schedules, checkpoints, grid
exports, sweeps, and run summaries.

Every run writes into a timestamp-free, seed-named subdirectory of the output
root (config echo, summary, checkpoint, grid export, optimizer history,
training points), so reruns with the same configuration overwrite their own
artifacts deterministically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from cfpinn import __version__
from cfpinn.conformable import DomainSpec, analytic_solution
from cfpinn.fastpath import FastMlpPde
from cfpinn.losses import (
    NEAR_CLASSICAL_WEIGHTS,
    LossBreakdown,
    LossWeights,
    PinnObjective,
)
from cfpinn.metrics import GRID_T, GRID_X, ErrorReport, error_stats, eval_grid, lambda_error
from cfpinn.net import Architecture, init_params, param_count
from cfpinn.optim import LbfgsConfig, adam_minimize, lbfgs_minimize
from cfpinn.sampling import (
    add_noise,
    sample_collocation,
    sample_ic_bc,
    sample_interior_data,
)

SCHEMA_VERSION = 1

MODES = ("forward", "forward-weighted", "inverse")


class ConfigError(ValueError):
    pass


class SchemaVersionMismatchError(Exception):
    pass


class CorruptFileError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one training run bitwise."""

    mode: str = "forward"
    domain: DomainSpec = field(default_factory=DomainSpec)
    arch: Architecture = field(default_factory=Architecture)
    n_ic: int = 50
    n_bc: int = 50
    n_f: int = 10000
    n_data: int | None = None
    weights: LossWeights | None = None
    noise_level: float = 0.0
    adam_steps: int = 5000
    adam_lr: float = 1e-3
    lbfgs_max_iters: int = 50000
    seed: int = 0
    out_dir: str = "runs"
    grid_t: int = GRID_T
    grid_x: int = GRID_X

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "inverse":
            if self.n_data is None or self.n_data < 1:
                raise ConfigError("inverse mode needs n_data >= 1")
            if self.weights is not None:
                raise ConfigError("weights only apply to forward modes")
        else:
            if self.n_data is not None:
                raise ConfigError("n_data only applies to inverse mode")
            if self.noise_level != 0.0:
                raise ConfigError("noise only applies to inverse mode")
            if self.n_ic < 1 or self.n_bc < 1 or self.n_f < 1:
                raise ConfigError("forward mode needs n_ic, n_bc, n_f >= 1")
            if self.mode == "forward-weighted" and self.weights is None:
                object.__setattr__(self, "weights", NEAR_CLASSICAL_WEIGHTS)
        if self.noise_level < 0:
            raise ConfigError("noise level must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def effective_weights(self) -> LossWeights:
        return self.weights if self.weights is not None else LossWeights()

    def run_name(self) -> str:
        return f"{self.mode}_alpha{self.domain.alpha:g}_seed{self.seed}"

    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.run_name()

    def point_seeds(self):
        """Fixed derivation of sampling seeds from the master seed.

        Order: (ic/bc, collocation, interior data, noise).  Network
        initialization uses the master seed itself.
        """
        state = np.random.SeedSequence(self.seed).generate_state(4)
        return tuple(int(v) for v in state)


# ------------------------------------------------------------------ summaries


@dataclass
class RunSummary:
    """Flat key=value record of a finished (or failed) run."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_text(self) -> str:
        lines = [f"{k}={_fmt(v)}" for k, v in self.values.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunSummary":
        values = {}
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CorruptFileError(f"summary line {ln} is not key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = _parse(val.strip())
        return cls(values)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _parse(s: str):
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


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(params, meta: dict, path) -> None:
    """Text checkpoint: metadata header then one parameter per line (17 sig
    digits, which round-trips float64 exactly)."""
    params = np.asarray(params, dtype=np.float64)
    widths = tuple(meta["widths"])
    if params.shape != (param_count(widths),):
        raise CorruptFileError(
            f"parameter count {params.shape} does not match widths {widths}")
    lines = [
        f"schema_version={SCHEMA_VERSION}",
        "widths=" + ",".join(str(w) for w in widths),
        f"alpha={format(float(meta['alpha']), '.17g')}",
        f"lam={format(float(meta['lam']), '.17g')}",
        f"lam_trained={'1' if meta.get('lam_trained') else '0'}",
        f"n_params={len(params)}",
    ]
    lines.extend(format(p, ".17g") for p in params)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Returns (params, meta); rejects version/count mismatches."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptFileError(f"cannot read checkpoint: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = {}
    meta = {}
    n_header = 6
    if len(lines) < n_header:
        raise CorruptFileError("checkpoint truncated before header end")
    for ln in lines[:n_header]:
        if "=" not in ln:
            raise CorruptFileError(f"bad header line {ln!r}")
        k, _, v = ln.partition("=")
        header[k] = v
    try:
        version = int(header["schema_version"])
        widths = tuple(int(w) for w in header["widths"].split(","))
        meta["alpha"] = float(header["alpha"])
        meta["lam"] = float(header["lam"])
        meta["lam_trained"] = header["lam_trained"] == "1"
        n_params = int(header["n_params"])
    except (KeyError, ValueError) as exc:
        raise CorruptFileError(f"malformed checkpoint header: {exc}") from exc
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"checkpoint schema {version}, supported {SCHEMA_VERSION}")
    meta["widths"] = widths
    if n_params != param_count(widths):
        raise CorruptFileError(
            f"declared n_params {n_params} does not match widths {widths}")
    body = lines[n_header:]
    if len(body) != n_params:
        raise CorruptFileError(
            f"expected {n_params} parameter lines, found {len(body)}")
    try:
        params = np.array([float(v) for v in body], dtype=np.float64)
    except ValueError as exc:
        raise CorruptFileError(f"non-numeric parameter line: {exc}") from exc
    return params, meta


# -------------------------------------------------------------- grid export


def export_grid(checkpoint, domain: DomainSpec, resolution=(GRID_T, GRID_X),
                out_path=None) -> str:
    """Write t-major rows of t,x,u_pred,u_exact,abs_error; returns the text.

    `checkpoint` is a path or a (params, meta) pair.  The network is rebuilt
    from the checkpoint metadata, so a saved run re-exports byte-identically.
    """
    if isinstance(checkpoint, (str, Path)):
        params, meta = load_checkpoint(checkpoint)
    else:
        params, meta = checkpoint
    arch = Architecture(tuple(meta["widths"]))
    n_t, n_x = int(resolution[0]), int(resolution[1])
    pts = eval_grid(domain, n_t, n_x)
    net = FastMlpPde(arch, meta["alpha"])
    pred = net.predict(params, pts)
    exact = analytic_solution(domain.alpha, domain.lam, pts[:, 0], pts[:, 1])
    err = np.abs(pred - exact)
    lines = [f"# resolution {n_t}x{n_x}", "t,x,u_pred,u_exact,abs_error"]
    for i in range(pts.shape[0]):
        lines.append(",".join((
            format(pts[i, 0], ".17g"), format(pts[i, 1], ".17g"),
            format(pred[i], ".17g"), format(exact[i], ".17g"),
            format(err[i], ".17g"))))
    text = "\n".join(lines) + "\n"
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def _write_history(path, phases) -> None:
    """phases: list of (phase_name, rows) with rows (iter, loss, grad_inf, step)."""
    lines = ["phase,iter,loss,grad_inf,step"]
    for name, rows in phases:
        for it, f, ginf, step in rows:
            lines.append(f"{name},{it},{format(f, '.17g')},"
                         f"{format(ginf, '.17g')},{format(step, '.17g')}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _config_echo(config: ExperimentConfig) -> dict:
    d = config.domain
    w = config.effective_weights
    echo = {
        "mode": config.mode,
        "t_lo": d.t_lo, "t_hi": d.t_hi, "x_lo": d.x_lo, "x_hi": d.x_hi,
        "alpha": d.alpha, "lam": d.lam,
        "widths": ",".join(str(v) for v in config.arch.widths),
        "n_ic": config.n_ic, "n_bc": config.n_bc, "n_f": config.n_f,
        "n_data": config.n_data if config.n_data is not None else "",
        "w_u": w.w_u, "w_f": w.w_f,
        "noise_level": config.noise_level,
        "adam_steps": config.adam_steps, "adam_lr": config.adam_lr,
        "lbfgs_max_iters": config.lbfgs_max_iters,
        "seed": config.seed,
        "grid_t": config.grid_t, "grid_x": config.grid_x,
        "package_version": __version__,
    }
    return echo


def _evaluate(config, obj, theta) -> tuple[ErrorReport, LossBreakdown]:
    grid = eval_grid(config.domain, config.grid_t, config.grid_x)
    pred = obj.predict(theta, grid)
    exact = analytic_solution(config.domain.alpha, config.domain.lam,
                              grid[:, 0], grid[:, 1])
    return error_stats(pred, exact), obj.breakdown(theta)


def _summarize(config, breakdown, report, extra) -> RunSummary:
    values = {"schema_version": SCHEMA_VERSION}
    values.update(_config_echo(config))
    values.update({
        "mse_ic": breakdown.mse_ic, "mse_bc": breakdown.mse_bc,
        "mse_u": breakdown.mse_u, "mse_f": breakdown.mse_f,
        "mse_data": breakdown.mse_data, "loss_total": breakdown.total,
        "relative_l2": report.relative_l2,
        "mean_abs_error": report.mean_abs_error,
        "mean_sq_error": report.mean_sq_error,
        "n_grid_points": report.n_points,
    })
    values.update(extra)
    return RunSummary(values)


def _write_run(config, summary: RunSummary, params, meta, history_phases,
               point_sets) -> Path:
    out = config.run_dir()
    out.mkdir(parents=True, exist_ok=True)
    echo_lines = [f"{k}={_fmt(v)}" for k, v in _config_echo(config).items()]
    (out / "config.echo").write_text("\n".join(echo_lines) + "\n",
                                     encoding="utf-8")
    (out / "summary.txt").write_text(summary.to_text(), encoding="utf-8")
    save_checkpoint(params, meta, out / "checkpoint.txt")
    export_grid((params, meta), config.domain,
                (config.grid_t, config.grid_x), out / "grid.csv")
    _write_history(out / "history.csv", history_phases)
    rows = ["role,t,x,target"]
    for ps in point_sets:
        for i in range(len(ps)):
            tgt = "" if ps.targets is None else format(ps.targets[i], ".17g")
            rows.append(f"{ps.role},{format(ps.coords[i, 0], '.17g')},"
                        f"{format(ps.coords[i, 1], '.17g')},{tgt}")
    (out / "points.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return out


def run_forward(config: ExperimentConfig) -> RunSummary:
    """Train the forward problem and write all run artifacts."""
    if config.mode not in ("forward", "forward-weighted"):
        raise ConfigError("run_forward needs a forward-mode config")
    t_start = time.perf_counter()
    seed_icbc, seed_f, _, _ = config.point_seeds()
    ic, bc = sample_ic_bc(config.domain, config.n_ic, config.n_bc, seed_icbc)
    colloc = sample_collocation(config.domain, config.n_f, seed_f)
    obj = PinnObjective(config.arch, config.domain, ic=ic, bc=bc, colloc=colloc,
                        weights=config.effective_weights)
    theta0 = init_params(config.arch, config.seed)
    res = lbfgs_minimize(obj, theta0,
                         LbfgsConfig(max_iters=config.lbfgs_max_iters))
    report, breakdown = _evaluate(config, obj, res.params)
    wall = time.perf_counter() - t_start
    summary = _summarize(config, breakdown, report, {
        "adam_iters_run": 0,
        "lbfgs_iters_run": res.n_iters,
        "converged": res.converged,
        "line_search_failed": res.line_search_failed,
        "stop_reason": res.stop_reason,
        "wall_seconds": wall,
    })
    meta = {"widths": config.arch.widths, "alpha": config.domain.alpha,
            "lam": config.domain.lam, "lam_trained": False}
    _write_run(config, summary, res.params, meta,
               [("lbfgs", res.history)], [ic, bc, colloc])
    return summary


def run_inverse(config: ExperimentConfig) -> RunSummary:
    """Train network + lambda jointly (Adam then L-BFGS); write artifacts."""
    if config.mode != "inverse":
        raise ConfigError("run_inverse needs an inverse-mode config")
    t_start = time.perf_counter()
    _, _, seed_data, seed_noise = config.point_seeds()
    data = sample_interior_data(config.domain, config.n_data, seed_data)
    if config.noise_level > 0:
        data = add_noise(data, config.noise_level, seed_noise)
    obj = PinnObjective(config.arch, config.domain, data=data)
    theta0 = np.concatenate([init_params(config.arch, config.seed), [0.0]])
    theta1, adam_history = adam_minimize(obj, theta0, config.adam_steps,
                                         lr=config.adam_lr)
    res = lbfgs_minimize(obj, theta1,
                         LbfgsConfig(max_iters=config.lbfgs_max_iters))
    lambda_hat = float(res.params[-1])
    report, breakdown = _evaluate(config, obj, res.params)
    wall = time.perf_counter() - t_start
    summary = _summarize(config, breakdown, report, {
        "lambda_hat": lambda_hat,
        "lambda_error_percent": lambda_error(lambda_hat, config.domain.lam),
        "adam_iters_run": config.adam_steps,
        "lbfgs_iters_run": res.n_iters,
        "converged": res.converged,
        "line_search_failed": res.line_search_failed,
        "stop_reason": res.stop_reason,
        "wall_seconds": wall,
    })
    meta = {"widths": config.arch.widths, "alpha": config.domain.alpha,
            "lam": lambda_hat, "lam_trained": True}
    _write_run(config, summary, res.params[:-1], meta,
               [("adam", adam_history), ("lbfgs", res.history)], [data])
    return summary


def run(config: ExperimentConfig) -> RunSummary:
    if config.mode == "inverse":
        return run_inverse(config)
    return run_forward(config)


# --------------------------------------------------------------------- sweeps

SWEEP_LBFGS_CAP = 10000


@dataclass
class SweepTable:
    """relative_l2 per cell; rows x columns with axis labels."""

    row_label: str
    col_label: str
    rows: list
    cols: list
    cells: dict  # (row, col) -> float or None

    def to_text(self) -> str:
        header = [f"{self.row_label}\\{self.col_label}"] + [str(c) for c in self.cols]
        lines = [",".join(header)]
        for r in self.rows:
            row = [str(r)]
            for c in self.cols:
                v = self.cells.get((r, c))
                row.append("" if v is None else format(v, ".17g"))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _sweep_cell(base: ExperimentConfig, **overrides) -> float | None:
    """One sweep cell; any per-cell failure yields a blank (None) entry."""
    try:
        summary = run_forward(replace(base, **overrides))
        return float(summary["relative_l2"])
    except Exception:
        return None


def sweep_data(base: ExperimentConfig, n_u_list, n_f_list,
               out_path=None) -> SweepTable:
    """One forward run per (N_u, N_f); N_u splits evenly between IC and BC."""
    if base.mode not in ("forward", "forward-weighted"):
        raise ConfigError("sweep needs a forward-mode base config")
    cells = {}
    cap = min(base.lbfgs_max_iters, SWEEP_LBFGS_CAP)
    for n_u in n_u_list:
        for n_f in n_f_list:
            cells[(n_u, n_f)] = _sweep_cell(
                base, n_ic=n_u // 2, n_bc=n_u - n_u // 2, n_f=n_f,
                lbfgs_max_iters=cap,
                out_dir=str(Path(base.out_dir) / f"sweep_data_nu{n_u}_nf{n_f}"))
    table = SweepTable("n_u", "n_f", list(n_u_list), list(n_f_list), cells)
    if out_path is not None:
        Path(out_path).write_text(table.to_text(), encoding="utf-8")
    return table


def sweep_arch(base: ExperimentConfig, layers_list, width_list,
               out_path=None) -> SweepTable:
    """One forward run per (hidden layers, width) at the base point counts."""
    if base.mode not in ("forward", "forward-weighted"):
        raise ConfigError("sweep needs a forward-mode base config")
    cells = {}
    cap = min(base.lbfgs_max_iters, SWEEP_LBFGS_CAP)
    for layers in layers_list:
        for width in width_list:
            cells[(layers, width)] = _sweep_cell(
                base, arch=Architecture.from_hidden(layers, width),
                lbfgs_max_iters=cap,
                out_dir=str(Path(base.out_dir) / f"sweep_arch_l{layers}_w{width}"))
    table = SweepTable("layers", "width", list(layers_list), list(width_list), cells)
    if out_path is not None:
        Path(out_path).write_text(table.to_text(), encoding="utf-8")
    return table
