"""Command-line interface for the experiment harness.

Subcommands: forward, inverse, sweep-data, sweep-arch, export-grid,
eval-oracle.  Any flag may also be supplied through an INI config file
(section [cfpinn]); explicit command-line values take precedence over the
file, which takes precedence over built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from cfpinn.conformable import DomainSpec, analytic_solution
from cfpinn.harness import (
    ExperimentConfig,
    export_grid,
    run_forward,
    run_inverse,
    sweep_arch,
    sweep_data,
)
from cfpinn.losses import LossWeights
from cfpinn.net import Architecture

_DEFAULTS = {
    "alpha": 0.5,
    "lam": 0.5073,
    "n_ic": 50,
    "n_bc": 50,
    "n_f": 10000,
    "n_data": 2000,
    "layers": 8,
    "width": 20,
    "weights": None,
    "noise": 0.0,
    "seed": 0,
    "out": "runs",
    "adam_steps": 5000,
    "lbfgs_max_iters": 50000,
    "n_u_list": "20,40,60,80,100,200",
    "n_f_list": "2000,4000,6000,8000,10000",
    "layers_list": "2,4,6,8",
    "width_list": "10,20,40",
    "resolution": "256x100",
    "checkpoint": None,
    "t": None,
    "x": None,
}

_CASTS = {
    "alpha": float, "lam": float, "n_ic": int, "n_bc": int, "n_f": int,
    "n_data": int, "layers": int, "width": int, "noise": float, "seed": int,
    "adam_steps": int, "lbfgs_max_iters": int,
}


def _add_common(p):
    p.add_argument("--config", help="INI file supplying any flag ([cfpinn] section)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n-ic", dest="n_ic", type=int)
    p.add_argument("--n-bc", dest="n_bc", type=int)
    p.add_argument("--n-f", dest="n_f", type=int)
    p.add_argument("--n-data", dest="n_data", type=int)
    p.add_argument("--layers", type=int, help="hidden layer count")
    p.add_argument("--width", type=int, help="hidden layer width")
    p.add_argument("--weights", help="w_u,w_f")
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--adam-steps", dest="adam_steps", type=int)
    p.add_argument("--lbfgs-max-iters", dest="lbfgs_max_iters", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfpinn",
        description="PINN solver for the conformable time-fractional "
                    "diffusion equation")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("forward", "inverse"):
        p = sub.add_parser(name, help=f"train the {name} problem")
        _add_common(p)

    p = sub.add_parser("sweep-data", help="relative-L2 table over (N_u, N_f)")
    _add_common(p)
    p.add_argument("--n-u-list", dest="n_u_list")
    p.add_argument("--n-f-list", dest="n_f_list")

    p = sub.add_parser("sweep-arch", help="relative-L2 table over (layers, width)")
    _add_common(p)
    p.add_argument("--layers-list", dest="layers_list")
    p.add_argument("--width-list", dest="width_list")

    p = sub.add_parser("export-grid", help="evaluate a checkpoint on a grid")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--resolution", help="TxX, e.g. 256x100")

    p = sub.add_parser("eval-oracle", help="print exact solution values")
    _add_common(p)
    p.add_argument("--t", help="comma-separated t values")
    p.add_argument("--x", help="comma-separated x values (paired with --t)")

    return parser


def _load_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise SystemExit(f"config file not found: {path}")
    if not parser.has_section("cfpinn"):
        raise SystemExit("config file needs a [cfpinn] section")
    return dict(parser.items("cfpinn"))


def _merged(args) -> dict:
    """Resolve each setting: CLI > config file > default."""
    file_vals = _load_config_file(args.config) if args.config else {}
    out = {}
    for key, default in _DEFAULTS.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in file_vals:
            raw = file_vals[key]
            out[key] = _CASTS[key](raw) if key in _CASTS else raw
        else:
            out[key] = default
    return out


def _parse_weights(spec: str | None) -> LossWeights | None:
    if spec is None:
        return None
    parts = spec.split(",")
    if len(parts) != 2:
        raise SystemExit("--weights expects w_u,w_f")
    return LossWeights(float(parts[0]), float(parts[1]))


def _int_list(spec: str) -> list:
    return [int(v) for v in spec.split(",") if v.strip()]


def _experiment_config(vals: dict, mode: str) -> ExperimentConfig:
    domain = DomainSpec(alpha=vals["alpha"], lam=vals["lam"])
    arch = Architecture.from_hidden(vals["layers"], vals["width"])
    weights = _parse_weights(vals["weights"]) if isinstance(vals["weights"], str) \
        else vals["weights"]
    if mode == "forward":
        eff_mode = "forward"
        if weights is not None and (weights.w_u, weights.w_f) != (1.0, 1.0):
            eff_mode = "forward-weighted"
        return ExperimentConfig(
            mode=eff_mode, domain=domain, arch=arch, n_ic=vals["n_ic"],
            n_bc=vals["n_bc"], n_f=vals["n_f"], weights=weights,
            lbfgs_max_iters=vals["lbfgs_max_iters"], seed=vals["seed"],
            out_dir=vals["out"])
    return ExperimentConfig(
        mode="inverse", domain=domain, arch=arch, n_data=vals["n_data"],
        noise_level=vals["noise"], adam_steps=vals["adam_steps"],
        lbfgs_max_iters=vals["lbfgs_max_iters"], seed=vals["seed"],
        out_dir=vals["out"])


def _parse_resolution(spec: str):
    try:
        n_t, n_x = spec.lower().split("x")
        return int(n_t), int(n_x)
    except ValueError as exc:
        raise SystemExit(f"bad --resolution {spec!r}, expected TxX") from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    vals = _merged(args)

    if args.command == "forward":
        summary = run_forward(_experiment_config(vals, "forward"))
        sys.stdout.write(summary.to_text())
        return 0

    if args.command == "inverse":
        summary = run_inverse(_experiment_config(vals, "inverse"))
        sys.stdout.write(summary.to_text())
        return 0

    if args.command == "sweep-data":
        base = _experiment_config(vals, "forward")
        out = Path(vals["out"])
        out.mkdir(parents=True, exist_ok=True)
        table = sweep_data(base, _int_list(vals["n_u_list"]),
                           _int_list(vals["n_f_list"]),
                           out_path=out / "sweep_data.csv")
        sys.stdout.write(table.to_text())
        return 0

    if args.command == "sweep-arch":
        base = _experiment_config(vals, "forward")
        out = Path(vals["out"])
        out.mkdir(parents=True, exist_ok=True)
        table = sweep_arch(base, _int_list(vals["layers_list"]),
                           _int_list(vals["width_list"]),
                           out_path=out / "sweep_arch.csv")
        sys.stdout.write(table.to_text())
        return 0

    if args.command == "export-grid":
        if not vals["checkpoint"]:
            raise SystemExit("export-grid needs --checkpoint")
        domain = DomainSpec(alpha=vals["alpha"], lam=vals["lam"])
        res = _parse_resolution(vals["resolution"])
        out = Path(vals["out"])
        if out.suffix == "":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "grid.csv"
        export_grid(vals["checkpoint"], domain, res, out)
        print(f"wrote {out}")
        return 0

    if args.command == "eval-oracle":
        if not vals["t"] or not vals["x"]:
            raise SystemExit("eval-oracle needs --t and --x")
        t = np.array([float(v) for v in str(vals["t"]).split(",")])
        x = np.array([float(v) for v in str(vals["x"]).split(",")])
        if len(t) != len(x):
            raise SystemExit("--t and --x must pair up")
        u = analytic_solution(vals["alpha"], vals["lam"], t, x)
        print("t,x,u_exact")
        for i in range(len(t)):
            print(f"{t[i]:.17g},{x[i]:.17g},{u[i]:.17g}")
        return 0

    raise SystemExit(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
