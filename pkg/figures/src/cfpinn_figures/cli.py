"""Command-line entry point: render one figure kind (or all of them) from a
run directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from cfpinn_figures.render import DEFAULT_SLICE_TIMES, KINDS, FigureJob, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfpinn-figures",
        description="Render figures from a cfpinn run directory")
    parser.add_argument("kind", choices=KINDS + ("all",),
                        help="figure kind, or 'all' for every kind")
    parser.add_argument("run_dir", help="run directory with exported files")
    parser.add_argument("--out", required=True,
                        help="output PNG path (directory when kind=all)")
    parser.add_argument("--slice-times",
                        default=",".join(str(v) for v in DEFAULT_SLICE_TIMES),
                        help="comma-separated times for the slices figure")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        times = tuple(float(v) for v in args.slice_times.split(",") if v.strip())
    except ValueError as exc:
        raise SystemExit(f"bad --slice-times: {exc}") from exc

    if args.kind == "all":
        out_dir = Path(args.out)
        for kind in KINDS:
            job = FigureJob(run_dir=args.run_dir, kind=kind,
                            out_path=out_dir / f"{kind}.png",
                            slice_times=times)
            data = render(job)
            print(f"wrote {data['out_path']}")
        return 0

    job = FigureJob(run_dir=args.run_dir, kind=args.kind,
                    out_path=Path(args.out), slice_times=times)
    data = render(job)
    print(f"wrote {data['out_path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
