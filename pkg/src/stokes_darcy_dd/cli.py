"""Command-line entry point for the experiment drivers.

Examples
--------
    stokes-darcy-dd convergence-space --out results/space
    stokes-darcy-dd convergence-time --config time.cfg --precond off
    stokes-darcy-dd gmres-study --resolutions 4 8 16
    stokes-darcy-dd testcase2 --resolutions 16 --newton-iters 4
    stokes-darcy-dd run my_experiment.cfg
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .experiments.config import ConfigError, ExperimentConfig, experiment_defaults, parse_config
from .experiments.drivers import ERROR_COLUMNS, run_experiment

SUBCOMMANDS = {
    "convergence-space": "spatial convergence sweep (first test case)",
    "convergence-time": "temporal convergence with conforming and nonconforming grids",
    "gmres-study": "GMRES iteration counts with and without the preconditioner",
    "testcase2": "pressure-driven flow: self-convergence and grid comparison",
}


def _common(p: argparse.ArgumentParser, with_config=True):
    if with_config:
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory for CSV tables and VTK dumps")
    p.add_argument("--precond", choices=("on", "off"), help="Stokes-based interface preconditioner")
    p.add_argument("--newton-iters", type=int, metavar="K", help="outer Newton iterations")
    p.add_argument("--multiplier-grid", choices=("fluid", "porous"),
                   help="time grid carrying the interface multiplier")
    p.add_argument("--resolutions", type=int, nargs="+", metavar="N",
                   help="cells per unit length (h = 1/N)")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="-v for progress, -vv for solver details")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-darcy-dd",
        description="Space-time domain decomposition for nonlinear Stokes-Darcy flow.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in SUBCOMMANDS.items():
        _common(sub.add_parser(name, help=help_text, description=help_text))
    run = sub.add_parser("run", help="run the experiment described by a configuration file")
    run.add_argument("config_file", metavar="CONFIG")
    _common(run, with_config=False)
    return parser


def resolve_config(args) -> ExperimentConfig:
    """Configuration file (or the test-case defaults) with command-line overrides."""
    if args.command == "run":
        cfg = parse_config(args.config_file)
    elif args.config:
        cfg = dataclasses.replace(parse_config(args.config), experiment=args.command)
    else:
        cfg = experiment_defaults(args.command)
    if args.command == "testcase2" and cfg.test_case != 2:
        raise ConfigError("testcase2 needs test_case = 2 in the configuration")
    outer = cfg.outer
    if args.precond is not None:
        outer = dataclasses.replace(outer, precondition=args.precond == "on")
    if args.newton_iters is not None:
        outer = dataclasses.replace(outer, newton_maxit=args.newton_iters)
    cfg = dataclasses.replace(cfg, outer=outer)
    if args.resolutions:
        cfg = dataclasses.replace(cfg, resolutions=tuple(args.resolutions))
    if args.out:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    if args.multiplier_grid:
        cfg = dataclasses.replace(cfg, multiplier_grid=args.multiplier_grid)
    return cfg.validate()


def format_rows(rows) -> str:
    cols = ["grid_type", "h", "dt_f", "dt_p", "r_f", "precond"] + [c for c in ERROR_COLUMNS if c != "u_f_H1semi"]
    cols += ["gmres_iterations", "wall_seconds"]
    cols = [c for c in cols if any(c in r for r in rows)]

    def cell(v):
        if isinstance(v, float):
            return f"{v:.3e}" if abs(v) < 1e-2 or abs(v) >= 1e4 else f"{v:.4g}"
        return "" if v is None else str(v)

    table = [cols] + [[cell(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(cols))]
    return "\n".join("  ".join(s.rjust(w) for s, w in zip(line, widths)) for line in table)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = run_experiment(cfg, cfg.out_dir)
    print(format_rows(rows))
    print(f"\nwrote CSV output to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
