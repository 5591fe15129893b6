"""Command line interface: solve, sweep-alpha, convergence, example-config."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, EXAMPLE_CONFIG, load_config
from .experiments import ExperimentError, cmd_alpha_sweep, cmd_convergence, cmd_solve
from .grid import GridError
from .newton import NewtonError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatmeasure",
        description="Sparse measure-valued control of the 1D heat equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML or JSON run file")
        p.add_argument("--scheme", choices=["vd", "dg", "both"], help="override the scheme")
        p.add_argument("--out", help="output directory (overrides the config)")

    p_solve = sub.add_parser("solve", help="single solve per scheme")
    common(p_solve)
    p_solve.add_argument("--dump-matrices", action="store_true", help="write MatrixMarket files")
    p_solve.add_argument("--log", action="store_true", help="write per-iteration CSV logs")
    p_solve.add_argument(
        "--dump-ydensity", action="store_true", help="write the sampled desired state as CSV"
    )

    p_sweep = sub.add_parser("sweep-alpha", help="descending penalty sweep")
    common(p_sweep)
    p_sweep.add_argument("--points", type=int, default=40, help="sweep size when auto-generated")

    p_conv = sub.add_parser("convergence", help="manufactured-data convergence ladder")
    common(p_conv)
    p_conv.add_argument(
        "--coupling", choices=["tau=h/2", "tau=h^2/2"], default="tau=h/2", help="tau-h coupling"
    )
    p_conv.add_argument(
        "--levels",
        help="comma separated list of 1/h values, e.g. 8,16,32,64,128",
    )

    sub.add_parser("example-config", help="print a commented example configuration")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "example-config":
        print(EXAMPLE_CONFIG, end="")
        return EXIT_OK

    try:
        cfg = load_config(args.config)
        if args.scheme:
            cfg.scheme = args.scheme
        if args.command == "solve":
            cmd_solve(
                cfg,
                out_dir=args.out,
                dump_mats=args.dump_matrices,
                write_log=args.log,
                dump_ydensity=args.dump_ydensity,
            )
        elif args.command == "sweep-alpha":
            cmd_alpha_sweep(cfg, out_dir=args.out, n_points=args.points)
        elif args.command == "convergence":
            levels = None
            if args.levels:
                levels = [int(v) for v in args.levels.split(",")]
            cmd_convergence(cfg, args.coupling, out_dir=args.out, levels=levels)
    except (ConfigError, GridError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExperimentError, NewtonError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
