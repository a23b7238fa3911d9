"""Command line: ``fednorm run|plot|validate``.

Exit codes: 0 success, 1 invalid config or input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ParseError, SchemaError, UnknownMetric, ValidationError
from .config import load_config
from .plot import emit_plot
from .runner import run_experiment

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="fednorm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every sweep point and seed of a config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides config and FEDNORM_OUT_DIR)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed-override", type=int, default=None)

    plot = sub.add_parser("plot", help="plot one metric from a results CSV as SVG")
    plot.add_argument("csv")
    plot.add_argument("--metric", required=True)
    plot.add_argument("--group-by", required=True)
    plot.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="check a config and report every problem")
    val.add_argument("config")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: {cfg.experiment_id} ({cfg.config_hash()[:12]})")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            if args.threads < 1:
                print("error: --threads must be >= 1", file=sys.stderr)
                return EXIT_INVALID
            rows = run_experiment(cfg, out_dir=args.out, threads=args.threads,
                                  seed_override=args.seed_override)
            failed = sum(1 for r in rows if r["round"] == "")
            print(f"wrote {len(rows)} rows ({failed} failed runs)")
            return EXIT_RUNTIME if failed else EXIT_OK
        if args.command == "plot":
            path = emit_plot(args.csv, args.metric, args.group_by, args.out)
            print(f"wrote {path}")
            return EXIT_OK
    except (ParseError, ValidationError, SchemaError, UnknownMetric, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure code
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
