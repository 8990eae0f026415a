"""Command-line entry point: ``wlanbw run | list-presets | plot``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, list_presets, load_config, load_preset, validate
from .csvio import SchemaError
from .plotting import emit_plot
from .runner import RunError, run_experiment

OUTPUT_ROOT_ENV = "WLANBW_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlanbw", description="WLAN bandwidth-probing experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a config file")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="preset name (see list-presets)")
    src.add_argument("--config", type=Path, help="YAML experiment config")
    run.add_argument("--seed", type=int)
    run.add_argument("--reps", type=int)
    run.add_argument("--trim", type=int)
    run.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ROOT_ENV}/<name>)")
    run.add_argument("--plot", action="store_true", help="also render every CSV to SVG")

    sub.add_parser("list-presets", help="list built-in scenario presets")

    plot = sub.add_parser("plot", help="render a schema CSV to SVG")
    plot.add_argument("csv", type=Path)
    plot.add_argument("--kind", help="expected schema (curve, transitory, gap, ...)")
    plot.add_argument("--out", type=Path)
    return parser


def _run(args) -> int:
    cfg = load_preset(args.preset) if args.preset else load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError("field 'reps' must be positive")
        cfg.reps = args.reps
    if args.trim is not None:
        cfg.trim = args.trim
    validate(cfg)
    out = args.out or (Path(cfg.output_dir) if cfg.output_dir else
                       Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / cfg.name)
    out = run_experiment(cfg, out)
    if args.plot:
        for csv_path in sorted(out.glob("*.csv")):
            emit_plot(csv_path)
    print(out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-presets":
            for name, desc in list_presets():
                print(f"{name:22s} {desc}")
            return EXIT_OK
        if args.command == "plot":
            print(emit_plot(args.csv, args.kind, args.out))
            return EXIT_OK
        return _run(args)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
