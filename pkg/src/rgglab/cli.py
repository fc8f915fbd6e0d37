"""Command line runner: ``rgglab run|validate|version``.

Exit status is 0 on success, 2 for an invalid config or parameter domain and
3 when a numeric routine or sampling budget fails.  Outputs are written to
``<dir>/<experiment>_seed<seed>.csv`` and ``.json`` where ``<dir>`` is the
config's ``output_path``, else ``$RGGLAB_OUTPUT_DIR``, else the working
directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config, validate_text
from .errors import BudgetExhaustedError, DomainError, InsufficientAcceptanceError, NumericError
from .experiments import run_experiment, to_csv, to_json

OUTPUT_ENV = "RGGLAB_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def output_paths(cfg, override: str | None = None) -> tuple[Path, Path]:
    root = Path(override or cfg.output_path or os.environ.get(OUTPUT_ENV) or ".")
    stem = f"{cfg.experiment}_seed{cfg.seed}"
    return root / f"{stem}.csv", root / f"{stem}.json"


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")


def cmd_run(args) -> int:
    try:
        cfg = parse_config(_read(args.config))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INVALID
    try:
        result = run_experiment(cfg, workers=args.workers)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, BudgetExhaustedError, InsufficientAcceptanceError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    csv_path, json_path = output_paths(cfg, args.output_dir)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(to_csv(result), encoding="utf-8")
    json_path.write_text(to_json(cfg, result), encoding="utf-8")
    print(f"{cfg.experiment} seed={cfg.seed}: {result.headline} -> {csv_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    problems = validate_text(_read(args.config))
    for problem in problems:
        print(problem)
    if not problems:
        print("ok")
    return EXIT_INVALID if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgglab", description="Random geometric graph experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("config", help="config file, or - for stdin")
    run.add_argument("--workers", type=int, default=1, help="worker processes (never changes the output)")
    run.add_argument("--output-dir", default=None, help=f"overrides output_path and ${OUTPUT_ENV}")
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", help="list every violated constraint of a config")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)
    ver = sub.add_parser("version", help="print the tool version")
    ver.set_defaults(func=lambda args: print(__version__) or EXIT_OK)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
