"""Command-line entry point: ``chronicdx <stage> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(malformed or mismatched inputs), 3 internal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import traceback

from . import __version__
from .config import ConfigError, load_config, validate
from .io import DataFormatError
from .learners import SchemaMismatchError
from .pipeline import STAGES, StageError, plan, run_all, run_stage, stage_requires

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
COMMANDS = tuple(STAGES) + ("run-all",)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2, which we reserve for data errors
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON pipeline configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, metavar="N", help="random seed (overrides seed)")
    common.add_argument("--workers", type=int, metavar="N", help="worker processes; never changes outputs")
    common.add_argument("--dry-run", action="store_true", help="print the stage plan and write nothing")
    common.add_argument("--no-resume", action="store_true", help="run-all: rerun stages even if up to date")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="chronicdx", description="Chronic-disease diagnosis pipeline on daily behavioral data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "generate": "write a synthetic cohort (profiles.csv, daily_records.csv)",
        "clean": "drop participants that fail the retention rules",
        "featurize": "build the participant feature matrix and labels",
        "impute": "fill missing feature values (MI and/or KNNI)",
        "train": "fit every configured model on all retained participants",
        "eval": "nested cross-validation report, including the expert rule",
        "explain": "Shapley attributions, rankings and summary charts",
        "run-all": "run every stage in order and write summary.txt",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def _config(args):
    cfg = load_config(args.config)
    changes = {}
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    return validate(cfg.replace(**changes)) if changes else cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"chronicdx: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    stages = STAGES if args.command == "run-all" else (args.command,)
    if args.dry_run:
        print(plan(cfg, stages))
        return EXIT_OK
    try:
        if args.command in ("run-all", "explain"):
            stage_requires(cfg)
        if args.command == "run-all":
            out = run_all(cfg, resume=not args.no_resume)
            print(f"wrote {out}")
        else:
            run_stage(args.command, cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"chronicdx: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        return _report(exc.cause, exc.stage)
    except Exception as exc:  # noqa: BLE001 - mapped onto exit codes
        return _report(exc, args.command)


def _report(exc: BaseException, stage: str) -> int:
    if isinstance(exc, (DataFormatError, SchemaMismatchError)):
        print(f"chronicdx: {stage}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if isinstance(exc, OSError):
        print(f"chronicdx: {stage}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"chronicdx: {stage}: internal error: {exc!r}", file=sys.stderr)
    traceback.print_exception(type(exc), exc, exc.__traceback__, file=sys.stderr)
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
