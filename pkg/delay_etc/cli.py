"""Command-line entry point: ``delay-etc simulate|tune|tables|check``.

Exit codes: 0 success, 1 invalid input, 2 infeasible design, 3 a certified
run reported invariant violations.
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from pydantic import ValidationError

from delay_etc.errors import (
    DelayEtcError,
    DivergedError,
    InfeasibleError,
    InvariantViolationError,
    RejectedInputError,
    SearchFailedError,
)
from delay_etc.harness import (
    check_experiment,
    load_config,
    reproduce_tables,
    run_experiment,
    tune_experiment,
)
from delay_etc.settings import Settings, load_settings
from delay_etc.systems import MatrixNorm

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_VIOLATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delay-etc",
        description="Event-triggered control of discrete-time delay systems.",
    )
    parser.add_argument("--out-dir", type=Path, default=None, help="Output directory (default: $DELAY_ETC_OUT_DIR)")
    parser.add_argument(
        "--include-initial-event",
        action="store_true",
        help="Count the implicit update at k = 0 in reported event counts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run every simulation of a config")
    simulate.add_argument("config", type=Path)

    tune = sub.add_parser("tune", help="Select (sigma, a, b) for each initial function")
    tune.add_argument("config", type=Path)

    tables = sub.add_parser("tables", help="Recompute the published event counts")
    tables.add_argument(
        "--matrix-norm",
        type=MatrixNorm,
        choices=list(MatrixNorm),
        default=MatrixNorm.SPECTRAL,
        help="Induced matrix norm behind mu and the gain of chi (default: 2)",
    )

    check = sub.add_parser("check", help="Feasibility and certificate checks only")
    check.add_argument("config", type=Path)
    return parser


def _cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    config = load_config(args.config)
    summary = run_experiment(config, out_dir=args.out_dir, settings=settings)
    for run in summary.runs:
        count = run.event_count_incl if args.include_initial_event else run.event_count_excl
        print(
            f"initial={run.initial} horizon={run.horizon} trigger={run.trigger}: "
            f"{count} events, min gap {run.min_gap}, {run.sequence_class}, "
            f"|x(K)|={run.final_state_norm:.3e}"
        )
    failed = summary.certified_violations
    if failed:
        raise InvariantViolationError(
            f"{len(failed)} certified run(s) reported violations; see {config.outputs.summary_json}"
        )
    return EXIT_OK


def _cmd_tune(args: argparse.Namespace, settings: Settings) -> int:
    results = tune_experiment(load_config(args.config))
    print(json.dumps([r.to_dict() for r in results], indent=2))
    return EXIT_OK


def _cmd_tables(args: argparse.Namespace, settings: Settings) -> int:
    document = reproduce_tables(
        include_initial=args.include_initial_event, settings=settings, norm=args.matrix_norm
    )
    print(document.render(), end="")
    settings.out_dir.mkdir(parents=True, exist_ok=True)
    out = settings.out_dir / "tables.json"
    out.write_text(document.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {out}")
    return EXIT_OK


def _cmd_check(args: argparse.Namespace, settings: Settings) -> int:
    print(json.dumps(check_experiment(load_config(args.config)), indent=2))
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "tune": _cmd_tune,
    "tables": _cmd_tables,
    "check": _cmd_check,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.out_dir is not None:
        settings = replace(settings, out_dir=args.out_dir)
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args, settings)
    except (ValidationError, RejectedInputError, json.JSONDecodeError, OSError, DivergedError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (InfeasibleError, SearchFailedError) as e:
        print(f"Infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvariantViolationError as e:
        print(f"Violation: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    except DelayEtcError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
