"""Command-line entry point for the corpus builder.

Subcommands mirror the pipeline stages plus ``build`` for an end-to-end run.
Exit codes: 0 success, 2 for budget/config errors, 1 for anything else.
"""

from __future__ import annotations

import argparse
import json
import sys

from .ingest import BudgetExceeded
from .pipeline import STAGE_ORDER, ConfigMismatch, MissingUpstream, build_all, load_config, run_stage

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET_OR_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlcorpus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_ORDER + ("build",):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "build" else "run all stages")
        p.add_argument("--config", required=True, help="pipeline config file (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--templates", default=None, help="override the prompt template asset path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed, out_dir=args.out, templates_path=args.templates)
        if args.command == "build":
            manifest = build_all(config)
            _summary(manifest["stages"])
        else:
            report = run_stage(args.command, config)
            _summary({args.command: report})
            if args.command == "stats":
                for subset in ("alignment", "instruction"):
                    table = config.out_dir / "stats" / f"{subset}.txt"
                    if table.is_file():
                        sys.stdout.write(table.read_text("utf-8") + "\n")
    except (BudgetExceeded, ConfigMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET_OR_CONFIG
    except (MissingUpstream, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def _summary(reports: dict) -> None:
    for stage, report in reports.items():
        rejected = sum(report.get("rejected", {}).values())
        print(
            f"{stage}: input={report.get('input', 0)} kept={report.get('kept', 0)} "
            f"rejected={rejected} processed={report.get('processed', report.get('input', 0))}"
        )


if __name__ == "__main__":
    sys.exit(main())
