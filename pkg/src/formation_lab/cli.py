"""Command-line driver: ``formation-lab --scenario sec6_grid.json --command full``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import FormationError, NumericError
from .scenario import COMMANDS, bundled_scenarios, dumps_report, run_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


def _exit_code(exc: FormationError) -> int:
    return EXIT_NUMERIC if isinstance(exc, NumericError) else EXIT_VALIDATION


def _describe(exc: FormationError) -> str:
    ctx = [getattr(exc, "scenario", None), getattr(exc, "stage", None)]
    prefix = ": ".join(c for c in ctx if c)
    return f"{prefix}: {exc}" if prefix else str(exc)


def _run_one(scenario: str, command: str, out: str | None, seed: int | None, quiet: bool) -> int:
    try:
        report = run_scenario(scenario, command, out, seed)
    except FormationError as exc:
        print(f"error: {_describe(exc)}", file=sys.stderr)
        return _exit_code(exc)
    if not quiet:
        sys.stdout.write(dumps_report(report))
    return EXIT_OK


def _run_batch(directory: Path, command: str, out: str | None, seed: int | None, quiet: bool) -> int:
    paths = sorted(directory.glob("*.json"))
    if not paths:
        print(f"error: no scenario files in {directory}", file=sys.stderr)
        return EXIT_VALIDATION
    base = Path(out) if out else Path("out")
    with ProcessPoolExecutor() as pool:
        futures = {
            p: pool.submit(_run_one, str(p), command, str(base / p.stem), seed, True) for p in paths
        }
        codes = {p: f.result() for p, f in futures.items()}
    if not quiet:
        for p, code in codes.items():
            print(f"{p.name}: {'ok' if code == 0 else f'failed (exit {code})'}")
    return max(codes.values())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formation-lab",
        description="Design, predict, check and simulate displacement-consensus formations.",
    )
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario JSON path or bundled scenario name")
    src.add_argument("--batch", type=Path, help="run every *.json scenario in a directory")
    src.add_argument("--list", action="store_true", help="list bundled scenarios")
    parser.add_argument("--command", choices=COMMANDS, default="full")
    parser.add_argument("--out", help="output directory for CSVs and report.json")
    parser.add_argument("--seed", type=int, help="override the scenario's random seed")
    parser.add_argument("--quiet", action="store_true", help="do not print the report")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    if args.list:
        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    if args.batch is not None:
        return _run_batch(args.batch, args.command, args.out, args.seed, args.quiet)
    return _run_one(args.scenario, args.command, args.out, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
