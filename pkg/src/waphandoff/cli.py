"""Command-line front end.

Exit codes: 0 success, 1 validation or domain error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import io
import shutil
import sys
from pathlib import Path
from typing import Sequence

from .scenario import Scenario, ScenarioParseError, ScenarioValidationError, canonical_scenario_path, load_scenario
from .simulation import ComparisonMismatchError, compare, run
from .stats import (
    DEFAULT_EPSILON,
    DEFAULT_FLOOR,
    UndefinedScoreError,
    compare_values,
    load_published_table,
    load_polarity_table,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _load(path: str, seed: int | None = None, duration: float | None = None) -> Scenario:
    try:
        scenario = load_scenario(path)
    except OSError as exc:
        raise CliError(f"cannot read scenario {path}: {exc.strerror or exc}", EXIT_IO) from exc
    except ScenarioValidationError as exc:
        raise CliError("\n".join(f"{path}: {v}" for v in exc.violations), EXIT_DOMAIN) from exc
    except ScenarioParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_DOMAIN) from exc
    if duration is not None and duration < 0:
        raise CliError("--duration must be non-negative", EXIT_DOMAIN)
    return scenario.with_overrides(seed=seed, duration=duration)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from exc


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario, args.seed, args.duration)
    if args.no_wap:
        scenario = scenario.with_overrides(wap_enabled=False)
    output = run(scenario)
    out = Path(args.out)
    _write(out / "stats.csv", output.stats_csv())
    _write(out / "events.json", output.events_json())
    print(
        f"{scenario.name}: {len(output.handoff_log)} handoff events, {output.drops} drops, "
        f"wrote {out / 'stats.csv'} and {out / 'events.json'}"
    )
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario, args.seed, args.duration)
    try:
        table = load_polarity_table(args.polarity)
    except OSError as exc:
        raise CliError(f"cannot read polarity table {args.polarity}: {exc.strerror or exc}", EXIT_IO) from exc
    except (ValueError, KeyError) as exc:
        raise CliError(f"{args.polarity}: bad polarity table: {exc}", EXIT_DOMAIN) from exc
    with_wap = run(scenario.with_overrides(wap_enabled=True))
    without_wap = run(scenario.with_overrides(wap_enabled=False))
    try:
        report = compare(with_wap, without_wap, table, args.epsilon, args.floor)
    except ComparisonMismatchError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from exc
    out = Path(args.out)
    _write(out / "with_wap" / "stats.csv", with_wap.stats_csv())
    _write(out / "with_wap" / "events.json", with_wap.events_json())
    _write(out / "without_wap" / "stats.csv", without_wap.stats_csv())
    _write(out / "without_wap" / "events.json", without_wap.events_json())
    buf = io.StringIO()
    report.write_csv(buf)
    _write(out / "comparison.csv", buf.getvalue())
    text = report.to_text()
    _write(out / "report.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    print(f"{args.scenario}: valid ({len(scenario.nodes)} nodes, fingerprint {scenario.fingerprint()[:12]})")
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    if args.write_canonical:
        target = Path(args.write_canonical)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(canonical_scenario_path(), target)
        except OSError as exc:
            raise CliError(f"cannot write {target}: {exc.strerror or exc}", EXIT_IO) from exc
        print(f"wrote canonical scenario to {target}")
    if args.paper_table or not args.write_canonical:
        report = compare_values(load_published_table(), load_polarity_table(), args.epsilon, args.floor)
        sys.stdout.write(report.to_text())
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage mistakes are domain errors; exit code 2 is reserved for I/O
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="waphandoff",
        description="Simulate WAP-assisted cellular handoff and compare runs with and without access points.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--duration", type=float, help="override the run duration (seconds)")
        p.add_argument("--out", default="results", help="output directory (default: results)")

    def thresholds(p: argparse.ArgumentParser) -> None:
        p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                       help="relative change treated as insignificant (default: 0.10)")
        p.add_argument("--floor", type=float, default=DEFAULT_FLOOR,
                       help="absolute floor for the relative scale (default: 1.0)")

    p_run = sub.add_parser("run", help="run one scenario and write stats.csv and events.json")
    overrides(p_run)
    p_run.add_argument("--no-wap", action="store_true", help="disable access points for this run")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run with and without access points and classify the changes")
    overrides(p_cmp)
    thresholds(p_cmp)
    p_cmp.add_argument("--polarity", help="polarity table JSON (default: bundled table)")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=cmd_validate)

    p_fix = sub.add_parser("fixtures", help="bundled fixtures")
    p_fix.add_argument("--paper-table", action="store_true", help="score the published comparison table")
    p_fix.add_argument("--write-canonical", metavar="PATH", help="copy the canonical scenario to PATH")
    thresholds(p_fix)
    p_fix.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "epsilon", 0.0) < 0:
        print("error: --epsilon must be non-negative", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except UndefinedScoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
