"""
Command-line interface for bellsim.

Subcommands:

* ``simulate``  Monte Carlo CHSH run, JSON report and per-pair CSV
* ``exact``     exact sweep of a piecewise model at four settings
* ``scan``      parameter scan written as CSV (value, gamma, S, bound_6g4, margin)
* ``verify``    inequality property suites over random finite models
* ``saturate``  the canonical saturating configuration, exact and Monte Carlo

Exit codes: 0 on success, 1 for invalid input or configuration (including a
pair without coincidences), 2 when an inequality check fails or on any
unexpected error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from . import __version__
from .core.config import ExperimentConfig, get_settings, load_config
from .core.types import PAIR_LABELS, ModelName, RunSeed, ScanParameter
from .engine import ChshEstimate, run_chsh, scan
from .exceptions import (
    EXIT_INTERNAL,
    EXIT_OK,
    BellSimError,
    ConfigurationError,
    NoCoincidenceError,
    TheoremViolationError,
    ValidationError,
    exit_code_for,
)
from .inequality import (
    SUITES,
    SuiteReport,
    critical_gamma,
    efficiency_reference,
    eval_finite,
    finite_model_from_pattern,
    run_suite,
    violation_threshold,
)
from .models import build_model
from .oracle import ExactChsh, PiecewiseResponse, exact_chsh
from .report import RunReport, build_report, scan_csv_text, write_pairs_csv, write_scan_csv
from .utils.logging import LogContext, setup_logging

logger = logging.getLogger(__name__)

# Flag destination -> dotted config key
_CONFIG_FLAGS = {
    "model": "model.name",
    "l": "model.l",
    "a": "settings.a",
    "b": "settings.b",
    "c": "settings.c",
    "d": "settings.d",
    "delta_t": "delta_t",
    "trials": "trials_per_pair",
    "seed": "seed.seed",
    "stream": "seed.stream",
}


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as exceptions."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationError(f"{self.prog}: {message}")


def _fmt(value: Optional[float], digits: int = 6) -> str:
    if value is None:
        return "undefined"
    # round first so that -0.0000001 prints as 0.000000
    return f"{round(value, digits) + 0.0:.{digits}f}"


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment")
    group.add_argument("--config", help="JSON experiment configuration")
    group.add_argument("--model", choices=[m.value for m in ModelName])
    group.add_argument("--l", type=float, help="band height in [0,1]")
    for name in ("a", "b", "c", "d"):
        group.add_argument(
            f"--{name}", help="setting in radians, e.g. 0.785 or pi/4 (use --d=-pi/4)"
        )
    group.add_argument("--delta-t", type=float, dest="delta_t", help="coincidence window")
    group.add_argument("--trials", type=int, help="Monte Carlo trials per pair")
    group.add_argument("--seed", type=int)
    group.add_argument("--stream", type=int)


def _add_output_flags(parser: argparse.ArgumentParser, csv_help: Optional[str] = None) -> None:
    group = parser.add_argument_group("output")
    group.add_argument("--out", help="write the JSON report to this path")
    if csv_help:
        group.add_argument("--csv", help=csv_help)
    group.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    group.add_argument(
        "--canonical", action="store_true", help="omit the timestamp from JSON output"
    )


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    parser = _ArgumentParser(
        prog="bellsim",
        description="Bell experiments with setting-dependent detection times",
    )
    parser.add_argument("--version", action="version", version=f"bellsim {__version__}")
    parser.add_argument(
        "--threads", type=int, help="worker lanes (default: BELLSIM_THREADS or 1)"
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    simulate = sub.add_parser("simulate", help="Monte Carlo CHSH run")
    _add_experiment_flags(simulate)
    _add_output_flags(simulate, "write the per-pair CSV to this path")

    exact = sub.add_parser("exact", help="exact sweep of a piecewise model")
    _add_experiment_flags(exact)
    _add_output_flags(exact)

    scan_cmd = sub.add_parser("scan", help="parameter scan as CSV")
    _add_experiment_flags(scan_cmd)
    scan_cmd.add_argument(
        "--parameter", required=True, choices=[p.value for p in ScanParameter]
    )
    scan_cmd.add_argument("--start", type=float, required=True)
    scan_cmd.add_argument("--stop", type=float, required=True)
    scan_cmd.add_argument("--steps", type=int, default=11)
    mode = scan_cmd.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_true", default=None)
    mode.add_argument("--monte-carlo", dest="exact", action="store_false")
    scan_cmd.add_argument("--csv", help="write the CSV here instead of stdout")

    verify = sub.add_parser("verify", help="inequality property suites")
    verify.add_argument("--suite", default="theorem2", choices=[*SUITES, "all"])
    verify.add_argument("--models", type=int, default=10_000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--stream", type=int, default=0)
    verify.add_argument("--out", help="write the suite reports as JSON")
    verify.add_argument("--json", action="store_true", help="print the suite reports as JSON")

    saturate = sub.add_parser("saturate", help="canonical saturating configuration")
    saturate.add_argument("--exact", action="store_true", help="skip the Monte Carlo run")
    saturate.add_argument("--trials", type=int)
    saturate.add_argument("--seed", type=int)
    _add_output_flags(saturate, "write the per-pair Monte Carlo CSV to this path")

    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Start from ``--config`` (or defaults) and apply explicit flags."""
    config = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    updates = {
        key: getattr(args, dest)
        for dest, key in _CONFIG_FLAGS.items()
        if getattr(args, dest, None) is not None
    }
    return config.with_updates(**updates) if updates else config


def _lanes(args: argparse.Namespace) -> int:
    lanes = args.threads if args.threads is not None else get_settings().threads
    if lanes < 1:
        raise ValidationError("--threads must be >= 1", field="threads", value=lanes)
    return lanes


def _require_pattern(config: ExperimentConfig) -> PiecewiseResponse:
    pattern = build_model(config.model.name, config.model.l).piecewise()
    if pattern is None:
        raise ValidationError(
            f"model '{config.model.name.value}' has no exact piecewise form",
            field="model",
            value=config.model.name.value,
        )
    return pattern


def _emit_report(report: RunReport, args: argparse.Namespace) -> None:
    if args.out:
        report.save(args.out, canonical=args.canonical)
    if args.json:
        sys.stdout.write(report.to_json(args.canonical) + "\n")


def _pair_table(title: str, estimate: ChshEstimate) -> Table:
    table = Table(title=title)
    for column in ("pair", "n", "coincident", "gamma", "E", "std err"):
        table.add_column(column, justify="right")
    for p in estimate.pairs:
        table.add_row(
            p.label,
            str(p.n_total),
            str(p.n_coincident),
            _fmt(p.gamma_hat),
            _fmt(p.e_conditional),
            _fmt(p.std_error),
        )
    return table


def _exact_table(title: str, result: ExactChsh) -> Table:
    table = Table(title=title)
    for column in ("pair", "p_coincidence", "E"):
        table.add_column(column, justify="right")
    for label, stats in zip(PAIR_LABELS, result.pairs):
        table.add_row(label, _fmt(stats.p_coincidence), _fmt(stats.conditional_correlation))
    return table


def _summary_table(rows: List[Dict[str, Any]]) -> Table:
    table = Table(title="CHSH summary")
    for column in ("mode", "gamma", "delta", "S", "bound", "margin"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            row["mode"],
            _fmt(row["gamma"]),
            _fmt(row.get("delta")),
            _fmt(row["S"]),
            _fmt(row["bound"]),
            _fmt(row["margin"]),
        )
    return table


def _exact_summary(result: ExactChsh) -> Dict[str, Any]:
    return {
        "mode": "exact",
        "gamma": result.gamma,
        "delta": result.delta,
        "S": result.s_value,
        "bound": result.bound_gamma,
        "margin": result.margin,
    }


def _mc_summary(estimate: ChshEstimate) -> Dict[str, Any]:
    margin = None
    if estimate.s_value is not None and estimate.gamma_bound is not None:
        margin = estimate.gamma_bound - estimate.s_value
    return {
        "mode": "monte carlo",
        "gamma": estimate.gamma_min,
        "S": estimate.s_value,
        "bound": estimate.gamma_bound,
        "margin": margin,
    }


def _raise_if_undefined(estimate: ChshEstimate) -> None:
    if estimate.undefined_pairs:
        pair = next(p for p in estimate.pairs if not p.defined)
        raise NoCoincidenceError(pair.label, pair.n_total)


def cmd_simulate(args: argparse.Namespace, console: Console) -> int:
    """Monte Carlo run of one configuration."""
    config = resolve_config(args)
    estimate = run_chsh(config, lanes=_lanes(args))
    report = build_report("simulate", config, estimate=estimate)
    _emit_report(report, args)
    if args.csv:
        write_pairs_csv(args.csv, estimate)
    if not args.json:
        console.print(_pair_table("Monte Carlo pairs", estimate))
        console.print(_summary_table([_mc_summary(estimate)]))
    _raise_if_undefined(estimate)
    return EXIT_OK


def cmd_exact(args: argparse.Namespace, console: Console) -> int:
    """Exact sweep at the configured settings."""
    config = resolve_config(args)
    pattern = _require_pattern(config)
    settings = config.settings.as_settings()
    result = exact_chsh(pattern, settings, config.window)
    finite = finite_model_from_pattern(pattern, settings, config.window)
    report = build_report(
        "exact", config, exact=result, delta_gamma=eval_finite(finite).to_dict()
    )
    _emit_report(report, args)
    if not args.json:
        console.print(_exact_table("Exact pairs", result))
        console.print(_summary_table([_exact_summary(result)]))
    return EXIT_OK


def cmd_scan(args: argparse.Namespace, console: Console) -> int:
    """Parameter scan written as CSV."""
    config = resolve_config(args)
    rows = scan(
        config,
        ScanParameter(args.parameter),
        args.start,
        args.stop,
        args.steps,
        exact=args.exact,
        lanes=_lanes(args),
    )
    if args.csv:
        write_scan_csv(args.csv, rows)
        console.print(f"wrote {len(rows)} rows to {args.csv}")
    else:
        sys.stdout.write(scan_csv_text(rows))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, console: Console) -> int:
    """Inequality property suites."""
    suites = SUITES if args.suite == "all" else (args.suite,)
    seed = RunSeed(args.seed, args.stream)
    lanes = _lanes(args)
    reports: List[SuiteReport] = [
        run_suite(suite, models=args.models, seed=seed, lanes=lanes) for suite in suites
    ]

    payload = {"suites": [r.model_dump(mode="json") for r in reports], "version": __version__}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.json:
        sys.stdout.write(text)
    else:
        for r in reports:
            console.print(f"{r.suite}: {r.summary_line()}")
            if r.saturation is not None:
                status = "saturated" if r.saturation.saturated else "NOT saturated"
                console.print(
                    f"  discretized octant model: lhs {_fmt(r.saturation.lhs)}, "
                    f"6/γ-4 {_fmt(r.saturation.bound_gamma)} ({status})"
                )

    for r in reports:
        if r.failed:
            first = r.witnesses[0] if r.witnesses else {}
            raise TheoremViolationError(
                r.suite, first.get("margin") or 0.0, witness=first.get("witness")
            )
        if r.saturation is not None and not r.saturation.saturated:
            raise TheoremViolationError("saturation", r.saturation.gap_gamma)
    return EXIT_OK


def cmd_saturate(args: argparse.Namespace, console: Console) -> int:
    """The canonical saturating configuration."""
    config = ExperimentConfig()
    updates = {
        key: getattr(args, dest)
        for dest, key in (("trials", "trials_per_pair"), ("seed", "seed.seed"))
        if getattr(args, dest, None) is not None
    }
    if updates:
        config = config.with_updates(**updates)

    pattern = _require_pattern(config)
    settings = config.settings.as_settings()
    result = exact_chsh(pattern, settings, config.window)
    delta_gamma = eval_finite(finite_model_from_pattern(pattern, settings, config.window))
    summaries = [_exact_summary(result)]

    estimate: Optional[ChshEstimate] = None
    if not args.exact:
        estimate = run_chsh(config, lanes=_lanes(args))
        summaries.append(_mc_summary(estimate))
        if args.csv:
            write_pairs_csv(args.csv, estimate)

    report = build_report(
        "saturate", config, estimate=estimate, exact=result, delta_gamma=delta_gamma.to_dict()
    )
    _emit_report(report, args)
    if not args.json:
        console.print(_summary_table(summaries))
        if result.s_value is not None:
            console.print(
                f"S={_fmt(result.s_value)} needs gamma >= {_fmt(violation_threshold(result.s_value))}; "
                f"critical gamma {_fmt(critical_gamma())}, "
                f"detection-efficiency reference {_fmt(efficiency_reference())}"
            )
    if estimate is not None:
        _raise_if_undefined(estimate)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Console], int]] = {
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "scan": cmd_scan,
    "verify": cmd_verify,
    "saturate": cmd_saturate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    console = Console(highlight=False)
    error_console = Console(stderr=True, highlight=False)

    try:
        setup_logging(get_settings())
        args = build_parser().parse_args(argv)
        with LogContext(command=args.command, seed=getattr(args, "seed", None)):
            logger.info(f"Running {args.command}")
            return COMMANDS[args.command](args, console)
    except BellSimError as e:
        error_console.print(f"error: {e}", markup=False)
        return exit_code_for(e)
    except Exception as e:  # noqa: BLE001
        logger.exception("Unexpected error")
        error_console.print(f"internal error: {e}", markup=False)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
