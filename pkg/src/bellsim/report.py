"""
Run reports and CSV export.

A ``RunReport`` carries the echoed configuration, the per-pair numbers,
the CHSH assembly and the verdicts derived from them. Its canonical JSON
form leaves out the timestamp, so reruns of the same configuration are
byte-identical.
"""

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Union

from pydantic import BaseModel, Field

from . import __version__
from .core.config import SCHEMA_VERSION, ExperimentConfig
from .core.types import CLASSIC_BOUND, PathLike
from .engine import ChshEstimate, ScanRow
from .oracle import ExactChsh

# Verdict slack for exact results
EXACT_TOLERANCE = 1e-9
# Verdict slack for Monte Carlo results, in standard errors
MC_SIGMAS = 4.0

PAIR_CSV_COLUMNS = (
    "pair",
    "left_setting",
    "right_setting",
    "n_total",
    "n_coincident",
    "gamma_hat",
    "e_conditional",
    "std_error",
    "left_plus",
    "right_plus",
)

SCAN_CSV_COLUMNS = ("value", "gamma", "S", "bound_6g4", "margin")


class Verdicts(BaseModel):
    """Boolean summaries of S against the bounds."""

    source: str = Field(description="exact or monte_carlo")
    tolerance: float
    violates_classic: bool = False
    exceeds_gamma_bound: bool = False
    saturates: bool = False
    defined: bool = True


class Provenance(BaseModel):
    """Where a report came from."""

    seed: int
    stream: int
    version: str = __version__
    timestamp: Optional[str] = None


class RunReport(BaseModel):
    """Result document of one command."""

    schema_version: int = SCHEMA_VERSION
    command: str
    config: Dict[str, Any]
    pairs: List[Dict[str, Any]] = Field(default_factory=list)
    chsh: Optional[Dict[str, Any]] = None
    exact: Optional[Dict[str, Any]] = None
    delta_gamma: Optional[Dict[str, Any]] = None
    verdicts: Dict[str, Verdicts] = Field(default_factory=dict)
    provenance: Provenance

    def to_dict(self, canonical: bool = False) -> Dict[str, Any]:
        """Dictionary form; ``canonical`` drops the timestamp."""
        exclude = {"provenance": {"timestamp"}} if canonical else None
        return self.model_dump(mode="json", exclude=exclude)

    def to_json(self, canonical: bool = False) -> str:
        """JSON with sorted keys."""
        return json.dumps(self.to_dict(canonical), indent=2, sort_keys=True)

    def save(self, path: PathLike, canonical: bool = False) -> None:
        """Write the report as JSON."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(canonical) + "\n", encoding="utf-8")


def judge(
    s_value: Optional[float],
    gamma_bound: Optional[float],
    tolerance: float,
    source: str,
) -> Verdicts:
    """Compare S with 2 and with 6/γ − 4 under ``tolerance``."""
    if s_value is None or gamma_bound is None:
        return Verdicts(source=source, tolerance=tolerance, defined=False)
    return Verdicts(
        source=source,
        tolerance=tolerance,
        violates_classic=s_value > CLASSIC_BOUND + tolerance,
        exceeds_gamma_bound=s_value > gamma_bound + tolerance,
        saturates=abs(s_value - gamma_bound) <= tolerance,
    )


def monte_carlo_tolerance(estimate: ChshEstimate) -> float:
    """4σ of S − (6/γ − 4), combining the error of S and of γ_min."""
    if estimate.s_std_error is None or estimate.gamma_min <= 0.0:
        return 0.0
    worst = min(estimate.pairs, key=lambda p: p.gamma_hat)
    gamma = worst.gamma_hat
    gamma_se = math.sqrt(gamma * (1.0 - gamma) / worst.n_total)
    bound_se = 6.0 / (gamma * gamma) * gamma_se
    return MC_SIGMAS * math.hypot(estimate.s_std_error, bound_se)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _provenance(config: ExperimentConfig) -> Provenance:
    return Provenance(seed=config.seed.seed, stream=config.seed.stream, timestamp=_timestamp())


def build_report(
    command: str,
    config: ExperimentConfig,
    estimate: Optional[ChshEstimate] = None,
    exact: Optional[ExactChsh] = None,
    delta_gamma: Optional[Dict[str, Any]] = None,
) -> RunReport:
    """Assemble a report from whichever results a command produced.

    Args:
        command: Subcommand name recorded in the report
        config: Resolved experiment configuration
        estimate: Monte Carlo result, if the command simulated
        exact: Exact sweep result, if the model has a piecewise form
        delta_gamma: Set-arithmetic report from ``eval_finite``

    Returns:
        RunReport with pair rows, verdicts and provenance
    """
    verdicts: Dict[str, Verdicts] = {}
    pairs: List[Dict[str, Any]] = []
    if estimate is not None:
        pairs = [p.to_dict() for p in estimate.pairs]
        verdicts["monte_carlo"] = judge(
            estimate.s_value, estimate.gamma_bound, monte_carlo_tolerance(estimate), "monte_carlo"
        )
    if exact is not None:
        if not pairs:
            pairs = exact.to_dict()["pairs"]
        verdicts["exact"] = judge(exact.s_value, exact.bound_gamma, EXACT_TOLERANCE, "exact")

    return RunReport(
        command=command,
        config=config.to_dict(),
        pairs=pairs,
        chsh=estimate.to_dict() if estimate is not None else None,
        exact=exact.to_dict() if exact is not None else None,
        delta_gamma=delta_gamma,
        verdicts=verdicts,
        provenance=_provenance(config),
    )


def _csv_value(value: Any) -> Any:
    return "" if value is None else value


def _write_rows(
    target: Union[PathLike, TextIO], columns: Sequence[str], rows: Iterable[Dict[str, Any]]
) -> None:
    def emit(handle: TextIO) -> None:
        writer = csv.DictWriter(handle, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _csv_value(row.get(c)) for c in columns})

    if isinstance(target, (str, Path)):
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            emit(f)
    else:
        emit(target)


def write_pairs_csv(target: Union[PathLike, TextIO], estimate: ChshEstimate) -> None:
    """Per-pair Monte Carlo estimates, one row per pair."""
    _write_rows(target, PAIR_CSV_COLUMNS, (p.to_dict() for p in estimate.pairs))


def scan_csv_rows(rows: Sequence[ScanRow]) -> List[Dict[str, Any]]:
    """Scan rows keyed by the CSV column names, sorted by value."""
    return [
        {
            "value": row.value,
            "gamma": row.gamma,
            "S": row.s_value,
            "bound_6g4": row.bound_6g4,
            "margin": row.margin,
        }
        for row in sorted(rows, key=lambda r: r.value)
    ]


def write_scan_csv(target: Union[PathLike, TextIO], rows: Sequence[ScanRow]) -> None:
    """Scan table with columns value, gamma, S, bound_6g4, margin."""
    _write_rows(target, SCAN_CSV_COLUMNS, scan_csv_rows(rows))


def scan_csv_text(rows: Sequence[ScanRow]) -> str:
    """The scan CSV as a string."""
    buffer = io.StringIO()
    write_scan_csv(buffer, rows)
    return buffer.getvalue()
