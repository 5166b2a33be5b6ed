"""
Type definitions for bellsim.

This module contains the immutable domain values shared by every other
module: settings, hidden variables, local responses, trial records,
coincidence windows and run seeds, together with the two primitive
operations on them (angle canonicalization and the coincidence test).
"""

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

from ..exceptions import ValidationError

TWO_PI = 2.0 * math.pi
UINT64_MAX = (1 << 64) - 1


class LogLevel(str, Enum):
    """Supported log levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class ModelName(str, Enum):
    """Response models selectable from configuration."""

    OCTANT = "octant"
    CLASSIC = "classic"
    QM = "qm"


class ScanParameter(str, Enum):
    """Parameters a scan can sweep."""

    L = "l"
    DELTA_T = "delta_t"
    RELATIVE_ANGLE = "relative_angle"


class CheckStatus(str, Enum):
    """Outcome of a single inequality check."""

    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


def canonicalize_angle(x: float) -> float:
    """Return the representative of ``x`` modulo 2π in ``[0, 2π)``.

    Raises:
        ValidationError: If ``x`` is NaN or infinite.
    """
    if not math.isfinite(x):
        raise ValidationError(
            f"Angle must be finite, got {x!r}",
            field="angle",
            value=x,
            expected="finite real",
        )
    wrapped = math.fmod(x, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # -tiny + 2π rounds up to 2π
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


@dataclass(frozen=True)
class Setting:
    """A detector setting; the angle is canonicalized on construction."""

    angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "angle", canonicalize_angle(float(self.angle)))

    def shifted(self, offset: float) -> "Setting":
        """Return the setting rotated by ``offset`` radians."""
        return Setting(self.angle + offset)


@dataclass(frozen=True)
class HiddenVariable:
    """The shared point λ = (θ, r) that drives both wings of one trial."""

    theta: float
    r: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta < TWO_PI:
            raise ValidationError(
                f"theta out of [0, 2π): {self.theta!r}", field="theta", value=self.theta
            )
        if not 0.0 <= self.r < 1.0:
            raise ValidationError(f"r out of [0, 1): {self.r!r}", field="r", value=self.r)


@dataclass(frozen=True)
class LocalResponse:
    """One wing's outcome and detection time for a given setting."""

    outcome: int
    time: float

    def __post_init__(self) -> None:
        if self.outcome not in (-1, 1):
            raise ValidationError(
                f"outcome must be ±1, got {self.outcome!r}",
                field="outcome",
                value=self.outcome,
                expected="-1 or +1",
            )
        if not math.isfinite(self.time):
            raise ValidationError(f"time must be finite, got {self.time!r}", field="time")


@dataclass(frozen=True)
class CoincidenceWindow:
    """Maximum time difference (exclusive) for two detections to pair up."""

    delta_t: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_t) and self.delta_t > 0.0):
            raise ValidationError(
                f"delta_t must be strictly positive, got {self.delta_t!r}",
                field="delta_t",
                value=self.delta_t,
                expected="> 0",
            )


@dataclass(frozen=True)
class RunSeed:
    """Seed and stream identifying a reproducible run."""

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= value <= UINT64_MAX:
                raise ValidationError(
                    f"{name} must be a 64-bit unsigned integer, got {value!r}",
                    field=name,
                    value=value,
                )

    def to_dict(self) -> Dict[str, int]:
        """Convert seed to dictionary."""
        return {"seed": self.seed, "stream": self.stream}


def is_coincident(left_time: float, right_time: float, window: CoincidenceWindow) -> bool:
    """True iff the two detection times differ by strictly less than ΔT."""
    return abs(left_time - right_time) < window.delta_t


@dataclass(frozen=True)
class TrialRecord:
    """Both wings' responses for one λ under one setting pair."""

    settings: Tuple[Setting, Setting]
    left: LocalResponse
    right: LocalResponse
    coincident: bool

    @classmethod
    def build(
        cls,
        settings: Tuple[Setting, Setting],
        left: LocalResponse,
        right: LocalResponse,
        window: CoincidenceWindow,
    ) -> "TrialRecord":
        """Create a record, flagging coincidence under ``window``."""
        return cls(
            settings=settings,
            left=left,
            right=right,
            coincident=is_coincident(left.time, right.time, window),
        )

    @property
    def product(self) -> int:
        """Product of the two outcomes."""
        return self.left.outcome * self.right.outcome

    def to_dict(self) -> Dict[str, Any]:
        """Convert record to dictionary."""
        return {
            "settings": [self.settings[0].angle, self.settings[1].angle],
            "left": {"outcome": self.left.outcome, "time": self.left.time},
            "right": {"outcome": self.right.outcome, "time": self.right.time},
            "coincident": self.coincident,
        }


# The four CHSH setting pairs as (left index, right index) into (a, b, c, d)
CHSH_PAIRS: Tuple[Tuple[str, int, int], ...] = (
    ("AC'", 0, 2),
    ("AD'", 0, 3),
    ("BC'", 1, 2),
    ("BD'", 1, 3),
)
PAIR_LABELS = tuple(label for label, _, _ in CHSH_PAIRS)

CLASSIC_BOUND = 2.0


def chsh_statistic(correlations: Sequence[float]) -> float:
    """S = |E(AC')+E(AD')| + |E(BC')-E(BD')| for correlations in pair order."""
    e_ac, e_ad, e_bc, e_bd = correlations
    return abs(e_ac + e_ad) + abs(e_bc - e_bd)


# Type aliases for convenience
SettingQuad = Tuple[Setting, Setting, Setting, Setting]
PathLike = Union[str, Path]
