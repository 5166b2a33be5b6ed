"""
Configuration management for bellsim.

This module handles two kinds of configuration:

* ``BellSimSettings``: process-level runtime settings (worker lanes,
  logging) loaded from defaults, an optional JSON file and environment
  variables.
* ``ExperimentConfig``: the strict, versioned description of one
  experiment (model, settings, window, trial count, seed) read from JSON
  files or assembled from command-line flags.
"""

import json
import logging
import math
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from ..exceptions import ConfigurationError
from .types import (
    UINT64_MAX,
    CoincidenceWindow,
    LogLevel,
    ModelName,
    PathLike,
    RunSeed,
    Setting,
    SettingQuad,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Band height at which the octant model saturates the γ-bound
SATURATING_L = 3.0 * (3.0 - 2.0 * math.sqrt(2.0))

CANONICAL_SETTINGS = (0.0, math.pi / 2.0, math.pi / 4.0, -math.pi / 4.0)
CANONICAL_DELTA_T = 1.5

_ANGLE_PATTERN = re.compile(
    r"^(?P<sign>[+-]?)\s*(?P<coef>\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*(?:pi|π)"
    r"(?:\s*/\s*(?P<den>\d+(?:\.\d*)?))?$",
    re.IGNORECASE,
)


def parse_angle(value: Union[str, float, int]) -> float:
    """Parse an angle in radians, accepting forms such as ``pi/4`` or ``-3pi/4``.

    Raises:
        ValueError: If the text is not a number or a multiple of π.
    """
    if isinstance(value, bool):
        raise ValueError("angle must be a number, not a boolean")
    if isinstance(value, (int, float)):
        angle = float(value)
    else:
        text = value.strip().replace(" ", "")
        match = _ANGLE_PATTERN.match(text)
        if match:
            coef = float(match.group("coef")) if match.group("coef") else 1.0
            den = float(match.group("den")) if match.group("den") else 1.0
            if den == 0.0:
                raise ValueError(f"zero denominator in angle {value!r}")
            angle = coef * math.pi / den
            if match.group("sign") == "-":
                angle = -angle
        else:
            try:
                angle = float(text)
            except ValueError as e:
                raise ValueError(f"cannot parse angle {value!r} (radians or multiples of pi)") from e
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {value!r}")
    return angle


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpec(_StrictModel):
    """Response model selection."""

    name: ModelName = Field(ModelName.OCTANT, description="Response model id")
    l: float = Field(SATURATING_L, description="Band height of the always-coincident region")

    @field_validator("l")
    @classmethod
    def validate_band(cls, v: float) -> float:
        """Validate the band height."""
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            raise ValueError("l out of [0,1]")
        return v


class SettingsSpec(_StrictModel):
    """The four detector settings in radians: a, b on the left, c, d on the right."""

    a: float = CANONICAL_SETTINGS[0]
    b: float = CANONICAL_SETTINGS[1]
    c: float = CANONICAL_SETTINGS[2]
    d: float = CANONICAL_SETTINGS[3]

    @field_validator("a", "b", "c", "d", mode="before")
    @classmethod
    def validate_angle(cls, v: Any) -> float:
        """Accept numbers or textual multiples of π."""
        return parse_angle(v)

    def as_settings(self) -> SettingQuad:
        """Convert to canonicalized ``Setting`` values."""
        return (Setting(self.a), Setting(self.b), Setting(self.c), Setting(self.d))


class SeedSpec(_StrictModel):
    """Seed and stream of the run."""

    seed: int = Field(42, ge=0, le=UINT64_MAX)
    stream: int = Field(0, ge=0, le=UINT64_MAX)

    def as_run_seed(self) -> RunSeed:
        """Convert to a ``RunSeed``."""
        return RunSeed(self.seed, self.stream)


class ExperimentConfig(_StrictModel):
    """Versioned description of one experiment."""

    schema_version: int = Field(SCHEMA_VERSION, description="Config schema version")
    model: ModelSpec = Field(default_factory=ModelSpec)
    settings: SettingsSpec = Field(default_factory=SettingsSpec)
    delta_t: float = Field(CANONICAL_DELTA_T, description="Coincidence window ΔT")
    trials_per_pair: int = Field(1_000_000, description="Monte Carlo trials per setting pair")
    seed: SeedSpec = Field(default_factory=SeedSpec)

    @field_validator("schema_version")
    @classmethod
    def validate_schema_version(cls, v: int) -> int:
        """Only the current schema version is understood."""
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v} (expected {SCHEMA_VERSION})")
        return v

    @field_validator("delta_t")
    @classmethod
    def validate_delta_t(cls, v: float) -> float:
        """Validate that the window is positive."""
        if not (math.isfinite(v) and v > 0.0):
            raise ValueError("delta_t must be > 0")
        return v

    @field_validator("trials_per_pair")
    @classmethod
    def validate_trials(cls, v: int) -> int:
        """Validate that at least one trial is run."""
        if v < 1:
            raise ValueError("trials_per_pair must be >= 1")
        return v

    @property
    def window(self) -> CoincidenceWindow:
        """The coincidence window."""
        return CoincidenceWindow(self.delta_t)

    @property
    def run_seed(self) -> RunSeed:
        """The run seed."""
        return self.seed.as_run_seed()

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to a JSON-compatible dictionary."""
        return self.model_dump(mode="json")

    def to_json(self) -> str:
        """Canonical JSON form (sorted keys)."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_updates(self, **changes: Any) -> "ExperimentConfig":
        """Return a validated copy with nested updates applied.

        Keys use dotted paths, e.g. ``{"model.l": 0.5, "delta_t": 2.5}``.
        """
        data = self.to_dict()
        for dotted, value in changes.items():
            target = data
            *parents, leaf = dotted.split(".")
            for part in parents:
                target = target[part]
            target[leaf] = value
        return validate_config(data)

    def save_to_file(self, config_path: PathLike) -> None:
        """Save configuration to a JSON file."""
        config_path = Path(config_path)
        config_path.parent.mkdir(parents=True, exist_ok=True)
        config_path.write_text(self.to_json() + "\n", encoding="utf-8")


def _format_errors(error: PydanticValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        key = ".".join(str(part) for part in item["loc"]) or "<root>"
        message = item["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, ") :]
        messages.append(f"{key}: {message}")
    return messages


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping into an ``ExperimentConfig``.

    Raises:
        ConfigurationError: Naming the first offending key.
    """
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except PydanticValidationError as e:
        messages = _format_errors(e)
        first_key = messages[0].split(":", 1)[0] if messages else None
        raise ConfigurationError(
            "; ".join(messages),
            config_key=first_key,
            context={"errors": len(messages)},
        ) from e


def load_config(config_path: PathLike) -> ExperimentConfig:
    """Load an experiment configuration from a JSON file.

    Args:
        config_path: Path to the JSON file

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigurationError: If the file is missing, unparsable or invalid.
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigurationError(f"Configuration file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in {config_path}: {e}") from e
    config = validate_config(data)
    logger.debug(f"Loaded experiment config from {config_path}")
    return config


class BellSimSettings(BaseModel):
    """Process-level runtime settings."""

    threads: int = Field(
        1,
        description="Maximum worker lanes (never changes results)",
        json_schema_extra={"env": "BELLSIM_THREADS"},
    )

    log_level: LogLevel = Field(
        LogLevel.WARNING,
        description="Logging level",
        json_schema_extra={"env": "BELLSIM_LOG_LEVEL"},
    )

    log_file: Optional[str] = Field(
        None,
        description="Path to JSON log file",
        json_schema_extra={"env": "BELLSIM_LOG_FILE"},
    )

    debug_mode: bool = Field(
        False,
        description="Enable detailed console log format",
        json_schema_extra={"env": "BELLSIM_DEBUG"},
    )

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        """Validate that at least one lane is available."""
        if v < 1:
            raise ValueError("threads must be >= 1")
        return v

    @field_validator("log_file")
    @classmethod
    def validate_log_file(cls, v: Optional[str]) -> Optional[str]:
        """Create the log file's directory."""
        if v is not None:
            Path(v).parent.mkdir(parents=True, exist_ok=True)
        return v

    @classmethod
    def from_env(cls) -> "BellSimSettings":
        """Create settings from environment variables."""
        config_data: Dict[str, Any] = {}

        for field_name, field_info in cls.model_fields.items():
            extra = field_info.json_schema_extra
            env_name = extra.get("env") if isinstance(extra, dict) else None
            if not env_name or env_name not in os.environ:
                continue

            value: Any = os.environ[env_name]
            field_type = field_info.annotation
            try:
                if field_type is bool:
                    value = value.lower() in ("true", "1", "yes", "on")
                elif field_type is int:
                    value = int(value)
            except ValueError as e:
                raise ConfigurationError(
                    f"Invalid value for {env_name}: {value!r}", config_key=env_name
                ) from e
            config_data[field_name] = value

        try:
            return cls(**config_data)
        except PydanticValidationError as e:
            raise ConfigurationError("; ".join(_format_errors(e))) from e

    @classmethod
    def from_file(cls, config_path: PathLike) -> "BellSimSettings":
        """Load settings from a JSON file."""
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigurationError(f"Settings file not found: {config_path}")
        if config_path.suffix.lower() != ".json":
            raise ConfigurationError(
                f"Unsupported settings file format: {config_path.suffix}"
            )
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON in {config_path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"Settings file must hold a JSON object: {config_path}")
        try:
            return cls(**data)
        except PydanticValidationError as e:
            raise ConfigurationError("; ".join(_format_errors(e))) from e

    @classmethod
    def load_settings(
        cls,
        settings_file: Optional[PathLike] = None,
        env_override: bool = True,
    ) -> "BellSimSettings":
        """
        Load settings with priority order:
        1. Environment variables (if env_override=True)
        2. Settings file (if provided)
        3. Default values
        """
        data: Dict[str, Any] = {}
        if settings_file:
            data.update(cls.from_file(settings_file).model_dump(exclude_unset=True))
        if env_override:
            data.update(cls.from_env().model_dump(exclude_unset=True))
        return cls(**data)


# Global settings instance
_settings: Optional[BellSimSettings] = None


def get_settings() -> BellSimSettings:
    """Get the global settings instance."""
    global _settings
    if _settings is None:
        _settings = BellSimSettings.load_settings()
    return _settings


def set_settings(settings: BellSimSettings) -> None:
    """Set the global settings instance."""
    global _settings
    _settings = settings


def reset_settings() -> None:
    """Reset the global settings instance."""
    global _settings
    _settings = None
