"""
Monte Carlo trial engine.

Each setting pair gets its own trial set: ``n`` hidden variables drawn in
fixed-size blocks from counter-derived sources, evaluated on both wings and
windowed for coincidence. Blocks reduce to integer counts and sums, so the
merge is exact and order-free and the number of worker lanes never changes
a result.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core.config import ExperimentConfig, get_settings
from .core.rng import block_bounds, draw_hidden_variables
from .core.types import (
    CHSH_PAIRS,
    CLASSIC_BOUND,
    CoincidenceWindow,
    RunSeed,
    ScanParameter,
    Setting,
    chsh_statistic,
)
from .exceptions import ValidationError
from .models import PairSource, build_model
from .oracle import exact_chsh
from .utils.logging import log_performance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairCounts:
    """Integer sufficient statistics of a batch of trials."""

    n_total: int = 0
    n_coincident: int = 0
    sum_product: int = 0
    sum_product_sq: int = 0
    left_plus: int = 0
    right_plus: int = 0

    def __add__(self, other: "PairCounts") -> "PairCounts":
        return PairCounts(
            *(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__)
        )


@dataclass(frozen=True)
class PairEstimate:
    """Monte Carlo estimate for one setting pair."""

    label: str
    left_setting: float
    right_setting: float
    counts: PairCounts

    @property
    def n_total(self) -> int:
        return self.counts.n_total

    @property
    def n_coincident(self) -> int:
        return self.counts.n_coincident

    @property
    def defined(self) -> bool:
        """False when the pair produced no coincidence."""
        return self.counts.n_coincident > 0

    @property
    def gamma_hat(self) -> float:
        return self.counts.n_coincident / self.counts.n_total

    @property
    def e_conditional(self) -> Optional[float]:
        """Mean product over coincident trials, None if there were none."""
        if not self.defined:
            return None
        return self.counts.sum_product / self.counts.n_coincident

    @property
    def std_error(self) -> Optional[float]:
        """Sample standard deviation of coincident products over √n_c."""
        n_c = self.counts.n_coincident
        if n_c == 0:
            return None
        if n_c == 1:
            return 0.0
        mean = self.counts.sum_product / n_c
        variance = (self.counts.sum_product_sq - n_c * mean * mean) / (n_c - 1)
        return math.sqrt(max(variance, 0.0) / n_c)

    @property
    def left_plus_fraction(self) -> float:
        """Unconditioned frequency of +1 on the left wing."""
        return self.counts.left_plus / self.counts.n_total

    @property
    def right_plus_fraction(self) -> float:
        """Unconditioned frequency of +1 on the right wing."""
        return self.counts.right_plus / self.counts.n_total

    def to_dict(self) -> Dict[str, Any]:
        """Convert estimate to dictionary."""
        return {
            "pair": self.label,
            "left_setting": self.left_setting,
            "right_setting": self.right_setting,
            **asdict(self.counts),
            "defined": self.defined,
            "gamma_hat": self.gamma_hat,
            "e_conditional": self.e_conditional,
            "std_error": self.std_error,
        }


def _block_counts(
    model: PairSource,
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
    seed: RunSeed,
    pair_index: int,
    block: int,
    size: int,
) -> PairCounts:
    theta, r = draw_hidden_variables(seed, pair_index, block, size)
    out_l, t_l, out_r, t_r = model.sample_pairs(a, c, theta, r)
    coincident = np.abs(t_l - t_r) < window.delta_t
    products = out_l.astype(np.int64) * out_r.astype(np.int64)
    kept = products[coincident]
    return PairCounts(
        n_total=size,
        n_coincident=int(kept.size),
        sum_product=int(kept.sum()),
        sum_product_sq=int((kept * kept).sum()),
        left_plus=int(np.count_nonzero(out_l == 1)),
        right_plus=int(np.count_nonzero(out_r == 1)),
    )


def run_pair(
    model: PairSource,
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
    n: int,
    seed: RunSeed,
    pair_index: int,
    lanes: int = 1,
    label: Optional[str] = None,
) -> PairEstimate:
    """Run ``n`` trials of one setting pair.

    Args:
        model: Source of hidden variables and wing responses
        a: Left setting
        c: Right setting
        window: Coincidence window
        n: Number of trials
        seed: Run seed; ``pair_index`` selects the stream within it
        pair_index: Position of the pair in the CHSH order
        lanes: Worker threads sharing the trial blocks
        label: Pair label, defaulting to the CHSH label for ``pair_index``

    Returns:
        PairEstimate with the raw counts and derived estimators

    Raises:
        ValidationError: If ``n < 1`` or ``lanes < 1``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1", field="n", value=n, expected=">= 1")
    if lanes < 1:
        raise ValidationError("lanes must be >= 1", field="lanes", value=lanes)
    label = label or (CHSH_PAIRS[pair_index][0] if pair_index < len(CHSH_PAIRS) else str(pair_index))

    blocks = block_bounds(n)

    def work(item: Tuple[int, Tuple[int, int]]) -> PairCounts:
        block, (start, stop) = item
        return _block_counts(model, a, c, window, seed, pair_index, block, stop - start)

    items = list(enumerate(blocks))
    if lanes == 1 or len(items) == 1:
        partials = [work(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=min(lanes, len(items))) as executor:
            partials = list(executor.map(work, items))

    counts = sum(partials, PairCounts())
    estimate = PairEstimate(label, a.angle, c.angle, counts)
    logger.debug(
        f"Pair {label}: {counts.n_coincident}/{counts.n_total} coincident "
        f"in {len(blocks)} blocks"
    )
    if not estimate.defined:
        logger.warning(f"Pair {label} produced no coincidences in {n} trials")
    return estimate


@dataclass(frozen=True)
class ChshEstimate:
    """Monte Carlo CHSH assembly over the four setting pairs."""

    pairs: Tuple[PairEstimate, PairEstimate, PairEstimate, PairEstimate]

    @property
    def undefined_pairs(self) -> List[str]:
        """Labels of pairs without coincidences."""
        return [p.label for p in self.pairs if not p.defined]

    @property
    def s_value(self) -> Optional[float]:
        """The CHSH statistic, or None if any pair is undefined."""
        if self.undefined_pairs:
            return None
        return chsh_statistic([p.e_conditional for p in self.pairs])  # type: ignore[misc]

    @property
    def s_std_error(self) -> Optional[float]:
        """Quadrature sum of the four pair standard errors."""
        if self.undefined_pairs:
            return None
        return math.sqrt(sum(p.std_error ** 2 for p in self.pairs))  # type: ignore[operator]

    @property
    def gamma_min(self) -> float:
        return min(p.gamma_hat for p in self.pairs)

    @property
    def classic_bound(self) -> float:
        return CLASSIC_BOUND

    @property
    def gamma_bound(self) -> Optional[float]:
        """6/γ_min − 4, or None when γ_min is zero."""
        return 6.0 / self.gamma_min - 4.0 if self.gamma_min > 0.0 else None

    def to_dict(self) -> Dict[str, Any]:
        """Convert estimate to dictionary."""
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "s_value": self.s_value,
            "s_std_error": self.s_std_error,
            "gamma_min": self.gamma_min,
            "classic_bound": self.classic_bound,
            "gamma_bound": self.gamma_bound,
            "undefined_pairs": self.undefined_pairs,
        }


def _resolve_lanes(lanes: Optional[int]) -> int:
    return lanes if lanes is not None else get_settings().threads


@log_performance("run_chsh")
def run_chsh(config: ExperimentConfig, lanes: Optional[int] = None) -> ChshEstimate:
    """Run the four CHSH pairs of ``config`` on disjoint random streams.

    Args:
        config: Experiment to simulate
        lanes: Worker threads per pair (uses the runtime settings if None)

    Returns:
        ChshEstimate holding the four pair estimates
    """
    lanes = _resolve_lanes(lanes)
    model = build_model(config.model.name, config.model.l)
    settings = config.settings.as_settings()
    pairs = tuple(
        run_pair(
            model,
            settings[i],
            settings[j],
            config.window,
            config.trials_per_pair,
            config.run_seed,
            pair_index,
            lanes=lanes,
            label=label,
        )
        for pair_index, (label, i, j) in enumerate(CHSH_PAIRS)
    )
    estimate = ChshEstimate(pairs=pairs)  # type: ignore[arg-type]
    logger.info(
        f"CHSH run ({config.model.name.value}, n={config.trials_per_pair}, lanes={lanes}): "
        f"S={estimate.s_value}, gamma_min={estimate.gamma_min:.6f}"
    )
    return estimate


@dataclass(frozen=True)
class ScanRow:
    """One row of a parameter scan."""

    value: float
    gamma: float
    s_value: Optional[float]
    bound_6g4: Optional[float]
    source: str
    s_std_error: Optional[float] = None
    delta: Optional[float] = None

    @property
    def margin(self) -> Optional[float]:
        """bound_6g4 − S."""
        if self.s_value is None or self.bound_6g4 is None:
            return None
        return self.bound_6g4 - self.s_value

    def to_dict(self) -> Dict[str, Any]:
        """Convert row to dictionary."""
        data = asdict(self)
        data["margin"] = self.margin
        return data


def relative_angle_settings(delta: float) -> Dict[str, float]:
    """Settings family a=0, b=2Δ, c=Δ, d=−Δ; Δ=π/4 gives the canonical quad."""
    return {"a": 0.0, "b": 2.0 * delta, "c": delta, "d": -delta}


def _validate_scan(parameter: ScanParameter, start: float, stop: float, steps: int) -> None:
    if steps < 2:
        raise ValidationError("steps must be >= 2", field="steps", value=steps, expected=">= 2")
    if not (math.isfinite(start) and math.isfinite(stop)) or start >= stop:
        raise ValidationError(
            f"invalid range [{start}, {stop}]",
            field="range",
            value=(start, stop),
            expected="finite start < stop",
        )
    if parameter is ScanParameter.L and not (0.0 <= start and stop <= 1.0):
        raise ValidationError("l range must lie in [0,1]", field="range", value=(start, stop))
    if parameter is ScanParameter.DELTA_T and start <= 0.0:
        raise ValidationError("delta_t range must be > 0", field="range", value=(start, stop))


def _config_at(config: ExperimentConfig, parameter: ScanParameter, value: float) -> ExperimentConfig:
    if parameter is ScanParameter.L:
        return config.with_updates(**{"model.l": value})
    if parameter is ScanParameter.DELTA_T:
        return config.with_updates(delta_t=value)
    return config.with_updates(
        **{f"settings.{k}": v for k, v in relative_angle_settings(value).items()}
    )


def scan(
    config: ExperimentConfig,
    parameter: ScanParameter,
    start: float,
    stop: float,
    steps: int,
    exact: Optional[bool] = None,
    lanes: Optional[int] = None,
) -> List[ScanRow]:
    """Evaluate the CHSH statistic at ``steps`` evenly spaced parameter values.

    Rows use the exact sweep when the model has a piecewise form (or
    ``exact`` is True) and Monte Carlo otherwise. Rows are sorted by value.

    Args:
        config: Base experiment; the scanned parameter overrides its value
        parameter: ``l``, ``delta_t`` or ``relative_angle``
        start: First parameter value
        stop: Last parameter value
        steps: Number of values, at least two
        exact: Force the exact sweep (True) or Monte Carlo (False)
        lanes: Worker threads for Monte Carlo rows

    Returns:
        One ScanRow per value

    Raises:
        ValidationError: For an invalid range, too few steps, or ``exact``
            requested for a model without a piecewise form.
    """
    parameter = ScanParameter(parameter)
    _validate_scan(parameter, start, stop, steps)

    has_exact = build_model(config.model.name, config.model.l).piecewise() is not None
    use_exact = has_exact if exact is None else exact
    if use_exact and not has_exact:
        raise ValidationError(
            f"model '{config.model.name.value}' has no exact piecewise form",
            field="exact",
            value=True,
        )

    rows: List[ScanRow] = []
    for value in scan_values(start, stop, steps):
        point = _config_at(config, parameter, value)
        if use_exact:
            pattern = build_model(point.model.name, point.model.l).piecewise()
            result = exact_chsh(pattern, point.settings.as_settings(), point.window)
            rows.append(
                ScanRow(
                    value=value,
                    gamma=result.gamma,
                    s_value=result.s_value,
                    bound_6g4=result.bound_gamma,
                    source="exact",
                    delta=result.delta,
                )
            )
        else:
            estimate = run_chsh(point, lanes=lanes)
            rows.append(
                ScanRow(
                    value=value,
                    gamma=estimate.gamma_min,
                    s_value=estimate.s_value,
                    bound_6g4=estimate.gamma_bound,
                    source="monte_carlo",
                    s_std_error=estimate.s_std_error,
                )
            )
    logger.info(f"Scan over {parameter.value}: {len(rows)} rows ({'exact' if use_exact else 'monte carlo'})")
    return sorted(rows, key=lambda row: row.value)


def scan_values(start: float, stop: float, steps: int) -> Sequence[float]:
    """The parameter grid used by ``scan``."""
    return [float(v) for v in np.linspace(start, stop, steps)]
