"""
Exact statistics for piecewise-constant local models.

A piecewise model assigns each angle φ = θ − setting an (outcome, time)
pair that is constant on the arcs between its breakpoints; points of the
hidden-variable rectangle with r below the band height respond with the
same outcome at a fixed band time. Shifting the pattern by each setting
and merging all shifted breakpoints gives a common refinement of the
circle on which every response is constant, so every probability of
interest is a finite sum of arc length × layer height.

The module also holds the independent fine-grid enumeration used to
cross-check the sweep, and the Monte Carlo comparison harness.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core.types import (
    CHSH_PAIRS,
    CLASSIC_BOUND,
    TWO_PI,
    CoincidenceWindow,
    RunSeed,
    Setting,
    SettingQuad,
    canonicalize_angle,
    chsh_statistic,
)
from .exceptions import DegenerateModelError, ValidationError
from .utils.logging import log_performance

if TYPE_CHECKING:
    from .models import LocalModel, PairSource


logger = logging.getLogger(__name__)

# Merged breakpoints closer than this are one breakpoint
MERGE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PiecewiseResponse:
    """Piecewise-constant response pattern on the circle.

    Interval ``i`` is ``[breakpoints[i], breakpoints[i+1])``; the last one
    wraps around to ``breakpoints[0] + 2π``. ``times`` apply to the main
    region r ≥ band_height; the band r < band_height answers with the same
    outcomes at ``band_time``.
    """

    breakpoints: Tuple[float, ...]
    outcomes: Tuple[int, ...]
    times: Tuple[float, ...]
    band_height: float = 0.0
    band_time: float = 0.0

    def __post_init__(self) -> None:
        n = len(self.breakpoints)
        if n == 0:
            raise DegenerateModelError("pattern has no intervals")
        if len(self.outcomes) != n or len(self.times) != n:
            raise DegenerateModelError(
                "breakpoints, outcomes and times must have equal length",
                context={
                    "breakpoints": n,
                    "outcomes": len(self.outcomes),
                    "times": len(self.times),
                },
            )
        bps = np.asarray(self.breakpoints, dtype=float)
        if bps[0] < 0.0 or bps[-1] >= TWO_PI or np.any(np.diff(bps) <= 0.0):
            raise DegenerateModelError("breakpoints must be strictly increasing in [0, 2π)")
        if any(o not in (-1, 1) for o in self.outcomes):
            raise DegenerateModelError("outcomes must be ±1")
        if not all(math.isfinite(t) for t in self.times) or not math.isfinite(self.band_time):
            raise DegenerateModelError("times must be finite")
        if not 0.0 <= self.band_height <= 1.0:
            raise DegenerateModelError(f"band height out of [0,1]: {self.band_height}")

    @classmethod
    def uniform(
        cls,
        outcomes: Sequence[int],
        times: Sequence[float],
        band_height: float = 0.0,
        band_time: float = 0.0,
    ) -> "PiecewiseResponse":
        """Pattern with ``len(outcomes)`` equal arcs starting at 0."""
        n = len(outcomes)
        if n == 0:
            raise DegenerateModelError("pattern has no intervals")
        width = TWO_PI / n
        return cls(
            breakpoints=tuple(k * width for k in range(n)),
            outcomes=tuple(int(o) for o in outcomes),
            times=tuple(float(t) for t in times),
            band_height=float(band_height),
            band_time=float(band_time),
        )

    def interval_index(self, phi: np.ndarray) -> np.ndarray:
        """Index of the interval containing each canonical angle."""
        idx = np.searchsorted(np.asarray(self.breakpoints), phi, side="right") - 1
        # angles before the first breakpoint belong to the wrapping interval
        return np.where(idx < 0, len(self.breakpoints) - 1, idx)

    def layers(self) -> Tuple[Tuple[float, bool], ...]:
        """Non-empty (height, is_band) layers of the r-axis."""
        layers = ((self.band_height, True), (1.0 - self.band_height, False))
        return tuple((h, band) for h, band in layers if h > 0.0)


@dataclass(frozen=True)
class PairStatistics:
    """Exact measures for one setting pair.

    The four ``p_*`` cells partition the unit measure.
    """

    p_coincidence: float
    p_equal_and_coincident: float
    p_unequal_and_coincident: float
    p_equal_and_noncoincident: float
    p_unequal_and_noncoincident: float

    @property
    def conditional_correlation(self) -> Optional[float]:
        """E(XY | coincidence), or None when no coincidence can occur."""
        if self.p_coincidence <= 0.0:
            return None
        return (self.p_equal_and_coincident - self.p_unequal_and_coincident) / self.p_coincidence

    @property
    def total(self) -> float:
        """Sum of the four classification cells."""
        return (
            self.p_equal_and_coincident
            + self.p_unequal_and_coincident
            + self.p_equal_and_noncoincident
            + self.p_unequal_and_noncoincident
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert statistics to dictionary."""
        data = asdict(self)
        data["conditional_correlation"] = self.conditional_correlation
        return data


@dataclass(frozen=True)
class CommonPartStatistics:
    """Measure of the intersection Λ_I of the four coincidence sets."""

    p_intersection: float
    pair_probabilities: Tuple[float, float, float, float]
    conditional: Tuple[float, float, float, float]

    @property
    def delta(self) -> float:
        """Minimum over the four pairs of P(Λ_I | Λ_pair)."""
        return min(self.conditional)

    def to_dict(self) -> Dict[str, Any]:
        """Convert statistics to dictionary."""
        return {
            "p_intersection": self.p_intersection,
            "pair_probabilities": list(self.pair_probabilities),
            "conditional": list(self.conditional),
            "delta": self.delta,
        }


@dataclass(frozen=True)
class RefinementCells:
    """Cells of the common refinement for a set of shifts.

    Row ``j`` is one arc × layer cell; column ``k`` of ``outcomes`` and
    ``times`` is the response of the pattern shifted by ``shifts[k]``.
    """

    weights: np.ndarray
    outcomes: np.ndarray
    times: np.ndarray
    shifts: Tuple[float, ...]

    def coincident(self, left: int, right: int, window: CoincidenceWindow) -> np.ndarray:
        """Coincidence flag per cell for the shift columns ``left`` and ``right``."""
        return np.abs(self.times[:, left] - self.times[:, right]) < window.delta_t


def _merged_points(pattern: PiecewiseResponse, shifts: Sequence[float]) -> np.ndarray:
    points = [0.0]
    for shift in shifts:
        points.extend(canonicalize_angle(bp + shift) for bp in pattern.breakpoints)
    merged = np.unique(np.asarray(points))
    keep = np.concatenate(([True], np.diff(merged) > MERGE_TOLERANCE))
    merged = merged[keep]
    if len(merged) > 1 and TWO_PI - merged[-1] <= MERGE_TOLERANCE:
        merged = merged[:-1]
    return merged


def refine(pattern: PiecewiseResponse, shifts: Sequence[float]) -> RefinementCells:
    """Build the common refinement of ``pattern`` shifted by each angle."""
    starts = _merged_points(pattern, shifts)
    ends = np.append(starts[1:], TWO_PI)
    arc_weights = (ends - starts) / TWO_PI
    mids = 0.5 * (starts + ends)

    outcomes_by_shift = []
    times_by_shift = []
    for shift in shifts:
        idx = pattern.interval_index(np.mod(mids - shift, TWO_PI))
        outcomes_by_shift.append(np.asarray(pattern.outcomes, dtype=np.int8)[idx])
        times_by_shift.append(np.asarray(pattern.times, dtype=float)[idx])
    arc_outcomes = np.stack(outcomes_by_shift, axis=1)
    arc_times = np.stack(times_by_shift, axis=1)

    weights, outcomes, times = [], [], []
    for height, is_band in pattern.layers():
        weights.append(arc_weights * height)
        outcomes.append(arc_outcomes)
        times.append(np.full_like(arc_times, pattern.band_time) if is_band else arc_times)

    return RefinementCells(
        weights=np.concatenate(weights),
        outcomes=np.concatenate(outcomes),
        times=np.concatenate(times),
        shifts=tuple(shifts),
    )


def _classify(
    weights: np.ndarray, equal: np.ndarray, coincident: np.ndarray
) -> PairStatistics:
    equal_coinc = float(np.sum(weights[equal & coincident]))
    unequal_coinc = float(np.sum(weights[~equal & coincident]))
    return PairStatistics(
        p_coincidence=equal_coinc + unequal_coinc,
        p_equal_and_coincident=equal_coinc,
        p_unequal_and_coincident=unequal_coinc,
        p_equal_and_noncoincident=float(np.sum(weights[equal & ~coincident])),
        p_unequal_and_noncoincident=float(np.sum(weights[~equal & ~coincident])),
    )


def sweep_pair(
    model: PiecewiseResponse,
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
) -> PairStatistics:
    """Exact pair statistics for left setting ``a`` and right setting ``c``.

    Args:
        model: Piecewise response pattern of the wings
        a: Left setting
        c: Right setting
        window: Coincidence window

    Returns:
        Joint probabilities of outcome agreement and coincidence
    """
    cells = refine(model, (a.angle, c.angle))
    equal = cells.outcomes[:, 0] == cells.outcomes[:, 1]
    return _classify(cells.weights, equal, cells.coincident(0, 1, window))


def sweep_common_part(
    model: PiecewiseResponse,
    settings: SettingQuad,
    window: CoincidenceWindow,
) -> CommonPartStatistics:
    """Exact measure of Λ_I and its conditional probability given each pair."""
    cells = refine(model, tuple(s.angle for s in settings))
    membership = np.stack(
        [cells.coincident(i, j, window) for _, i, j in CHSH_PAIRS], axis=1
    )
    pair_probabilities = tuple(
        float(np.sum(cells.weights[membership[:, k]])) for k in range(len(CHSH_PAIRS))
    )
    p_intersection = float(np.sum(cells.weights[np.all(membership, axis=1)]))
    conditional = tuple(
        p_intersection / p if p > 0.0 else 0.0 for p in pair_probabilities
    )
    return CommonPartStatistics(
        p_intersection=p_intersection,
        pair_probabilities=pair_probabilities,  # type: ignore[arg-type]
        conditional=conditional,  # type: ignore[arg-type]
    )


@dataclass(frozen=True)
class ExactChsh:
    """Exact CHSH assembly at four settings."""

    pairs: Tuple[PairStatistics, PairStatistics, PairStatistics, PairStatistics]
    common: CommonPartStatistics

    @property
    def correlations(self) -> Tuple[Optional[float], ...]:
        """Conditional correlations in pair order."""
        return tuple(p.conditional_correlation for p in self.pairs)

    @property
    def s_value(self) -> Optional[float]:
        """The CHSH statistic, or None if any pair has no coincidences."""
        correlations = self.correlations
        if any(e is None for e in correlations):
            return None
        return chsh_statistic(correlations)  # type: ignore[arg-type]

    @property
    def gamma(self) -> float:
        """Minimum coincidence probability over the four pairs."""
        return min(p.p_coincidence for p in self.pairs)

    @property
    def delta(self) -> float:
        """Relative size of the common part."""
        return self.common.delta

    @property
    def bound_gamma(self) -> Optional[float]:
        """6/γ − 4, or None when γ = 0."""
        return 6.0 / self.gamma - 4.0 if self.gamma > 0.0 else None

    @property
    def bound_delta(self) -> float:
        """4 − 2δ."""
        return 4.0 - 2.0 * self.delta

    @property
    def margin(self) -> Optional[float]:
        """bound_gamma − S."""
        if self.s_value is None or self.bound_gamma is None:
            return None
        return self.bound_gamma - self.s_value

    def to_dict(self) -> Dict[str, Any]:
        """Convert result to dictionary."""
        return {
            "pairs": [
                {"pair": label, **stats.to_dict()}
                for (label, _, _), stats in zip(CHSH_PAIRS, self.pairs)
            ],
            "common_part": self.common.to_dict(),
            "s_value": self.s_value,
            "gamma": self.gamma,
            "delta": self.delta,
            "classic_bound": CLASSIC_BOUND,
            "bound_delta": self.bound_delta,
            "bound_gamma": self.bound_gamma,
            "margin": self.margin,
        }


@log_performance("exact_chsh")
def exact_chsh(
    model: PiecewiseResponse,
    settings: SettingQuad,
    window: CoincidenceWindow,
) -> ExactChsh:
    """Exact pair statistics at (a,c), (a,d), (b,c), (b,d) plus the common part."""
    pairs = tuple(
        sweep_pair(model, settings[i], settings[j], window) for _, i, j in CHSH_PAIRS
    )
    result = ExactChsh(
        pairs=pairs,  # type: ignore[arg-type]
        common=sweep_common_part(model, settings, window),
    )
    logger.debug(f"Exact CHSH: S={result.s_value}, gamma={result.gamma:.6f}")
    return result


def _grid_layers(model: "LocalModel", resolution: int) -> Tuple[np.ndarray, List[Tuple[float, float]]]:
    if resolution < 1:
        raise ValidationError("resolution must be >= 1", field="resolution", value=resolution)
    theta = (np.arange(resolution) + 0.5) * (TWO_PI / resolution)
    band = model.band_height
    layers = [(band / 2.0, band), ((1.0 + band) / 2.0, 1.0 - band)]
    return theta, [(r_value, height) for r_value, height in layers if height > 0.0]


def grid_pair_statistics(
    model: "LocalModel",
    a: Setting,
    c: Setting,
    window: CoincidenceWindow,
    resolution: int = 1_000_000,
) -> PairStatistics:
    """Brute-force pair statistics on a midpoint θ-grid × one r per layer.

    Responses come from the model's own vectorized ``respond_many``, not
    from its piecewise pattern, so this is an independent check of the
    sweep. Cells are counted as integers; settings aligned with the grid
    give exact answers.
    """
    theta, layers = _grid_layers(model, resolution)

    cells = np.zeros(4)
    for r_value, height in layers:
        r = np.full(resolution, r_value)
        out_l, t_l = model.respond_many(theta, r, a)
        out_r, t_r = model.respond_many(theta, r, c)
        equal = out_l == out_r
        coincident = np.abs(t_l - t_r) < window.delta_t
        counts = np.array(
            [
                np.count_nonzero(equal & coincident),
                np.count_nonzero(~equal & coincident),
                np.count_nonzero(equal & ~coincident),
                np.count_nonzero(~equal & ~coincident),
            ]
        )
        cells += height * counts / resolution

    return PairStatistics(
        p_coincidence=float(cells[0] + cells[1]),
        p_equal_and_coincident=float(cells[0]),
        p_unequal_and_coincident=float(cells[1]),
        p_equal_and_noncoincident=float(cells[2]),
        p_unequal_and_noncoincident=float(cells[3]),
    )


def grid_common_part_statistics(
    model: "LocalModel",
    settings: SettingQuad,
    window: CoincidenceWindow,
    resolution: int = 1_000_000,
) -> CommonPartStatistics:
    """Brute-force measure of Λ_I on the same grid as ``grid_pair_statistics``.

    Args:
        model: Model queried through ``respond_many`` at each of the four settings
        settings: Settings (a, b, c', d')
        window: Coincidence window
        resolution: Number of θ cells per layer

    Returns:
        P(Λ_I), the four pair coincidence probabilities and δ
    """
    theta, layers = _grid_layers(model, resolution)

    pair_probabilities = np.zeros(len(CHSH_PAIRS))
    p_intersection = 0.0
    for r_value, height in layers:
        r = np.full(resolution, r_value)
        times = [model.respond_many(theta, r, setting)[1] for setting in settings]
        membership = np.stack(
            [np.abs(times[i] - times[j]) < window.delta_t for _, i, j in CHSH_PAIRS], axis=1
        )
        pair_probabilities += height * np.count_nonzero(membership, axis=0) / resolution
        p_intersection += height * np.count_nonzero(np.all(membership, axis=1)) / resolution

    conditional = tuple(
        p_intersection / p if p > 0.0 else 0.0 for p in pair_probabilities
    )
    return CommonPartStatistics(
        p_intersection=float(p_intersection),
        pair_probabilities=tuple(float(p) for p in pair_probabilities),  # type: ignore[arg-type]
        conditional=conditional,  # type: ignore[arg-type]
    )


@dataclass(frozen=True)
class ComparisonRow:
    """One Monte Carlo quantity next to its exact value."""

    pair: str
    quantity: str
    monte_carlo: Optional[float]
    std_error: Optional[float]
    exact: Optional[float]
    z_score: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        """Convert row to dictionary."""
        return asdict(self)


def _z_score(
    estimate: Optional[float], std_error: Optional[float], exact: Optional[float]
) -> Optional[float]:
    if estimate is None or exact is None or std_error is None:
        return None
    if std_error > 0.0:
        return (estimate - exact) / std_error
    return 0.0 if abs(estimate - exact) <= MERGE_TOLERANCE else None


def mc_vs_exact_report(
    model: "PairSource",
    settings: SettingQuad,
    window: CoincidenceWindow,
    n: int,
    seed: RunSeed,
    lanes: int = 1,
) -> List[ComparisonRow]:
    """Compare Monte Carlo pair estimates with the exact sweep.

    Raises:
        ValidationError: If ``n < 1`` or the model has no piecewise form.
    """
    from .engine import run_pair

    if n < 1:
        raise ValidationError("n must be >= 1", field="n", value=n, expected=">= 1")
    pattern = model.piecewise()
    if pattern is None:
        raise ValidationError(
            f"model '{model.name.value}' has no exact piecewise form", field="model"
        )

    rows: List[ComparisonRow] = []
    for pair_index, (label, i, j) in enumerate(CHSH_PAIRS):
        estimate = run_pair(
            model, settings[i], settings[j], window, n, seed, pair_index, lanes=lanes
        )
        exact = sweep_pair(pattern, settings[i], settings[j], window)
        gamma_se = math.sqrt(estimate.gamma_hat * (1.0 - estimate.gamma_hat) / n)
        rows.append(
            ComparisonRow(
                pair=label,
                quantity="p_coincidence",
                monte_carlo=estimate.gamma_hat,
                std_error=gamma_se,
                exact=exact.p_coincidence,
                z_score=_z_score(estimate.gamma_hat, gamma_se, exact.p_coincidence),
            )
        )
        rows.append(
            ComparisonRow(
                pair=label,
                quantity="conditional_correlation",
                monte_carlo=estimate.e_conditional,
                std_error=estimate.std_error,
                exact=exact.conditional_correlation,
                z_score=_z_score(
                    estimate.e_conditional, estimate.std_error, exact.conditional_correlation
                ),
            )
        )
    return rows
