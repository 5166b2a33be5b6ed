"""
Unit tests for the exact sweep oracle.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellsim.core.config import SATURATING_L
from bellsim.core.types import CoincidenceWindow, RunSeed, Setting
from bellsim.exceptions import DegenerateModelError, ValidationError
from bellsim.models import OctantModel, OctantModelParams, QmSingletSampler
from bellsim.oracle import (
    PiecewiseResponse,
    _z_score,
    exact_chsh,
    grid_pair_statistics,
    mc_vs_exact_report,
    refine,
    sweep_common_part,
    sweep_pair,
)

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
bands = st.floats(min_value=0.0, max_value=1.0)
windows = st.floats(min_value=0.1, max_value=3.0)


def octant_pattern_at(l: float) -> PiecewiseResponse:
    return OctantModel(OctantModelParams(l)).piecewise()


@pytest.mark.unit
class TestPiecewiseResponse:
    """Test cases for pattern validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"breakpoints": (), "outcomes": (), "times": ()},
            {"breakpoints": (0.0, 1.0), "outcomes": (1,), "times": (0.0, 0.0)},
            {"breakpoints": (0.0, 1.0, 1.0), "outcomes": (1, -1, 1), "times": (0.0, 0.0, 0.0)},
            {"breakpoints": (0.0, 7.0), "outcomes": (1, -1), "times": (0.0, 0.0)},
            {"breakpoints": (0.0, 1.0), "outcomes": (1, 0), "times": (0.0, 0.0)},
            {"breakpoints": (0.0, 1.0), "outcomes": (1, -1), "times": (0.0, math.nan)},
            {"breakpoints": (0.0,), "outcomes": (1,), "times": (0.0,), "band_height": 1.5},
        ],
        ids=["empty", "lengths", "repeated", "out-of-range", "outcome", "nan-time", "band"],
    )
    def test_degenerate_patterns(self, kwargs):
        """Test that malformed patterns are rejected."""
        with pytest.raises(DegenerateModelError):
            PiecewiseResponse(**kwargs)

    def test_interval_index_wraps(self):
        """Test that angles before the first breakpoint use the last interval."""
        pattern = PiecewiseResponse((1.0, 4.0), (1, -1), (0.0, 0.0))
        np.testing.assert_array_equal(pattern.interval_index(np.array([0.5, 1.0, 3.9, 4.0, 6.0])), [1, 0, 0, 1, 1])

    def test_layers_skip_empty(self):
        """Test layer list at the band extremes."""
        assert octant_pattern_at(0.0).layers() == ((1.0, False),)
        assert octant_pattern_at(1.0).layers() == ((1.0, True),)
        assert len(octant_pattern_at(0.5).layers()) == 2

    @given(angles, angles, angles, bands)
    def test_refinement_is_normalized(self, a, b, c, l):
        """Test that refinement cell weights sum to one."""
        cells = refine(octant_pattern_at(l), (a, b, c))
        assert cells.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(cells.weights >= 0)


@pytest.mark.unit
class TestSweepPair:
    """Test cases for sweep_pair."""

    def test_reference_example(self):
        """Test l = 1/2 at (0, π/4) with ΔT = 3/2."""
        stats = sweep_pair(octant_pattern_at(0.5), Setting(0.0), Setting(math.pi / 4), CoincidenceWindow(1.5))
        assert stats.p_coincidence == pytest.approx(7 / 8, abs=1e-12)
        assert stats.conditional_correlation == pytest.approx(5 / 7, abs=1e-12)

    @given(bands, st.floats(min_value=0, max_value=6.28))
    def test_equal_settings(self, l, a):
        """Test γ = 1 and E = 1 when both wings share a setting."""
        stats = sweep_pair(octant_pattern_at(l), Setting(a), Setting(a), CoincidenceWindow(1.5))
        assert stats.p_coincidence == pytest.approx(1.0, abs=1e-12)
        assert stats.conditional_correlation == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelated_pair_at_saturation(self, octant_pattern, canonical_settings, window):
        """Test the B,D' pair carries the negative correlation."""
        _, b, _, d = canonical_settings
        stats = sweep_pair(octant_pattern, b, d, window)
        expected = (3 - SATURATING_L) / (3 + SATURATING_L)
        assert stats.conditional_correlation == pytest.approx(-expected, abs=1e-12)
        assert stats.conditional_correlation == pytest.approx(-1 / math.sqrt(2), abs=1e-12)

    @given(angles, angles, bands, windows)
    def test_cells_partition_unit_measure(self, a, c, l, delta_t):
        """Test that the four cells add to one."""
        stats = sweep_pair(octant_pattern_at(l), Setting(a), Setting(c), CoincidenceWindow(delta_t))
        assert stats.total == pytest.approx(1.0, abs=1e-12)

    @given(angles, angles, bands)
    def test_symmetric_in_wings(self, a, c, l):
        """Test that swapping the wings changes nothing."""
        pattern = octant_pattern_at(l)
        window = CoincidenceWindow(1.5)
        forward = sweep_pair(pattern, Setting(a), Setting(c), window)
        backward = sweep_pair(pattern, Setting(c), Setting(a), window)
        assert forward.p_coincidence == pytest.approx(backward.p_coincidence, abs=1e-12)
        assert forward.p_equal_and_coincident == pytest.approx(backward.p_equal_and_coincident, abs=1e-12)

    @given(angles, angles, angles, bands)
    @settings(max_examples=50)
    def test_shift_invariance(self, a, c, s, l):
        """Test that rotating both settings leaves the statistics unchanged."""
        pattern = octant_pattern_at(l)
        window = CoincidenceWindow(1.5)
        base = sweep_pair(pattern, Setting(a), Setting(c), window)
        moved = sweep_pair(pattern, Setting(a + s), Setting(c + s), window)
        assert moved.p_coincidence == pytest.approx(base.p_coincidence, abs=1e-9)
        assert moved.p_equal_and_coincident == pytest.approx(base.p_equal_and_coincident, abs=1e-9)

    def test_no_coincidence_gives_none(self):
        """Test that E is undefined when the window excludes every cell."""
        pattern = PiecewiseResponse.uniform((1, -1), (0.0, 5.0))
        stats = sweep_pair(pattern, Setting(0.0), Setting(math.pi), CoincidenceWindow(1.0))
        assert stats.p_coincidence == 0.0
        assert stats.conditional_correlation is None

    def test_matches_grid_at_aligned_settings(self, octant_model, window):
        """Test sweep and grid agree exactly when settings sit on the grid."""
        pattern = octant_model.piecewise()
        a, c = Setting(0.0), Setting(3 * math.pi / 4)
        swept = sweep_pair(pattern, a, c, window)
        gridded = grid_pair_statistics(octant_model, a, c, window, resolution=8000)
        assert gridded.p_coincidence == pytest.approx(swept.p_coincidence, abs=1e-12)
        assert gridded.p_equal_and_coincident == pytest.approx(swept.p_equal_and_coincident, abs=1e-12)

    def test_grid_resolution_validated(self, octant_model, window):
        """Test the grid resolution check."""
        with pytest.raises(ValidationError):
            grid_pair_statistics(octant_model, Setting(0.0), Setting(0.0), window, resolution=0)


@pytest.mark.unit
class TestCommonPart:
    """Test cases for sweep_common_part."""

    @pytest.mark.parametrize("l", [0.0, 0.25, SATURATING_L, 1.0])
    def test_band_is_the_common_part(self, l, canonical_settings, window):
        """Test P(Λ_I) = l and δ = 4l/(3+l) at the canonical settings."""
        common = sweep_common_part(octant_pattern_at(l), canonical_settings, window)
        assert common.p_intersection == pytest.approx(l, abs=1e-12)
        assert common.delta == pytest.approx(4 * l / (3 + l), abs=1e-12)

    def test_equal_settings_share_everything(self, octant_pattern, window):
        """Test P(Λ_I) = 1 when all four settings coincide."""
        quad = (Setting(0.3),) * 4
        common = sweep_common_part(octant_pattern, quad, window)
        assert common.p_intersection == pytest.approx(1.0, abs=1e-12)
        assert common.delta == pytest.approx(1.0, abs=1e-12)


@pytest.mark.unit
class TestExactChsh:
    """Test cases for exact_chsh."""

    def test_saturation(self, octant_pattern, canonical_settings, window):
        """Test S = 2√2 = 6/γ − 4 at the saturating band height."""
        result = exact_chsh(octant_pattern, canonical_settings, window)
        assert result.s_value == pytest.approx(2 * math.sqrt(2), abs=1e-12)
        assert result.gamma == pytest.approx(3 - 3 / math.sqrt(2), abs=1e-12)
        assert result.delta == pytest.approx(2 - math.sqrt(2), abs=1e-12)
        assert result.bound_gamma == pytest.approx(result.s_value, abs=1e-12)
        assert result.margin == pytest.approx(0.0, abs=1e-12)
        signs = [math.copysign(1, e) for e in result.correlations]
        assert signs == [1, 1, 1, -1]

    @pytest.mark.parametrize("l", np.linspace(0.0, 1.0, 20).tolist())
    def test_closed_forms(self, l, canonical_settings, window):
        """Test the closed forms for γ, δ and S across the band range."""
        result = exact_chsh(octant_pattern_at(l), canonical_settings, window)
        assert result.gamma == pytest.approx((3 + l) / 4, abs=1e-12)
        assert result.s_value == pytest.approx((12 - 4 * l) / (3 + l), abs=1e-12)
        assert result.s_value == pytest.approx(6 / result.gamma - 4, abs=1e-12)
        assert result.s_value == pytest.approx(result.bound_delta, abs=1e-12)

    def test_full_band_is_classical(self, canonical_settings, window):
        """Test that l = 1 gives γ = 1 and S = 2."""
        result = exact_chsh(octant_pattern_at(1.0), canonical_settings, window)
        assert result.gamma == pytest.approx(1.0, abs=1e-12)
        assert result.s_value == pytest.approx(2.0, abs=1e-12)

    def test_classic_model(self, classic_model, canonical_settings, window):
        """Test the sign model reaches exactly the classical bound."""
        result = exact_chsh(classic_model.piecewise(), canonical_settings, window)
        assert result.correlations == pytest.approx((0.5, 0.5, 0.5, -0.5), abs=1e-12)
        assert result.s_value == pytest.approx(2.0, abs=1e-12)
        assert result.gamma == pytest.approx(1.0)

    def test_to_dict(self, octant_pattern, canonical_settings, window):
        """Test the serialized form."""
        data = exact_chsh(octant_pattern, canonical_settings, window).to_dict()
        assert [p["pair"] for p in data["pairs"]] == ["AC'", "AD'", "BC'", "BD'"]
        assert data["classic_bound"] == 2.0
        assert data["common_part"]["delta"] == pytest.approx(2 - math.sqrt(2))


@pytest.mark.unit
class TestMonteCarloComparison:
    """Test cases for the comparison harness."""

    def test_zero_trials_rejected(self, octant_model, canonical_settings, window):
        """Test n = 0 is a validation error."""
        with pytest.raises(ValidationError):
            mc_vs_exact_report(octant_model, canonical_settings, window, 0, RunSeed(1))

    def test_sampler_without_pattern_rejected(self, canonical_settings, window):
        """Test that the quantum sampler cannot be compared."""
        with pytest.raises(ValidationError, match="qm"):
            mc_vs_exact_report(QmSingletSampler(), canonical_settings, window, 10, RunSeed(1))

    def test_rows_cover_every_pair(self, octant_model, canonical_settings, window):
        """Test one γ row and one E row per pair."""
        rows = mc_vs_exact_report(octant_model, canonical_settings, window, 2000, RunSeed(3))
        assert len(rows) == 8
        assert {row.quantity for row in rows} == {"p_coincidence", "conditional_correlation"}
        assert all(row.exact is not None for row in rows)

    @pytest.mark.parametrize(
        "estimate, std_error, exact, expected",
        [
            (1.1, 0.1, 1.0, pytest.approx(1.0)),
            (None, 0.1, 1.0, None),
            (1.0, 0.0, 1.0, 0.0),
            (0.9, 0.0, 1.0, None),
        ],
    )
    def test_z_score(self, estimate, std_error, exact, expected):
        """Test z-scores including the zero-variance cases."""
        assert _z_score(estimate, std_error, exact) == expected
