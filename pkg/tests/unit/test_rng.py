"""
Unit tests for counter-based randomness.
"""

import numpy as np
import pytest

from bellsim.core.rng import (
    BLOCK_SIZE,
    block_bounds,
    block_index,
    draw_hidden_variables,
    trial_rng,
)
from bellsim.core.types import TWO_PI, RunSeed
from bellsim.exceptions import ValidationError


@pytest.mark.unit
class TestTrialRng:
    """Test cases for trial_rng."""

    def test_same_index_same_stream(self):
        """Test determinism."""
        seed = RunSeed(42)
        np.testing.assert_array_equal(trial_rng(seed, 0).random(8), trial_rng(seed, 0).random(8))

    def test_distinct_indices_differ(self):
        """Test that neighbouring indices give different streams."""
        seed = RunSeed(42)
        assert not np.array_equal(trial_rng(seed, 0).random(8), trial_rng(seed, 1).random(8))

    def test_streams_and_seeds_differ(self):
        """Test that seed and stream both enter the key."""
        base = trial_rng(RunSeed(42, 0), 5).random(4)
        assert not np.array_equal(base, trial_rng(RunSeed(42, 1), 5).random(4))
        assert not np.array_equal(base, trial_rng(RunSeed(43, 0), 5).random(4))

    def test_creation_order_is_irrelevant(self):
        """Test that sources do not share state."""
        seed = RunSeed(7)
        first = [trial_rng(seed, i).random(3) for i in range(4)]
        second = [trial_rng(seed, i).random(3) for i in reversed(range(4))][::-1]
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("index", [-1, 1 << 64])
    def test_index_range(self, index):
        """Test that the index must fit in 64 bits."""
        with pytest.raises(ValidationError):
            trial_rng(RunSeed(1), index)


@pytest.mark.unit
class TestBlocks:
    """Test cases for the block partition."""

    @pytest.mark.parametrize("n", [1, BLOCK_SIZE - 1, BLOCK_SIZE, BLOCK_SIZE + 1, 3 * BLOCK_SIZE + 17])
    def test_bounds_partition(self, n):
        """Test that blocks tile [0, n) without gaps."""
        bounds = block_bounds(n)
        assert bounds[0][0] == 0
        assert bounds[-1][1] == n
        for (_, stop), (start, _) in zip(bounds, bounds[1:]):
            assert stop == start
        assert all(stop - start <= BLOCK_SIZE for start, stop in bounds)

    def test_block_index_separates_pairs(self):
        """Test that pairs never share a block source."""
        indices = {block_index(p, b) for p in range(4) for b in range(100)}
        assert len(indices) == 400

    def test_block_index_range(self):
        """Test block range check."""
        with pytest.raises(ValidationError):
            block_index(0, 1 << 48)

    def test_hidden_variable_ranges(self):
        """Test that draws fall in the λ rectangle."""
        theta, r = draw_hidden_variables(RunSeed(3), 1, 0, 10_000)
        assert theta.shape == r.shape == (10_000,)
        assert np.all((theta >= 0) & (theta < TWO_PI))
        assert np.all((r >= 0) & (r < 1))
