"""
Integration tests for seed and lane reproducibility.
"""

import pytest

from bellsim.core.rng import BLOCK_SIZE
from bellsim.core.types import ModelName, RunSeed
from bellsim.engine import run_chsh
from bellsim.inequality import run_suite
from bellsim.report import build_report


@pytest.mark.integration
class TestLaneInvariance:
    """Results must not depend on the number of worker lanes."""

    @pytest.mark.parametrize("model", [ModelName.OCTANT, ModelName.CLASSIC, ModelName.QM])
    def test_reports_are_byte_identical(self, config_factory, model):
        """Test canonical reports across 1, 2 and 8 lanes."""
        config = config_factory(model=model, trials=3 * BLOCK_SIZE + 11)
        texts = {
            build_report("simulate", config, estimate=run_chsh(config, lanes=lanes)).to_json(canonical=True)
            for lanes in (1, 2, 8)
        }
        assert len(texts) == 1

    def test_suite_reports_are_identical(self):
        """Test suite reports across lanes."""
        serial = run_suite("proof-chain", models=200, seed=RunSeed(9), lanes=1)
        parallel = run_suite("proof-chain", models=200, seed=RunSeed(9), lanes=4)
        assert serial == parallel


@pytest.mark.integration
class TestSeeds:
    """Seeds and streams select independent randomness."""

    def test_streams_differ(self, config_factory):
        """Test that a different stream changes the counts."""
        config = config_factory(trials=20_000)
        other = config.with_updates(**{"seed.stream": 1})
        first = run_chsh(config, lanes=1)
        second = run_chsh(other, lanes=1)
        assert [p.counts for p in first.pairs] != [p.counts for p in second.pairs]

    def test_prefix_blocks_are_shared(self, config_factory):
        """Test that growing n keeps the draws of the earlier blocks."""
        small = run_chsh(config_factory(trials=BLOCK_SIZE), lanes=1)
        large = run_chsh(config_factory(trials=2 * BLOCK_SIZE), lanes=2)
        for a, b in zip(small.pairs, large.pairs):
            assert b.n_coincident >= a.n_coincident
