"""
Pytest configuration and shared fixtures for the bellsim tests.
"""

import math
from typing import Optional, Sequence

import numpy as np
import pytest

from bellsim.core.config import SATURATING_L, ExperimentConfig, reset_settings
from bellsim.core.types import CHSH_PAIRS, CoincidenceWindow, ModelName, RunSeed, Setting
from bellsim.inequality import FiniteModel
from bellsim.models import ClassicModel, OctantModel, OctantModelParams, PairSource


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Isolate every test from BELLSIM_* variables and the settings singleton."""
    for name in ("BELLSIM_THREADS", "BELLSIM_LOG_LEVEL", "BELLSIM_LOG_FILE", "BELLSIM_DEBUG"):
        monkeypatch.delenv(name, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def canonical_settings():
    """The canonical settings a=0, b=π/2, c=π/4, d=−π/4."""
    return (Setting(0.0), Setting(math.pi / 2), Setting(math.pi / 4), Setting(-math.pi / 4))


@pytest.fixture
def window():
    """The canonical coincidence window ΔT = 3/2."""
    return CoincidenceWindow(1.5)


@pytest.fixture
def octant_model():
    """Octant model at the saturating band height."""
    return OctantModel(OctantModelParams(SATURATING_L))


@pytest.fixture
def octant_pattern(octant_model):
    """Piecewise form of the saturating octant model."""
    return octant_model.piecewise()


@pytest.fixture
def classic_model():
    """Deterministic sign model."""
    return ClassicModel()


@pytest.fixture
def run_seed():
    """Fixed seed for statistical tests."""
    return RunSeed(seed=42, stream=0)


@pytest.fixture
def small_config():
    """Canonical configuration with a desk-sized trial count."""
    return ExperimentConfig(trials_per_pair=50_000)


@pytest.fixture
def config_factory():
    """Build configurations from keyword overrides."""

    def make(
        model: ModelName = ModelName.OCTANT,
        l: float = SATURATING_L,
        trials: int = 50_000,
        delta_t: float = 1.5,
        seed: int = 42,
    ) -> ExperimentConfig:
        return ExperimentConfig.model_validate(
            {
                "model": {"name": model, "l": l},
                "delta_t": delta_t,
                "trials_per_pair": trials,
                "seed": {"seed": seed, "stream": 0},
            }
        )

    return make


class NeverCoincident(PairSource):
    """Pair source whose wings are always detected far apart."""

    name = ModelName.CLASSIC

    def sample_pairs(self, a, c, theta, r):
        ones = np.ones(len(theta), dtype=np.int8)
        return ones, np.zeros(len(theta)), ones, np.full(len(theta), 100.0)


@pytest.fixture
def never_coincident():
    """A pair source that never produces a coincidence."""
    return NeverCoincident()


def single_atom_model(values: Sequence[float], membership: Optional[Sequence[bool]] = None):
    """Point-mass finite model."""
    membership = membership if membership is not None else [True] * 4
    return FiniteModel(
        weights=np.array([1.0]),
        values=np.array([values], dtype=float),
        membership=np.array([membership], dtype=bool),
    )


def naive_eval(model: FiniteModel):
    """Atom-by-atom loop computing (pair probabilities, correlations, P(Λ_I), δ)."""
    probs = [0.0] * 4
    sums = [0.0] * 4
    p_common = 0.0
    for atom in range(model.n_atoms):
        w = float(model.weights[atom])
        in_all = True
        for k, (_, i, j) in enumerate(CHSH_PAIRS):
            if model.membership[atom, k]:
                probs[k] += w
                sums[k] += w * model.values[atom, i] * model.values[atom, j]
            else:
                in_all = False
        if in_all:
            p_common += w
    correlations = [s / p if p > 0 else None for s, p in zip(sums, probs)]
    delta = min(p_common / p if p > 0 else 0.0 for p in probs)
    return probs, correlations, p_common, delta


def assert_within_sigmas(estimate: float, exact: float, std_error: float, sigmas: float = 4.0):
    """Assert a Monte Carlo estimate lies within ``sigmas`` standard errors."""
    assert abs(estimate - exact) <= sigmas * std_error + 1e-12, (
        f"estimate {estimate} differs from {exact} by more than {sigmas}σ (σ={std_error})"
    )


@pytest.fixture
def naive_evaluator():
    """Independent loop-based evaluator for finite models."""
    return naive_eval


@pytest.fixture
def point_mass():
    """Factory for single-atom finite models."""
    return single_atom_model


@pytest.fixture
def within_sigmas():
    """Monte Carlo tolerance assertion."""
    return assert_within_sigmas
