"""
bellsim

Simulator and analysis laboratory for two-wing Bell experiments with
setting-dependent detection times: local response models, an exact sweep
oracle, a reproducible Monte Carlo engine and checkers for the CHSH
inequality under a coincidence restriction.
"""

__version__ = "0.1.0"

from .core.config import BellSimSettings, ExperimentConfig, load_config
from .core.types import (
    CoincidenceWindow,
    HiddenVariable,
    LocalResponse,
    RunSeed,
    Setting,
    TrialRecord,
    canonicalize_angle,
    is_coincident,
)
from .engine import ChshEstimate, PairEstimate, run_chsh, run_pair, scan
from .exceptions import (
    BellSimError,
    ConfigurationError,
    DegenerateModelError,
    NoCoincidenceError,
    TheoremViolationError,
    ValidationError,
)
from .inequality import (
    FiniteModel,
    bounds,
    check_proof_chain,
    check_theorem2,
    critical_gamma,
    efficiency_reference,
    eval_finite,
)
from .models import ClassicModel, OctantModel, OctantModelParams, QmSingletSampler
from .oracle import PairStatistics, PiecewiseResponse, exact_chsh, sweep_common_part, sweep_pair

__all__ = [
    # Configuration
    "BellSimSettings",
    "ExperimentConfig",
    "load_config",
    # Types
    "CoincidenceWindow",
    "HiddenVariable",
    "LocalResponse",
    "RunSeed",
    "Setting",
    "TrialRecord",
    "canonicalize_angle",
    "is_coincident",
    # Models
    "OctantModel",
    "OctantModelParams",
    "ClassicModel",
    "QmSingletSampler",
    # Exact oracle
    "PiecewiseResponse",
    "PairStatistics",
    "sweep_pair",
    "sweep_common_part",
    "exact_chsh",
    # Monte Carlo
    "PairEstimate",
    "ChshEstimate",
    "run_pair",
    "run_chsh",
    "scan",
    # Inequalities
    "FiniteModel",
    "eval_finite",
    "check_theorem2",
    "check_proof_chain",
    "bounds",
    "critical_gamma",
    "efficiency_reference",
    # Exceptions
    "BellSimError",
    "ValidationError",
    "ConfigurationError",
    "DegenerateModelError",
    "NoCoincidenceError",
    "TheoremViolationError",
]
