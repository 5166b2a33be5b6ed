"""
Response models for the two wings.

A ``LocalModel`` maps (λ, local setting) to (outcome, detection time). The
remote setting never reaches ``respond``, so locality holds by construction.
Every model also exposes the pair-sampling interface the engine uses
(``sample_pairs``); for local models that is just two independent calls to
the vectorized response, while the quantum reference sampler implements it
directly and is nonlocal on purpose.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core.config import SATURATING_L
from .core.types import (
    TWO_PI,
    HiddenVariable,
    LocalResponse,
    ModelName,
    Setting,
    canonicalize_angle,
)
from .exceptions import ValidationError
from .oracle import PiecewiseResponse

logger = logging.getLogger(__name__)

OCTANT_WIDTH = math.pi / 4.0

# Outcome +1 on the first four octants, −1 on the rest
OCTANT_OUTCOMES = (1, 1, 1, 1, -1, -1, -1, -1)

# Main-region detection time per octant
OCTANT_TIMES = (1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0)

# (outcomes, times) arrays returned by the vectorized response
ResponseArrays = Tuple[np.ndarray, np.ndarray]
# (left outcomes, left times, right outcomes, right times)
PairArrays = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def _relative_angles(theta: np.ndarray, setting: Setting) -> np.ndarray:
    phi = np.mod(np.asarray(theta, dtype=float) - setting.angle, TWO_PI)
    return np.where(phi >= TWO_PI, 0.0, phi)


class PairSource(ABC):
    """Anything the engine can draw joint trials from."""

    name: ModelName

    @property
    def band_height(self) -> float:
        """Height of the always-coincident band (0 when there is none)."""
        return 0.0

    @abstractmethod
    def sample_pairs(
        self, a: Setting, c: Setting, theta: np.ndarray, r: np.ndarray
    ) -> PairArrays:
        """Joint responses for left setting ``a`` and right setting ``c``.

        ``theta`` and ``r`` are the block's hidden-variable draws; sources
        that are not driven by λ may use them as plain uniforms.
        """

    def piecewise(self) -> Optional[PiecewiseResponse]:
        """Exact piecewise form, or None if the source has none."""
        return None


class LocalModel(PairSource):
    """A local hidden-variable model."""

    @abstractmethod
    def respond(self, lam: HiddenVariable, setting: Setting) -> LocalResponse:
        """Outcome and time for one wing."""

    @abstractmethod
    def respond_many(
        self, theta: np.ndarray, r: np.ndarray, setting: Setting
    ) -> ResponseArrays:
        """Vectorized ``respond`` over arrays of λ coordinates."""

    def sample_pairs(
        self, a: Setting, c: Setting, theta: np.ndarray, r: np.ndarray
    ) -> PairArrays:
        out_l, t_l = self.respond_many(theta, r, a)
        out_r, t_r = self.respond_many(theta, r, c)
        return out_l, t_l, out_r, t_r


@dataclass(frozen=True)
class OctantModelParams:
    """Parameters of the octant model."""

    l: float = SATURATING_L

    def __post_init__(self) -> None:
        if not (math.isfinite(self.l) and 0.0 <= self.l <= 1.0):
            raise ValidationError(
                f"l out of [0,1]: {self.l!r}", field="l", value=self.l, expected="[0, 1]"
            )


def octant_respond(
    lam: HiddenVariable, setting: Setting, params: OctantModelParams
) -> LocalResponse:
    """Octant-pattern response: outcome by half-circle, time by octant table.

    Points in the band ``r < l`` are detected at time 0.
    """
    phi = canonicalize_angle(lam.theta - setting.angle)
    k = min(int(phi // OCTANT_WIDTH), 7)
    time = 0.0 if lam.r < params.l else OCTANT_TIMES[k]
    return LocalResponse(outcome=OCTANT_OUTCOMES[k], time=time)


def classic_respond(lam: HiddenVariable, setting: Setting) -> LocalResponse:
    """Half-circle sign response detected at time 0."""
    phi = canonicalize_angle(lam.theta - setting.angle)
    return LocalResponse(outcome=1 if phi < math.pi else -1, time=0.0)


class OctantModel(LocalModel):
    """Octant model with a time-0 band of height ``l``."""

    name = ModelName.OCTANT

    def __init__(self, params: Optional[OctantModelParams] = None):
        self.params = params or OctantModelParams()
        self._outcomes = np.asarray(OCTANT_OUTCOMES, dtype=np.int8)
        self._times = np.asarray(OCTANT_TIMES, dtype=float)

    @property
    def band_height(self) -> float:
        return self.params.l

    def respond(self, lam: HiddenVariable, setting: Setting) -> LocalResponse:
        return octant_respond(lam, setting, self.params)

    def respond_many(
        self, theta: np.ndarray, r: np.ndarray, setting: Setting
    ) -> ResponseArrays:
        k = np.minimum((_relative_angles(theta, setting) // OCTANT_WIDTH).astype(np.intp), 7)
        times = np.where(np.asarray(r) < self.params.l, 0.0, self._times[k])
        return self._outcomes[k], times

    def piecewise(self) -> PiecewiseResponse:
        return PiecewiseResponse.uniform(
            OCTANT_OUTCOMES, OCTANT_TIMES, band_height=self.params.l, band_time=0.0
        )

    def __repr__(self) -> str:
        return f"OctantModel(l={self.params.l!r})"


class ClassicModel(LocalModel):
    """Deterministic sign model without timing; every trial is coincident."""

    name = ModelName.CLASSIC

    def respond(self, lam: HiddenVariable, setting: Setting) -> LocalResponse:
        return classic_respond(lam, setting)

    def respond_many(
        self, theta: np.ndarray, r: np.ndarray, setting: Setting
    ) -> ResponseArrays:
        phi = _relative_angles(theta, setting)
        outcomes = np.where(phi < math.pi, 1, -1).astype(np.int8)
        return outcomes, np.zeros(phi.shape)

    def piecewise(self) -> PiecewiseResponse:
        return PiecewiseResponse.uniform((1, -1), (0.0, 0.0))

    def __repr__(self) -> str:
        return "ClassicModel()"


@dataclass(frozen=True)
class QmSingletParams:
    """The singlet sampler has no parameters; E(Δ) = cos Δ."""


def _qm_outcomes(
    a: Setting, c: Setting, u_left: np.ndarray, u_equal: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    p_equal = 0.5 * (1.0 + math.cos(a.angle - c.angle))
    left = np.where(np.asarray(u_left) < 0.5, 1, -1).astype(np.int8)
    right = np.where(np.asarray(u_equal) < p_equal, left, -left).astype(np.int8)
    return left, right


def qm_singlet_sample(a: Setting, c: Setting, rng: np.random.Generator) -> Tuple[int, int]:
    """One joint outcome pair with singlet-type correlation cos(a − c)."""
    u = rng.random(2)
    left, right = _qm_outcomes(a, c, u[:1], u[1:])
    return int(left[0]), int(right[0])


class QmSingletSampler(PairSource):
    """Quantum reference statistics; reads both settings, so it is nonlocal."""

    name = ModelName.QM

    def __init__(self, params: Optional[QmSingletParams] = None):
        self.params = params or QmSingletParams()

    def sample_pairs(
        self, a: Setting, c: Setting, theta: np.ndarray, r: np.ndarray
    ) -> PairArrays:
        left, right = _qm_outcomes(a, c, np.asarray(theta) / TWO_PI, r)
        zeros = np.zeros(left.shape)
        return left, zeros, right, zeros

    def __repr__(self) -> str:
        return "QmSingletSampler()"


def build_model(name: ModelName, l: float = SATURATING_L) -> PairSource:
    """Instantiate the pair source named in a configuration."""
    name = ModelName(name)
    if name is ModelName.OCTANT:
        return OctantModel(OctantModelParams(l))
    if name is ModelName.CLASSIC:
        return ClassicModel()
    return QmSingletSampler()
