"""
Counter-based randomness for reproducible parallel Monte Carlo.

Every random source is derived statelessly from a ``RunSeed`` and a 64-bit
index through numpy's Philox counter-based bit generator: the seed and
stream form the Philox key, the index selects a disjoint region of the
counter space. Nothing depends on the order in which sources are created,
so any partition of the work across worker lanes produces identical values.

The Monte Carlo engine draws trials in fixed-size blocks; block ``j`` of
pair ``p`` reads its uniforms from ``trial_rng(seed, block_index(p, j))``.
The block partition depends only on the trial count, never on the number
of lanes.
"""

from typing import Tuple

import numpy as np

from ..exceptions import ValidationError
from .types import UINT64_MAX, RunSeed

# Trials drawn from one counter-derived source
BLOCK_SIZE = 1 << 16

# Upper 16 bits of a block index name the pair, lower 48 the block
_PAIR_SHIFT = 48
_BLOCK_MASK = (1 << _PAIR_SHIFT) - 1


def trial_rng(seed: RunSeed, trial_index: int) -> np.random.Generator:
    """Return the deterministic random source for ``(seed, trial_index)``.

    The index occupies the top 64 bits of Philox's 256-bit counter; the
    generator only ever increments the low words, so sources for distinct
    indices never overlap.
    """
    if not 0 <= trial_index <= UINT64_MAX:
        raise ValidationError(
            f"trial_index must be a 64-bit unsigned integer, got {trial_index!r}",
            field="trial_index",
            value=trial_index,
        )
    key = seed.seed | (seed.stream << 64)
    counter = trial_index << 192
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def block_index(pair_index: int, block: int) -> int:
    """Compose the source index of block ``block`` within pair ``pair_index``."""
    if not 0 <= block <= _BLOCK_MASK:
        raise ValidationError(f"block index out of range: {block}", field="block")
    return (pair_index << _PAIR_SHIFT) | block


def block_bounds(n: int, block_size: int = BLOCK_SIZE) -> Tuple[Tuple[int, int], ...]:
    """Split ``n`` trials into contiguous ``[start, stop)`` blocks."""
    return tuple(
        (start, min(start + block_size, n)) for start in range(0, n, block_size)
    )


def draw_hidden_variables(
    seed: RunSeed, pair_index: int, block: int, size: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` hidden variables λ = (θ, r) uniform on [0, 2π) × [0, 1)."""
    rng = trial_rng(seed, block_index(pair_index, block))
    uniforms = rng.random((2, size))
    return uniforms[0] * (2.0 * np.pi), uniforms[1]
