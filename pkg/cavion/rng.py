"""
Counter-based random streams.

Every stream is a numpy Generator over Philox keyed by the master seed. The
counter words address a sub-stream: (purpose, index, 0, 0). Draws advance the
lowest counter word only, so sub-streams never overlap in practice and any
block can be regenerated in isolation, in any order, on any worker.

Trial sub-streams are the exception: trial k starts at counter k * TRIAL_BLOCKS
so the reserved draws of consecutive trials sit back to back and a whole run
of trials can be read with one generator. A trial that needs more than its
reservation continues on its spill stream.
"""

from enum import IntEnum

import numpy as np

from .errors import InvalidParameterError

SEED_MAX = 2**64 - 1

# Philox blocks (4 draws each) reserved per trial
TRIAL_BLOCKS = 4
TRIAL_DRAWS = 4 * TRIAL_BLOCKS
# third counter word of spill streams
SPILL_BIT = 1 << 63


class Stream(IntEnum):
    """Purpose tags for sub-streams."""
    SAMPLE = 1
    TRIALS = 2
    DIFFUSION = 3
    POINTS = 4
    BOOTSTRAP = 5


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _counter(purpose: Stream, index: int) -> int:
    index = int(index)
    if index < 0:
        raise InvalidParameterError("sub-stream index must be >= 0")
    offset = index * TRIAL_BLOCKS if purpose == Stream.TRIALS else index << 128
    return offset + (int(purpose) << 192)


def substream(seed: int, purpose: Stream, index: int = 0) -> np.random.Generator:
    """Generator for sub-stream (purpose, index) of the master seed."""
    seed = check_seed(seed)
    return np.random.Generator(np.random.Philox(key=seed, counter=_counter(purpose, index)))


def derive_seed(seed: int, purpose: Stream, index: int) -> int:
    """A child master seed, for nesting (e.g. one sequence per scan point)."""
    return int(substream(seed, purpose, index).integers(0, SEED_MAX, dtype=np.uint64, endpoint=True))


def as_generator(rng_or_seed) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return substream(rng_or_seed, Stream.SAMPLE)


# =============================================================================
# TRIAL STREAMS
# =============================================================================

def unit_uniforms(raw: np.ndarray) -> np.ndarray:
    """Doubles in [0, 1) from raw 64-bit draws (top 53 bits)."""
    return (np.asarray(raw, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def trial_uniforms(seed: int, first_trial: int, n: int) -> np.ndarray:
    """Reserved draws of trials first_trial .. first_trial + n - 1, one row per trial."""
    bits = np.random.Philox(key=check_seed(seed), counter=_counter(Stream.TRIALS, first_trial))
    return unit_uniforms(bits.random_raw(n * TRIAL_DRAWS)).reshape(n, TRIAL_DRAWS)


def split_trial_stream(rng: np.random.Generator):
    """
    Reserved draws of a fresh trial generator and the bit generator of its spill stream.

    For substream(seed, TRIALS, k) the reserved row equals row k of
    trial_uniforms(seed, 0, k + 1). Generators that are not Philox spill onto
    themselves.
    """
    bits = rng.bit_generator
    spill = bits
    if isinstance(bits, np.random.Philox):
        state = bits.state["state"]
        counter = [int(word) for word in state["counter"]]
        spill_counter = np.array([0, counter[0], counter[2] | SPILL_BIT, counter[3]], dtype=np.uint64)
        spill = np.random.Philox(key=np.asarray(state["key"], dtype=np.uint64), counter=spill_counter)
    return unit_uniforms(bits.random_raw(TRIAL_DRAWS)), spill
