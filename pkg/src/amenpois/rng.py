"""Counter-derived random substreams.

Replicates are processed in fixed-size batches; each (phase, batch index)
pair gets an independent Philox key derived from the master seed.  Results
are therefore bit-identical no matter how batches are scheduled across
workers, which is the reproducibility contract of the harness.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Phase tags keep streams of different pipeline stages disjoint even when
# they share a batch index.
PHASE_WINDOW = 1
PHASE_MIXING = 2
PHASE_RANDOMIZED = 3
PHASE_LATENT = 4
PHASE_SCRATCH = 7


def substream(master_seed: int, phase: int, index: int) -> np.random.Generator:
    """Independent generator for one (phase, batch index) cell."""
    if index < 0 or phase < 0:
        raise ValueError("phase and index must be nonnegative")
    key = np.array(
        [int(master_seed) & _MASK64, ((int(phase) << 48) ^ int(index)) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def batch_sizes(total: int, batch_size: int) -> list[int]:
    """Split `total` replicates into fixed batches (last one may be short)."""
    if total <= 0:
        return []
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    full, rem = divmod(total, batch_size)
    out = [batch_size] * full
    if rem:
        out.append(rem)
    return out
