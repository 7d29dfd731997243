"""Substream derivation for reproducible, schedule-independent sampling.

All randomness in the package flows through counter-based Philox bit
generators keyed by ``(seed, *tags)``.  Substreams derived from the same
seed with distinct tags are statistically independent, and a given tag
always yields the same stream, so results never depend on evaluation
order or worker count.
"""

from __future__ import annotations

import numpy as np

# Stream tags.  Each (tag, level/index...) pair names one substream.
VECTOR_STREAM = 1    # generic branching-vector draws per pool level
RESAMPLE_STREAM = 2  # with-replacement index draws per pool level
EXACT_STREAM = 3     # exact tree expansion, one substream per chunk
REPLICATE_STREAM = 4 # derivation of per-replicate seeds


def substream(seed: int, *tags: int) -> np.random.Generator:
    """Return the generator for the substream named by ``(seed, *tags)``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(tags))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *tags: int) -> int:
    """Derive a child experiment seed, e.g. one per replicate."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(REPLICATE_STREAM, *tags))
    state = ss.generate_state(2, dtype=np.uint64)
    return int(state[0]) ^ (int(state[1]) << 64)
