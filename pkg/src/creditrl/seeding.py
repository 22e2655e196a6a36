"""Splittable seed derivation.

Every random stream in a run is keyed by (master seed, stream tag, index...) through
numpy's SeedSequence, so episodes, runs and subsystems never share a stream and any
of them can be regenerated in isolation.
"""

from __future__ import annotations

import numpy as np

# stream tags
EPISODE = 1
BEHAVIOUR = 2
TABLE_SELECTOR = 3
RUN = 4
EVALUATION = 5
PORTFOLIO = 6
TRAINING_TABLE = 7
RESPONSE_NOISE = 8
HISTORY = 9


def derive_seed(master: int, *keys: int) -> int:
    """64-bit integer seed for the stream identified by ``keys`` under ``master``."""
    seq = np.random.SeedSequence(entropy=int(master) % 2**128, spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
