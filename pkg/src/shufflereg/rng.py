"""Counter-based seed splitting.

Every random stream is ``default_rng(SeedSequence(master_seed, spawn_key=key))``
where ``key`` is a tuple of non-negative integers such as
``(repeat, probe, trial)``.  Streams with different keys are independent and a
given key always reproduces the same stream, regardless of thread count or
evaluation order.
"""

from __future__ import annotations

import numpy as np


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    if any(k < 0 for k in key):
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key)))
