"""Deterministic, splittable seed derivation for parallel-safe sampling.

Every stochastic routine in the package derives per-draw generators from a
master seed and a structured key, so results are independent of evaluation
order and worker count.
"""

from __future__ import annotations

import numpy as np

# Registry of key prefixes, one per sampling context.  Keeping these distinct
# guarantees that e.g. layer-parity coins never collide with gate draws.
KEY_PARITY = 0
KEY_GATE = 1
KEY_DRAW = 2
KEY_MEAS = 3
KEY_STATE = 4
KEY_START = 5


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for `(seed, key)`; identical arguments give identical streams."""
    if any(k < 0 for k in key):
        raise ValueError(f"spawn key must be nonnegative integers, got {key}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def derive_seed(seed: int, *key: int) -> int:
    """A single derived integer seed (for labeling / serialization)."""
    return int(spawn_rng(seed, *key).integers(0, 2**63 - 1))
