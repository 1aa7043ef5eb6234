"""Keyed random streams.

Each stream is a Philox counter-based generator whose key is derived from
``(seed, *key)``, so draws for replicate ``r`` never depend on how many other
replicates ran or in which order.
"""

import os

import numpy as np

DEFAULT_SEED = 42
SEED_ENV = "PATCHSEL_SEED"


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else DEFAULT_SEED


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
