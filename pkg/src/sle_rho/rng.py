"""Random streams: one counter-based Philox stream per (master seed, path index)."""

import secrets

import numpy as np


def path_generator(seed: int, path_index: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for path ``path_index`` of an ensemble.

    Normals are drawn with ``Generator.standard_normal`` (numpy's ziggurat).
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed() -> int:
    return secrets.randbits(63)
