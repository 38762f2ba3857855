"""Named, reproducible random substreams derived from one master seed.

Every stochastic subsystem (map generation, harvest draws, matching order,
movement-conflict order, roster sampling, ...) pulls from its own generator so
that adding draws to one subsystem never perturbs another.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_entropy(key: int | str) -> int:
    if isinstance(key, int):
        return key & 0xFFFFFFFF
    return zlib.crc32(key.encode("utf-8"))


def substream(master_seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the substream named by ``path`` under ``master_seed``.

    The same (seed, path) pair always yields an identical stream, on any
    platform. Distinct paths yield statistically independent streams.
    """
    entropy = [master_seed & 0xFFFFFFFFFFFFFFFF] + [_key_entropy(k) for k in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))
