"""Counter-based random streams keyed by ``(master_seed, index, ...)``."""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox generator for the given key path.

    Streams for distinct key paths are statistically independent, and a stream only
    depends on its own key path, so trajectories can be run in any order or batch.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(master_seed), *map(int, keys)])))


def streams(master_seed: int, n: int, *prefix: int) -> list[np.random.Generator]:
    return [stream(master_seed, *prefix, i) for i in range(n)]
