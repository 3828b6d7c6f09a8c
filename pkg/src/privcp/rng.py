"""Seeded, splittable random streams.

Every stream is a PCG64 generator keyed by ``(base_seed, *keys)`` through
:class:`numpy.random.SeedSequence` spawn keys, so replication ``h`` gets the
same stream no matter which other replications run or in what order.
"""

import numpy as np

# named sub-streams inside one replication
DATA, SPLIT, MODEL, MECHANISM, WARMUP = range(5)


def stream(base_seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
