"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator seeded from a
``SeedSequence``.  Child streams are keyed by integer tuples, so a stream for
``(master seed, trajectory index)`` never depends on how work is scheduled.
"""
from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence"


def rng_metadata() -> dict:
    return {"algorithm": RNG_ALGORITHM, "numpy": np.__version__}


def make_rng(seed=None, *key: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = 0 if seed is None else int(seed)
    seq = np.random.SeedSequence([entropy, *[int(k) for k in key]])
    return np.random.Generator(np.random.PCG64(seq))
