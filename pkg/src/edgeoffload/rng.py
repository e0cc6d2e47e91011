"""
Seed substreams.

Every random component draws from its own ``numpy.random.Generator`` backed by
PCG64.  Streams are derived from a master seed with ``SeedSequence`` spawn keys,
so ``stream(seed, UNIT, 2)`` is the same sequence on every platform and does not
depend on how many other streams were created before it.
"""

import numpy as np

# spawn-key tags
UNIT = 1
REPLAY = 2
ENV = 3
WORKFLOWS = 4
EVAL = 5
CELL = 6


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for a child run (e.g. one cell of a sweep)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
