"""Counter-based random stream derivation.

Every random draw in a run comes from a generator keyed by the master seed
plus a purpose tag and the coordinates of the draw (round, client, ...).
Streams therefore do not depend on the order in which clients execute.
"""

import numpy as np

NOISE = 1
TAU = 2
SAMPLE = 3
RETURN = 4


def stream(master_seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
