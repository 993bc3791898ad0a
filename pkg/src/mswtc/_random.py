"""Named, seed-derived random streams.

Every source of randomness in the pipeline is derived from one integer seed
plus a tuple of names (``"split"``, ``"init"``, ``"dropout"``, ...) and repeat
indices, so any component can be re-run in isolation.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed, *names):
    """Return a ``numpy.random.Generator`` for ``(seed, *names)``.

    The same arguments always give the same stream; distinct name tuples give
    statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.PCG64(ss))
