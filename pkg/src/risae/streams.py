"""Named, independent random streams derived from one master seed.

Every random draw in the package (symbols, channels, noise, parameter
initialization) takes a generator from :func:`stream` keyed by a path such as
``("train", epoch, batch, "noise")``, so draws never depend on call order.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream keys must be non-negative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed, *keys):
    """Generator for the stream named ``keys`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
