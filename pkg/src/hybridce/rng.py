"""Named, seedable random streams.

Every random draw in the package comes from ``stream(seed, purpose, *indices)``,
so one (trial, purpose) pair always sees the same numbers no matter how the
trials are split across workers.
"""

import zlib

import numpy as np


def purpose_key(purpose):
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed, purpose, *indices):
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(purpose_key(purpose),) + tuple(int(i) for i in indices)
    )
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng, shape):
    """CN(0, 1) samples; real/imag parts are interleaved so longer draws extend shorter ones."""
    if isinstance(shape, int):
        shape = (shape,)
    x = rng.standard_normal(tuple(shape) + (2,))
    return (x[..., 0] + 1j * x[..., 1]) / np.sqrt(2.0)
