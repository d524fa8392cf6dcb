"""Deterministic random-number plumbing.

Every source of randomness in the package flows through numpy's PCG64
generator. Child seeds are derived by feeding the master seed plus string
or integer salts into ``numpy.random.SeedSequence``, whose output is stable
across platforms, so a run is fully reproducible from its master seed.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(master: int, *salts: int | str) -> int:
    """Derive a child seed from ``master`` and a sequence of salts."""
    parts = [int(master) & _MASK64]
    for salt in salts:
        if isinstance(salt, str):
            parts.append(zlib.crc32(salt.encode("utf-8")))
        else:
            parts.append(int(salt) & _MASK64)
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
