"""Derivation of component seeds from a single master seed.

Every source of randomness in the pipeline draws from a generator seeded by
``derive_seed(master, *labels)``. Labels are short strings or ints naming
the consumer ("folds", replication index, epoch, ...), so any component can
be re-run in isolation and still see the same stream.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """Map a master seed plus a label path to a 64-bit sub-seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(master: int, *labels) -> np.random.Generator:
    """Generator seeded by the derived sub-seed for this label path."""
    return np.random.default_rng(derive_seed(master, *labels))
