"""
Deterministic seed derivation.

Python's hash() is salted per process, so seeds are derived from a sha256
digest of the parts instead. The same parts give the same stream on every
machine and in every Celery worker.
"""

import hashlib

import numpy as np


def derive_seed(*parts):
    """
    Derive a 63-bit seed from any sequence of printable parts.

    Args:
        *parts: Values identifying the stream (base seed, painting id, ...)

    Returns:
        int: Non-negative seed
    """
    text = '\x1f'.join(str(part) for part in parts)
    digest = hashlib.sha256(text.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') & ((1 << 63) - 1)


def rng_for(*parts):
    """Return a numpy Generator seeded from derive_seed(*parts)."""
    return np.random.default_rng(derive_seed(*parts))


def patch_rng(seed, painting_id, x, y, epoch=0):
    """Per-patch random stream used by augmentation."""
    return rng_for('patch', seed, painting_id, x, y, epoch)
