"""
Seeded random number streams.

All randomness in the package flows through an explicitly passed
``numpy.random.Generator``; there is no module-level random state.
"""
import numpy as np

Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    """
    Build a PCG64 generator from a 64-bit seed.

    Args:
        seed: Non-negative integer seed (reduced modulo 2**64)

    Returns:
        A fresh generator; equal seeds give equal streams
    """
    return np.random.Generator(np.random.PCG64(int(seed) % (1 << 64)))


def spawn(rng: Rng, count: int) -> list:
    """Derive ``count`` independent child generators from ``rng``."""
    seeds = rng.integers(0, np.iinfo(np.int64).max, size=count)
    return [make_rng(int(s)) for s in seeds]
