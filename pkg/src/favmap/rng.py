"""Seed derivation used everywhere randomness appears.

Every random decision in the pipeline is driven by a generator obtained from
``generator(master_seed, *path)``, where ``path`` identifies the consumer
(tree index, repeat, fold, ...).  Streams for different paths are therefore
independent of execution order and of how much any other consumer draws,
which is what makes parallel runs bit-identical to sequential ones.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _norm(part: int) -> int:
    return int(part) & _MASK64


def seed_sequence(*path: int) -> np.random.SeedSequence:
    """SeedSequence keyed by an integer path (masked to 64 bits)."""
    return np.random.SeedSequence([_norm(p) for p in path])


def generator(*path: int) -> np.random.Generator:
    """Fresh PCG64 generator for the given derivation path."""
    return np.random.Generator(np.random.PCG64(seed_sequence(*path)))


def derive_seed(*path: int) -> int:
    """Collapse a derivation path into a single 64-bit seed."""
    lo, hi = seed_sequence(*path).generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)
