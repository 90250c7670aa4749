"""Deterministic RNG streams derived from one master seed.

Every random choice in the package flows from a single integer seed; each
component derives its own stream from a fixed text label so that adding or
reordering consumers never perturbs the others.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def seed_sequence(seed: int, label: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed & _MASK64, zlib.crc32(label.encode("utf-8"))])


def rng_for(seed: int, label: str) -> np.random.Generator:
    """A generator keyed by (seed, label), stable across runs and platforms."""
    return np.random.default_rng(seed_sequence(seed, label))


def derive_seed(seed: int, label: str) -> int:
    """Collapse (seed, label) to a plain integer seed for APIs that take one."""
    return int(seed_sequence(seed, label).generate_state(1, np.uint64)[0])
