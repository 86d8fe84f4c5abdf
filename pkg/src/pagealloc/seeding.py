"""Seed splitting.

Every random component gets its own stream derived from one 64-bit root seed:
``(root, key_1, ..., key_k)`` is fed to :class:`numpy.random.SeedSequence`
as ``entropy=root`` and ``spawn_key=(key_1, ..., key_k)``. Keys are small
non-negative integers; the named constants below are the stable stream ids.
"""

from __future__ import annotations

import os

import numpy as np

ENV = 1
WORKLOAD = 2
AGENT = 3
TRAIN_EPISODES = 4
EVAL_EPISODES = 5
SESSION = 6
INIT = 7

MASK64 = (1 << 64) - 1
SEED_ENV_VAR = "PAGEALLOC_SEED"


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit child seed for the stream ``keys`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def default_seed(fallback: int = 0) -> int:
    """Seed from ``$PAGEALLOC_SEED`` if set, else ``fallback``."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return fallback
    return int(raw, 0) & MASK64
