"""Per-stage random streams derived from a single run seed."""

from __future__ import annotations

import hashlib

import numpy as np


def stage_seed(seed: int, stage: str) -> int:
    """First 8 bytes (little-endian) of SHA-256 over ``"{seed}:{stage}"``."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """PCG64 generator for one pipeline stage."""
    return np.random.Generator(np.random.PCG64(stage_seed(seed, stage)))


def split_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators spawned from one seed (init, batches, noise, ...)."""
    return [
        np.random.Generator(np.random.PCG64(child))
        for child in np.random.SeedSequence(seed).spawn(n)
    ]
