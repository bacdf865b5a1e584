"""Deterministic random streams.

All randomness in the package flows through Philox, a counter-based bit
generator: a stream is fully determined by (seed, *path), so independent
tasks can draw from disjoint streams without coordination and reruns are
bit-reproducible on any platform.
"""
from __future__ import annotations

import numpy as np

__all__ = ["rng_stream", "RNG_NAME"]

RNG_NAME = "philox"


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator for stream (seed, *path).

    seed must be a non-negative integer; path components select independent
    substreams (per task, per instance, per shot batch).
    """
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    for p in path:
        if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
            raise ValueError(f"stream path components must be integers, got {p!r}")
    ss = np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
