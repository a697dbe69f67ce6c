"""Deterministic fan-out of independent replications over worker threads."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

CHUNK = 256


def map_reps(fn: Callable[[int, int], np.ndarray], reps: int, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn(start, stop)`` over fixed chunks of ``range(reps)``.

    ``fn`` returns one row per replication.  Chunk boundaries do not depend on
    ``threads`` and rows are stitched back in replication order, so the
    output is the same for any worker count.
    """
    bounds = [(a, min(a + CHUNK, reps)) for a in range(0, reps, CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    return np.concatenate(parts, axis=0)
