"""Seeded, batch-stable standard normal draws."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

BATCH = 8192


def normal_batches(seed: int, n: int, dim: int, batch: int = BATCH) -> Iterator[np.ndarray]:
    """Yield ``ceil(n / batch)`` arrays of iid N(0, 1) draws, ``n`` rows in total.

    Batch ``i`` is drawn from the ``i``-th child of ``SeedSequence(seed)``, so
    the stream depends on ``seed`` and ``batch`` only, never on how batches
    are scheduled.
    """
    n_batches = max(1, math.ceil(n / batch))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        rows = min(n, (i + 1) * batch) - i * batch
        yield np.random.default_rng(child).standard_normal((rows, dim))


def normals(seed: int, n: int, dim: int) -> np.ndarray:
    return np.vstack(list(normal_batches(seed, n, dim)))
