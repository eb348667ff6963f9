"""Small-draw helpers; ``Generator.integers``/``choice`` carry ~10us overhead each."""
from __future__ import annotations

import numpy as np


def uniform_ints(n: int, high: int, rng: np.random.Generator) -> list[int]:
    """``n`` integers uniform on ``[0, high)``; exact for powers of two."""
    if n == 0:
        return []
    return [int(u * high) for u in rng.random(n).tolist()]


def sample_positions(total: int, k: int, rng: np.random.Generator) -> list[int]:
    """``k`` distinct indices from ``range(total)`` in random order."""
    if k == 0:
        return []
    if k > total:
        raise ValueError(f"cannot pick {k} of {total} positions")
    pool = list(range(total))
    for i, u in enumerate(rng.random(k).tolist()):
        j = i + min(int(u * (total - i)), total - i - 1)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]
