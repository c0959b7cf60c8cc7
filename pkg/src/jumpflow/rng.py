"""Counter-based random streams keyed by (master seed, scenario, tag, block).

Every Monte Carlo path draws from its own Philox stream, so an ensemble is
the same whatever order or chunking the paths are simulated in.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "tag_code", "zigzag"]


def tag_code(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def zigzag(n: int) -> int:
    """Map a signed integer to a nonnegative one (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...)."""
    n = int(n)
    return 2 * n if n >= 0 else -2 * n - 1


def stream(master_seed: int, scenario: int, tag="noise", block: int = 0) -> np.random.Generator:
    key = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFF, int(scenario), tag_code(tag), zigzag(block)])
    return np.random.Generator(np.random.Philox(key))
