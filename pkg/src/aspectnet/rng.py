"""Named random streams derived from one global seed."""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(*names) -> list[int]:
    digest = hashlib.sha256("/".join(str(n) for n in names).encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def derive_rng(seed: int, *names) -> np.random.Generator:
    """Generator for the stream ``names`` under ``seed``.

    Distinct names give statistically independent streams; the same
    (seed, names) always reproduces the same stream.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *stream_key(*names)]))


def derive_seed(seed: int, *names) -> int:
    return int(derive_rng(seed, *names).integers(0, 2**31 - 1))
