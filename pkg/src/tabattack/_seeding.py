"""Named, reproducible seed substreams derived from one master seed."""

import hashlib

import numpy as np


def derive_seed(master: int, name: str) -> int:
    """Return a 32-bit seed for substream ``name`` under ``master``.

    Uses a stable hash of the name (not Python's salted ``hash``) so the
    mapping is identical across interpreter runs.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    key = int.from_bytes(digest[:4], "little")
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFF, key])
    return int(ss.generate_state(1)[0])


def row_rng(seed: int, row: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(row)]))
