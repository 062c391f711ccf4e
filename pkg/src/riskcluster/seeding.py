"""Sub-seed derivation so every stochastic task is keyed, not scheduled."""
from __future__ import annotations

import hashlib


def derive_seed(master: int, *keys) -> int:
    """A 63-bit seed determined only by ``master`` and the task keys."""
    text = "/".join([str(int(master))] + [str(k) for k in keys])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1
