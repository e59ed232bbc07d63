"""Deterministic seed derivation.

Every random draw in the package comes from a Generator seeded through
`child_seed`, so results never depend on call order, worker count or
interpreter hash randomization.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np


def child_seed(seed: int, *keys: int | str) -> int:
    """Derive a 64-bit child seed from a master seed and a key path."""
    material = json.dumps([int(seed), *keys], separators=(",", ":")).encode()
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, *keys: int | str) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *keys))


def fingerprint(*parts: bytes | str | int | float | np.ndarray) -> str:
    """Stable hex digest over heterogeneous model-state parts."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(str(arr.dtype).encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        elif isinstance(part, bytes):
            h.update(part)
        else:
            h.update(repr(part).encode())
        h.update(b"|")
    return h.hexdigest()[:32]
