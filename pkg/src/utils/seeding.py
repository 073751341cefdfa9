"""Deterministic seed derivation: every random stream is keyed by (seed, *keys)."""
import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, *keys: Key) -> int:
    """64-bit child seed for (seed, *keys)."""
    sequence = np.random.SeedSequence([_key_to_int(seed)] + [_key_to_int(k) for k in keys])
    return int(sequence.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def derive_rng(seed: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        [_key_to_int(seed)] + [_key_to_int(k) for k in keys]))
