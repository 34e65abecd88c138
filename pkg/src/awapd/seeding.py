"""Deterministic, order-independent random streams.

Every random draw in the toolkit comes from a Philox counter-based
generator keyed by a BLAKE2 hash of (master_seed, *labels).  Streams for
different keys are independent, so work items can be generated in any
order (or in parallel) without changing the output.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(master_seed: int, *labels: object) -> int:
    """Hash a master seed plus arbitrary labels into a 128-bit Philox key.

    Labels may be ints or strings; they are length-prefixed before hashing
    so that ("ab", "c") and ("a", "bc") produce different keys.
    """
    def int_bytes(v: int) -> bytes:
        return v.to_bytes((v.bit_length() + 8) // 8 + 1, "little", signed=True)

    h = hashlib.blake2b(digest_size=16)
    for label in (int(master_seed), *labels):
        if isinstance(label, bool) or not isinstance(label, (int, str)):
            raise TypeError(f"stream labels must be int or str, got {type(label)!r}")
        raw = int_bytes(label) if isinstance(label, int) else label.encode("utf-8")
        h.update(len(raw).to_bytes(2, "little"))
        h.update(raw)
    return int.from_bytes(h.digest(), "little")


def stream(master_seed: int, *labels: object) -> np.random.Generator:
    """A fresh Generator for the given key (see stream_key)."""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, *labels)))
