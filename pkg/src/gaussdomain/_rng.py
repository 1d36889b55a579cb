"""Derived random streams: one root seed, independent streams per operation.

Streams are derived by hashing (seed, label, index) so results never depend
on execution order or parallel scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label: str) -> list[int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    # 128 bits of the label hash, as four uint32 words
    return [int.from_bytes(digest[4 * i: 4 * i + 4], "little") for i in range(4)]


def derive_rng(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Return a Generator for the stream named by (seed, label, index)."""
    entropy = [int(seed), *_label_words(label), int(index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, label: str) -> int:
    """A child integer seed for the stream named by (seed, label)."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
