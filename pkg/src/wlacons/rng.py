"""Deterministic substream derivation.

Every random draw in the package comes from a numpy ``Generator`` backed by
Philox4x64-10, a counter-based generator.  A stream is identified by the
master seed plus an ordered list of labels (replica index, purpose tag, ...).
The 128-bit Philox key is the BLAKE2b-128 digest of the canonical encoding::

    b"wlacons/v1" + b"\\x00" + str(seed) + (b"\\x1f" + str(label)) * len(labels)

interpreted as two little-endian uint64 words.  The counter starts at zero.
Nothing here depends on platform word size or hash randomisation, so
streams are reproducible everywhere numpy's Philox is.
"""

from __future__ import annotations

import hashlib
from typing import Iterable

import numpy as np

GENERATOR_NAME = "Philox4x64-10"
DERIVATION = "blake2b-128(b'wlacons/v1' 0x00 seed (0x1f label)*)"

# per-replica purposes; each is an independent stream
PURPOSES = ("init", "topology", "channel", "process", "coin", "fault")


def substream_key(seed: int, labels: Iterable) -> np.ndarray:
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be nonempty")
    h = hashlib.blake2b(digest_size=16)
    h.update(b"wlacons/v1\x00")
    h.update(str(int(seed)).encode())
    for lab in labels:
        h.update(b"\x1f")
        h.update(str(lab).encode())
    return np.frombuffer(h.digest(), dtype="<u8").astype(np.uint64)


def derive_substream(seed: int, labels: Iterable) -> np.random.Generator:
    """Return the generator for ``(seed, labels)``.

    Same arguments always give the same stream; different label paths give
    streams with unrelated keys.
    """
    return np.random.Generator(np.random.Philox(key=substream_key(seed, labels)))


class ReplicaStreams:
    """The per-purpose generators owned by one simulation replica."""

    def __init__(self, seed: int, replica: int = 0, prefix: tuple = ()):
        self.seed = seed
        self.replica = replica
        for purpose in PURPOSES:
            setattr(self, purpose, derive_substream(seed, (*prefix, replica, purpose)))
