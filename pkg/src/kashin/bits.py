"""Seeded raw-bit stream with an exact consumed-bit counter.

The counter is the construction's accounting device: every bit handed
out is counted, nothing else is.  Deterministic mode expands the seed
through counter-mode Philox (a fixed, platform-independent function), so
equal seeds replay identical streams; entropy mode draws from the OS.
Bits come out of each 64-bit word least-significant first.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

_WORDS_PER_REFILL = 64


def derive_seed(master: bytes, label: str, counter: int = 0) -> bytes:
    """Fixed fan-out scheme: independent child seeds from one master seed."""
    h = hashlib.sha256()
    h.update(master)
    h.update(label.encode("utf-8"))
    h.update(counter.to_bytes(8, "little"))
    return h.digest()


def as_seed_bytes(seed) -> bytes:
    """Normalize a hex string / bytes / int seed to bytes."""
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, str):
        return bytes.fromhex(seed)
    if isinstance(seed, int):
        if seed < 0:
            raise ValueError("integer seeds must be nonnegative")
        return seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "little")
    raise TypeError(f"cannot interpret {type(seed).__name__} as a seed")


class BitSource:
    """Stream of random bits with exact draw accounting.

    mode="deterministic" replays identically from equal seeds;
    mode="entropy" uses os.urandom and records the seed as None.
    """

    def __init__(self, seed=None, mode: str = "deterministic"):
        if mode not in ("deterministic", "entropy"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "deterministic":
            if seed is None:
                raise ValueError("deterministic mode requires a seed")
            self.seed = as_seed_bytes(seed)
            key = int.from_bytes(hashlib.sha256(self.seed).digest()[:16], "little")
            self._raw = np.random.Philox(key=key)
        else:
            self.seed = None
            self._raw = None
        self.mode = mode
        self.consumed = 0
        self._buf = 0
        self._nbuf = 0

    @property
    def seed_hex(self):
        return self.seed.hex() if self.seed is not None else None

    def _refill(self):
        if self.mode == "deterministic":
            words = self._raw.random_raw(_WORDS_PER_REFILL)
            for w in words:
                self._buf |= int(w) << self._nbuf
                self._nbuf += 64
        else:
            chunk = os.urandom(8 * _WORDS_PER_REFILL)
            self._buf |= int.from_bytes(chunk, "little") << self._nbuf
            self._nbuf += len(chunk) * 8

    def take_int(self, nbits: int) -> int:
        """Next nbits as a little-endian integer (bit 0 drawn first)."""
        if nbits < 0:
            raise ValueError("cannot draw a negative number of bits")
        while self._nbuf < nbits:
            self._refill()
        val = self._buf & ((1 << nbits) - 1)
        self._buf >>= nbits
        self._nbuf -= nbits
        self.consumed += nbits
        return val

    def take_bits(self, nbits: int) -> np.ndarray:
        """Next nbits as a uint8 0/1 array, in draw order."""
        val = self.take_int(nbits)
        out = np.empty(nbits, dtype=np.uint8)
        for i in range(nbits):
            out[i] = (val >> i) & 1
        return out
