"""Shared test oracles, deliberately independent of the library's fast paths."""

import numpy as np
import pytest

from kashin.kwise import gf_mul


def poly_mul_gf2(a: int, b: int) -> int:
    """Carryless polynomial product over GF(2), no reduction."""
    res = 0
    shift = 0
    while b:
        if b & 1:
            res ^= a << shift
        b >>= 1
        shift += 1
    return res


def poly_mod_gf2(a: int, f: int) -> int:
    """Remainder of a by f via polynomial long division."""
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df and a:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def reference_expand(k: int, r: int, M: int, zvals) -> np.ndarray:
    """Slow per-coordinate polynomial evaluation, via the public gf_mul."""
    out = []
    for i in range(1, M + 1):
        y, power = 0, 1
        for j in range(k):
            y ^= gf_mul(int(zvals[j]), power, r)
            power = gf_mul(power, i, r)
        out.append(1 - 2 * (y & 1))
    return np.array(out, dtype=np.int8)


class ScriptedBits:
    """BitSource stand-in replaying a fixed bit string (draw-order, LSB first)."""

    def __init__(self, bitstring: str):
        self.bits = [int(c) for c in bitstring]
        self.pos = 0
        self.consumed = 0
        self.seed_hex = None

    def take_int(self, nbits: int) -> int:
        chunk = self.bits[self.pos:self.pos + nbits]
        if len(chunk) != nbits:
            raise RuntimeError("scripted bits exhausted")
        self.pos += nbits
        self.consumed += nbits
        return sum(b << i for i, b in enumerate(chunk))

    def take_bits(self, nbits: int) -> np.ndarray:
        val = self.take_int(nbits)
        return np.array([(val >> i) & 1 for i in range(nbits)], dtype=np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
