"""k-wise independent random signs built over GF(2^r).

A length-M sign vector with exactly k-wise independent, unbiased
coordinates is produced from a seed of k*r truly random bits:
the seed is read as k field elements Z_0..Z_{k-1} of GF(2^r), coordinate
i (for i = 1..M, M <= 2^r - 1) evaluates the polynomial
Y_i = sum_j Z_j * alpha_i^j at the nonzero field element alpha_i with
integer encoding i, and the output sign is (-1)^lsb(Y_i).  Any k of the
Y_i are a bijective linear image of (Z_0,..,Z_{k-1}) because distinct
evaluation points make the k x k coefficient matrix Vandermonde, hence
invertible; uniform seeds therefore give jointly uniform k-tuples.

Field elements are integers whose binary digits are polynomial
coefficients over GF(2), reduced modulo a fixed irreducible polynomial:
one compiled-in modulus per degree r = 1..32 (the lexicographically
smallest irreducible polynomial of that degree with nonzero constant
term), so outputs are bit-reproducible everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

# Modulus table, keyed by degree r.  Encodings include the leading bit:
# e.g. 0x7 = x^2 + x + 1.  Irreducibility of every entry is unit-tested.
IRREDUCIBLE_POLY = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,
    9: 0x203,
    10: 0x409,
    11: 0x805,
    12: 0x1009,
    13: 0x201B,
    14: 0x4021,
    15: 0x8003,
    16: 0x1002B,
    17: 0x20009,
    18: 0x40009,
    19: 0x80027,
    20: 0x100009,
    21: 0x200005,
    22: 0x400003,
    23: 0x800021,
    24: 0x100001B,
    25: 0x2000009,
    26: 0x400001B,
    27: 0x8000027,
    28: 0x10000003,
    29: 0x20000005,
    30: 0x40000003,
    31: 0x80000009,
    32: 0x10000008D,
}

# Exhaustive enumeration guard: 2^(k*r) seeds must stay addressable.
ENUM_GUARD_BITS = 24


def _check_degree(r):
    if r not in IRREDUCIBLE_POLY:
        raise ValueError(f"unsupported field degree r={r}; supported: 1..32")


def gf_mul(a: int, b: int, r: int) -> int:
    """Product of two GF(2^r) elements under the fixed modulus."""
    _check_degree(r)
    order = 1 << r
    if not (0 <= a < order and 0 <= b < order):
        raise ValueError(f"operands must lie in [0, 2^{r})")
    mod = IRREDUCIBLE_POLY[r]
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        a <<= 1
        if a >> r & 1:
            a ^= mod
    return res


def _mul_x(a, r, mod):
    # a * x mod f, for reduced a
    a <<= 1
    if a >> r & 1:
        a ^= mod
    return a


@dataclass(frozen=True)
class KwiseGenerator:
    """Parameters of the k-wise independent sample space over GF(2^r).

    The sample space has 2^(k*r) elements (one per seed); each seed maps
    to a sign vector of length M <= 2^r - 1.
    """

    k: int
    r: int
    M: int

    def __post_init__(self):
        _check_degree(self.r)
        if self.k < 1:
            raise ValueError("independence order k must be >= 1")
        if not (1 <= self.M <= (1 << self.r) - 1):
            raise ValueError(f"need 1 <= M <= 2^r - 1 = {(1 << self.r) - 1}, got M={self.M}")

    @property
    def modulus(self) -> int:
        return IRREDUCIBLE_POLY[self.r]

    @property
    def seed_len(self) -> int:
        return self.k * self.r


_CHUNK = 4096


@njit(inline="always")
def _fill_nibble_table(T, alpha, rm1, one, mod):  # pragma: no cover
    # T[v] = (polynomial v) * alpha mod f, for the 4-bit window values
    T[1] = alpha
    a = alpha
    for p in (2, 4, 8):
        hi = (a >> rm1) & one
        a = (a << one) ^ (hi * mod)
        T[p] = a
    T[3] = T[2] ^ T[1]
    T[5] = T[4] ^ T[1]
    T[6] = T[4] ^ T[2]
    T[7] = T[4] ^ T[3]
    T[9] = T[8] ^ T[1]
    T[10] = T[8] ^ T[2]
    T[11] = T[8] ^ T[3]
    T[12] = T[8] ^ T[4]
    T[13] = T[8] ^ T[5]
    T[14] = T[8] ^ T[6]
    T[15] = T[8] ^ T[7]


@njit(parallel=True, cache=True)
def _expand_kernel(zrows, r, M, modulus, red):  # pragma: no cover - exercised via wrappers
    # zrows: (B, k) uint64, the seed split into field elements; red: the
    # 16-entry table of (v << r) mod f.  Horner evaluation of
    # Y = sum_j Z_j alpha^j at alpha = 1..M, emitting the sign (-1)^lsb(Y).
    # The multiplier alpha is fixed per output coordinate, so a 16-entry
    # nibble-product table amortizes over all k-1 multiplies; coordinates
    # are processed two at a time so the two serial reduce chains overlap.
    B, k = zrows.shape
    out = np.empty((B, M), dtype=np.int8)
    one = np.uint64(1)
    u4 = np.uint64(4)
    nib = np.uint64(15)
    rm1 = np.uint64(r - 1)
    rr = np.uint64(r)
    mod = np.uint64(modulus)
    rmask = (one << rr) - one
    total = B * M
    nnib = (r + 3) // 4
    top_shift = np.uint64(4 * (nnib - 1))
    n_chunks = (total + _CHUNK - 1) // _CHUNK
    for c in prange(n_chunks):
        T0 = np.empty(16, dtype=np.uint64)
        T1 = np.empty(16, dtype=np.uint64)
        T0[0] = np.uint64(0)
        T1[0] = np.uint64(0)
        lo = c * _CHUNK
        hi = min(lo + _CHUNK, total)
        for idx0 in range(lo, hi, 2):
            idx1 = idx0 + 1 if idx0 + 1 < hi else idx0  # tail lane duplicates
            b0 = idx0 // M
            b1 = idx1 // M
            _fill_nibble_table(T0, np.uint64(idx0 % M + 1), rm1, one, mod)
            _fill_nibble_table(T1, np.uint64(idx1 % M + 1), rm1, one, mod)
            y0 = zrows[b0, k - 1]
            y1 = zrows[b1, k - 1]
            for j in range(k - 2, -1, -1):
                acc0 = T0[(y0 >> top_shift) & nib]
                acc1 = T1[(y1 >> top_shift) & nib]
                for t in range(nnib - 2, -1, -1):
                    sh = np.uint64(4 * t)
                    a40 = acc0 << u4
                    a41 = acc1 << u4
                    acc0 = (a40 & rmask) ^ red[a40 >> rr] ^ T0[(y0 >> sh) & nib]
                    acc1 = (a41 & rmask) ^ red[a41 >> rr] ^ T1[(y1 >> sh) & nib]
                y0 = acc0 ^ zrows[b0, j]
                y1 = acc1 ^ zrows[b1, j]
            out[b0, idx0 % M] = np.int8(1 - 2 * np.int64(y0 & one))
            out[b1, idx1 % M] = np.int8(1 - 2 * np.int64(y1 & one))
    return out


def _reduction_table(r: int, modulus: int) -> np.ndarray:
    # (v << r) mod f for the 4-bit overflow values v = 0..15
    red = np.empty(16, dtype=np.uint64)
    for v in range(16):
        w = v << r
        for bit in range(r + 3, r - 1, -1):
            if w >> bit & 1:
                w ^= modulus << (bit - r)
        red[v] = w
    return red


def _bits_to_field_elements(seed, k, r):
    seed = np.asarray(seed, dtype=np.uint64).ravel()
    if seed.size != k * r:
        raise ValueError(f"seed must have exactly k*r = {k * r} bits, got {seed.size}")
    if np.any(seed > 1):
        raise ValueError("seed entries must be bits (0 or 1)")
    weights = np.uint64(1) << np.arange(r, dtype=np.uint64)
    return (seed.reshape(k, r) * weights).sum(axis=1, dtype=np.uint64)


def kwise_expand(gen: KwiseGenerator, seed) -> np.ndarray:
    """Expand a k*r-bit seed into the length-M sign vector.

    Bits are consumed little-endian: bit j*r+t of the seed is coefficient
    t of Z_j.  Pure function: equal inputs give identical outputs.
    """
    z = _bits_to_field_elements(seed, gen.k, gen.r)
    red = _reduction_table(gen.r, gen.modulus)
    return _expand_kernel(z.reshape(1, -1), gen.r, gen.M, gen.modulus, red)[0]


def expand_field_elements(gen: KwiseGenerator, zrows: np.ndarray) -> np.ndarray:
    """Batch expansion from seeds already split into (B, k) field elements."""
    zrows = np.ascontiguousarray(zrows, dtype=np.uint64)
    if zrows.ndim != 2 or zrows.shape[1] != gen.k:
        raise ValueError(f"zrows must have shape (B, {gen.k})")
    if np.any(zrows >> np.uint64(gen.r)):
        raise ValueError("field elements out of range for degree r")
    red = _reduction_table(gen.r, gen.modulus)
    return _expand_kernel(zrows, gen.r, gen.M, gen.modulus, red)


def expand_seed_ints(gen: KwiseGenerator, seeds) -> np.ndarray:
    """Batch expansion from integer-packed seeds (requires k*r <= 64).

    Seed integer bit t is seed-stream bit t, so Z_j = (s >> j*r) & (2^r-1).
    """
    if gen.seed_len > 64:
        raise ValueError("integer-packed seeds only supported for k*r <= 64")
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    shifts = (np.arange(gen.k, dtype=np.uint64) * np.uint64(gen.r))[None, :]
    mask = np.uint64((1 << gen.r) - 1)
    zrows = (seeds[:, None] >> shifts) & mask
    return expand_field_elements(gen, zrows)


def sign_table(gen: KwiseGenerator) -> np.ndarray:
    """Full (2^(k*r), M) table of the sample space, one row per seed."""
    if gen.seed_len > ENUM_GUARD_BITS:
        raise ValueError(f"enumeration guard exceeded: k*r = {gen.seed_len} > {ENUM_GUARD_BITS}")
    return expand_seed_ints(gen, np.arange(1 << gen.seed_len, dtype=np.uint64))


def coordinate_masks(gen: KwiseGenerator) -> list[int]:
    """Per-coordinate GF(2) masks: sign bit i of seed s is parity(mask[i] & s)."""
    r, mod = gen.r, gen.modulus
    masks = []
    for i in range(1, gen.M + 1):
        p = 1  # alpha_i^j, starting at j = 0
        mask = 0
        for j in range(gen.k):
            q = p
            for t in range(r):
                mask |= (q & 1) << (j * r + t)
                q = _mul_x(q, r, mod)
            p = gf_mul(p, i, r)
        masks.append(mask)
    return masks


@dataclass(frozen=True)
class KwiseIndependenceReport:
    """Result of exhaustively checking j-wise uniformity of the sample space."""

    k: int
    r: int
    M: int
    j: int
    seeds_enumerated: int
    subsets_checked: int
    total_subsets: int
    max_deviation: float

    @property
    def exact(self) -> bool:
        return self.max_deviation == 0.0

    def to_dict(self):
        return {
            "k": self.k,
            "r": self.r,
            "M": self.M,
            "j": self.j,
            "seeds_enumerated": self.seeds_enumerated,
            "subsets_checked": self.subsets_checked,
            "total_subsets": self.total_subsets,
            "max_deviation": self.max_deviation,
            "exact": self.exact,
        }


def _n_choose(m, j):
    out = 1
    for i in range(j):
        out = out * (m - i) // (i + 1)
    return out


def verify_kwise_exhaustive(gen: KwiseGenerator, j: int, max_subsets: int | None = None,
                            subset_seed: int = 0) -> KwiseIndependenceReport:
    """Enumerate every seed and measure j-coordinate pattern uniformity.

    Returns the maximum deviation of any pattern frequency from 2^-j over
    the checked j-subsets; the deviation is exactly 0 iff the enumerated
    space is j-wise independent on those subsets.  j may exceed k, in
    which case a positive deviation is the expected outcome.
    """
    if gen.seed_len > ENUM_GUARD_BITS:
        raise ValueError(f"enumeration guard exceeded: k*r = {gen.seed_len} > {ENUM_GUARD_BITS}")
    if not (1 <= j <= gen.M):
        raise ValueError(f"need 1 <= j <= M = {gen.M}")

    masks = coordinate_masks(gen)
    n_seeds = 1 << gen.seed_len
    seeds = np.arange(n_seeds, dtype=np.uint32)

    total = _n_choose(gen.M, j)
    if max_subsets is not None and total > max_subsets:
        rng = np.random.default_rng(subset_seed)
        subsets = [tuple(sorted(rng.choice(gen.M, size=j, replace=False)))
                   for _ in range(max_subsets)]
    else:
        subsets = list(itertools.combinations(range(gen.M), j))

    target = n_seeds / (1 << j)
    worst = 0
    for subset in subsets:
        pattern = np.zeros(n_seeds, dtype=np.uint32)
        for pos, c in enumerate(subset):
            bit = np.bitwise_count(seeds & np.uint32(masks[c])) & np.uint32(1)
            pattern |= bit << np.uint32(pos)
        counts = np.bincount(pattern, minlength=1 << j)
        dev = np.abs(counts - target).max()
        worst = max(worst, dev)

    return KwiseIndependenceReport(
        k=gen.k, r=gen.r, M=gen.M, j=j,
        seeds_enumerated=n_seeds,
        subsets_checked=len(subsets),
        total_subsets=total,
        max_deviation=float(worst / n_seeds),
    )
