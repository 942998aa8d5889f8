"""Assembly of the random sign matrix A = A1 * A2 and its bit accounting.

A1 has k-wise independent entries drawn from one seed of k*r1 bits
(r1 = ceil(log2(n*N + 1)), the matrix read row-major as one length-n*N
sign vector).  A2's rows are 4-wise independent sign vectors indexed by
the vertices of an expander walk: the walk lives on Z_m x Z_m with
m = 2^(2r), so a vertex is exactly one 4r-bit seed of the k=4 generator
(r = ceil(log2(N + 1))).  A is their entrywise product.

Total bits drawn:  k*r1  +  4r  +  3*(n-1),  which is O(N) with an
explicit desk-scale constant (<= 4N for the default k at N >= 256).
Every draw goes through one BitSource, so the predicted budget can be
checked against the consumed counter exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bits import BitSource, as_seed_bytes, derive_seed  # noqa: F401  (re-export)
from .expander import ExpanderGraph, walk
from .kwise import KwiseGenerator, expand_field_elements, kwise_expand

PROVENANCES = ("A1", "A2", "product", "external")


@dataclass(frozen=True)
class SignMatrix:
    """Dense n x N matrix with entries in {-1, +1}."""

    entries: np.ndarray
    provenance: str
    seed_hex: str | None = None

    def __post_init__(self):
        e = self.entries
        if e.ndim != 2:
            raise ValueError("entries must be a 2-D array")
        if e.dtype != np.int8:
            raise ValueError("entries must be int8")
        if not np.all(np.abs(e) == 1):
            raise ValueError("entries must be +1 or -1")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        e.setflags(write=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]


def ceil_log2(x: int) -> int:
    if x < 1:
        raise ValueError("ceil_log2 needs a positive integer")
    return (x - 1).bit_length()


def rows_for(N: int, eta: float) -> int:
    """n = (1 - eta) * N, rounded with ties toward the smaller n."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie strictly between 0 and 1")
    n = math.ceil((1.0 - eta) * N - 0.5)
    if n < 1:
        raise ValueError(f"n rounds to {n} for N={N}, eta={eta}")
    return n


def default_k(N: int) -> int:
    """Default independence order: 2*ceil(log2 N), capped at an even floor(sqrt(N))."""
    base = 2 * ceil_log2(max(N, 2))
    cap = math.isqrt(N)
    cap -= cap % 2
    return max(2, min(base, cap))


def build_a1(n: int, N: int, k: int, bits: BitSource) -> SignMatrix:
    """k-wise independent n x N sign matrix; draws exactly k*r1 bits."""
    if n < 1 or N < 1:
        raise ValueError("matrix dimensions must be positive")
    r1 = ceil_log2(n * N + 1)
    gen = KwiseGenerator(k=k, r=r1, M=n * N)
    seed = bits.take_bits(gen.seed_len)
    flat = kwise_expand(gen, seed)
    return SignMatrix(flat.reshape(n, N), "A1", seed_hex=bits.seed_hex)


def build_a2(n: int, N: int, bits: BitSource) -> SignMatrix:
    """Expander-walk rows: n sign vectors with 4-wise independent coordinates.

    Draws exactly 4r bits for the uniform start vertex and 3 per step.
    """
    if n < 1 or N < 1:
        raise ValueError("matrix dimensions must be positive")
    r = ceil_log2(N + 1)
    g = ExpanderGraph(m=1 << (2 * r))
    verts = walk(g, bits, n)
    x = np.array([v[0] for v in verts], dtype=np.uint64)
    y = np.array([v[1] for v in verts], dtype=np.uint64)
    mask = np.uint64((1 << r) - 1)
    shift = np.uint64(r)
    zrows = np.column_stack([x & mask, x >> shift, y & mask, y >> shift])
    gen = KwiseGenerator(k=4, r=r, M=N)
    return SignMatrix(expand_field_elements(gen, zrows), "A2", seed_hex=bits.seed_hex)


def hadamard(a1: SignMatrix, a2: SignMatrix) -> SignMatrix:
    """Entrywise product; commutative, and M * M is the all-ones matrix."""
    if a1.entries.shape != a2.entries.shape:
        raise ValueError(f"shape mismatch: {a1.entries.shape} vs {a2.entries.shape}")
    seed = a1.seed_hex if a1.seed_hex == a2.seed_hex else None
    return SignMatrix(a1.entries * a2.entries, "product", seed_hex=seed)


@dataclass(frozen=True)
class BuildReport:
    """Exact randomness accounting for one build."""

    n: int
    N: int
    k: int
    r1: int
    r: int
    m: int
    bits_a1: int
    bits_a2_start: int
    bits_a2_walk: int
    bits_total: int
    eta: float | None = None
    seed_hex: str | None = None

    def to_dict(self):
        return {
            "n": self.n,
            "N": self.N,
            "k": self.k,
            "r1": self.r1,
            "r": self.r,
            "m": self.m,
            "bits_a1": self.bits_a1,
            "bits_a2_start": self.bits_a2_start,
            "bits_a2_walk": self.bits_a2_walk,
            "bits_total": self.bits_total,
            "eta": self.eta,
            "seed_hex": self.seed_hex,
        }


def bit_budget(n: int, N: int, k: int, eta: float | None = None,
               seed_hex: str | None = None) -> BuildReport:
    """Predicted bit counts, without building anything."""
    if n > N:
        raise ValueError("need n <= N")
    r1 = ceil_log2(n * N + 1)
    r = ceil_log2(N + 1)
    bits_a1 = k * r1
    bits_a2_start = 4 * r
    bits_a2_walk = 3 * (n - 1)
    return BuildReport(
        n=n, N=N, k=k, r1=r1, r=r, m=1 << (2 * r),
        bits_a1=bits_a1, bits_a2_start=bits_a2_start, bits_a2_walk=bits_a2_walk,
        bits_total=bits_a1 + bits_a2_start + bits_a2_walk,
        eta=eta, seed_hex=seed_hex,
    )


@dataclass(frozen=True)
class BuildResult:
    a1: SignMatrix
    a2: SignMatrix
    a: SignMatrix
    report: BuildReport


def build(N: int, eta: float, k: int | None = None, seed=None,
          bits: BitSource | None = None) -> BuildResult:
    """Full pipeline: A1, A2, A = A1 * A2, and the budget report.

    Deterministic: equal (seed, N, eta, k) give bit-identical matrices.
    Explicit k must respect the k <= sqrt(N) operating guard; the default
    k is capped to it automatically.
    """
    n = rows_for(N, eta)
    if k is None:
        k = default_k(N)
    elif k < 1:
        raise ValueError("k must be >= 1")
    elif k > math.isqrt(N):
        raise ValueError(f"k={k} exceeds the sqrt(N) guard ({math.isqrt(N)})")
    if bits is None:
        if seed is None:
            raise ValueError("provide a seed or a BitSource")
        bits = BitSource(seed)
    start = bits.consumed
    a1 = build_a1(n, N, k, bits)
    a2 = build_a2(n, N, bits)
    a = hadamard(a1, a2)
    report = bit_budget(n, N, k, eta=eta, seed_hex=bits.seed_hex)
    drawn = bits.consumed - start
    if drawn != report.bits_total:
        raise AssertionError(
            f"bit accounting broke: predicted {report.bits_total}, drew {drawn}")
    return BuildResult(a1=a1, a2=a2, a=a, report=report)


def write_sgnm(path, mat: SignMatrix) -> None:
    """Serialize to the SGNM text format (one char per entry, diff-friendly)."""
    lut = np.array([ord("-"), ord("+")], dtype=np.uint8)
    with open(path, "wb") as fh:
        seed = mat.seed_hex if mat.seed_hex else "-"
        fh.write(f"SGNM {mat.n} {mat.N} {mat.provenance} {seed}\n".encode())
        rows = lut[(mat.entries > 0).astype(np.uint8)]
        nl = np.full((mat.n, 1), ord("\n"), dtype=np.uint8)
        fh.write(np.hstack([rows, nl]).tobytes())


def read_sgnm(path) -> SignMatrix:
    with open(path, "rb") as fh:
        header = fh.readline().decode().split()
        if len(header) != 5 or header[0] != "SGNM":
            raise ValueError(f"{path}: not an SGNM file")
        n, N = int(header[1]), int(header[2])
        provenance, seed = header[3], header[4]
        body = fh.read()
    rows = body.splitlines()
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} rows, found {len(rows)}")
    joined = b"".join(rows)
    if len(joined) != n * N:
        raise ValueError(f"{path}: row length mismatch")
    raw = np.frombuffer(joined, dtype=np.uint8).reshape(n, N)
    if not np.all((raw == ord("+")) | (raw == ord("-"))):
        raise ValueError(f"{path}: entries must be '+' or '-'")
    entries = np.where(raw == ord("+"), 1, -1).astype(np.int8)
    return SignMatrix(entries, provenance, seed_hex=None if seed == "-" else seed)
