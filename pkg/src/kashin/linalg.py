"""Dense real linear algebra for kernel subspaces of sign matrices.

Double precision throughout.  Sign matrices at desk scale (N <= 4096)
are well conditioned for these routines, so plain row reduction plus
modified Gram-Schmidt reaches kernel residuals far below the 1e-8*sqrt(N)
contract, and power iteration certifies operator norms to 1e-6 relative.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .builder import SignMatrix


class PowerIterationError(RuntimeError):
    """Raised when the norm estimate cannot be certified; carries the best iterate."""

    def __init__(self, message, best_estimate, residual, iterations):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.residual = residual
        self.iterations = iterations


def _as_array(A) -> np.ndarray:
    if isinstance(A, SignMatrix):
        return A.entries.astype(np.float64)
    return np.asarray(A, dtype=np.float64)


def _rref_nullspace(A: np.ndarray):
    """Null-space spanning set via row reduction with partial pivoting.

    Returns (vectors, rank); vectors are the canonical free-variable
    solutions, one per non-pivot column, not yet orthonormal.
    """
    n, N = A.shape
    R = A.copy()
    tol = max(n, N) * np.finfo(float).eps * max(np.abs(A).max(initial=0.0), 1.0)
    pivots = []
    row = 0
    for col in range(N):
        if row >= n:
            break
        p = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[p, col]) <= tol:
            continue
        if p != row:
            R[[row, p]] = R[[p, row]]
        R[row] /= R[row, col]
        others = np.arange(n) != row
        R[others] -= np.outer(R[others, col], R[row])
        pivots.append(col)
        row += 1
    rank = len(pivots)
    free = [c for c in range(N) if c not in set(pivots)]
    vectors = np.zeros((len(free), N))
    for i, f in enumerate(free):
        vectors[i, f] = 1.0
        for prow, pcol in enumerate(pivots):
            vectors[i, pcol] = -R[prow, f]
    return vectors, rank


def _mgs_orthonormalize(V: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass."""
    Q = []
    for v in V:
        w = v.astype(np.float64).copy()
        for _ in range(2):
            for q in Q:
                w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm > 1e-12:
            Q.append(w / nrm)
    return np.array(Q) if Q else np.zeros((0, V.shape[1]))


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal basis of Ker A, rows of `vectors`."""

    vectors: np.ndarray  # (dim, N)
    n_dim: int
    seed_hex: str | None = None

    def __post_init__(self):
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def orthonormality_residual(self) -> float:
        if self.dim == 0:
            return 0.0
        G = self.vectors @ self.vectors.T
        return float(np.abs(G - np.eye(self.dim)).max())

    def kernel_residuals(self, A) -> np.ndarray:
        """Per-basis-vector l2 residuals ||A b||_2."""
        A = _as_array(A)
        if self.dim == 0:
            return np.zeros(0)
        return np.linalg.norm(A @ self.vectors.T, axis=0)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection of x onto the kernel subspace."""
        return self.vectors.T @ (self.vectors @ x)


def kernel_basis(A, seed_hex: str | None = None) -> KernelBasis:
    """Orthonormal basis of the null space of A.

    Row reduction with partial pivoting, then MGS; dim = N - rank(A)
    (rank deficiency simply enlarges the kernel).
    """
    arr = _as_array(A)
    if arr.ndim != 2:
        raise ValueError("A must be a matrix")
    if seed_hex is None and isinstance(A, SignMatrix):
        seed_hex = A.seed_hex
    vectors, rank = _rref_nullspace(arr)
    Q = _mgs_orthonormalize(vectors)
    if Q.shape[0] != arr.shape[1] - rank:
        raise AssertionError("orthonormalization lost kernel dimensions")
    return KernelBasis(vectors=Q, n_dim=arr.shape[1], seed_hex=seed_hex)


def operator_norm(A, tol: float = 1e-6, max_iter: int = 20000, seed: int = 0x5eed) -> float:
    """Largest singular value, via power iteration on A^T A.

    Matrix-free products (A^T (A v)); the Rayleigh residual certifies
    relative accuracy `tol` at convergence.  Raises PowerIterationError
    with the best iterate if the certificate is not reached.
    """
    arr = _as_array(A)
    n, N = arr.shape
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(N)
    v /= np.linalg.norm(v)
    best = (0.0, np.inf)
    for it in range(1, max_iter + 1):
        w = arr.T @ (arr @ v)
        mu = float(v @ w)  # = ||A v||^2 <= sigma_max^2
        resid = float(np.linalg.norm(w - mu * v))
        sigma = float(np.sqrt(max(mu, 0.0)))
        if resid < best[1]:
            best = (sigma, resid)
        if resid <= 2.0 * tol * max(mu, np.finfo(float).tiny):
            return sigma
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return 0.0
        v = w / wn
    raise PowerIterationError(
        f"operator norm not certified to tol={tol} in {max_iter} iterations",
        best_estimate=best[0], residual=best[1], iterations=max_iter,
    )


def ratio(x) -> float:
    """l1 mass relative to the flat-vector maximum: ||x||_1 / (sqrt(N) ||x||_2).

    Lies in (0, 1]; equals 1 iff all coordinates share one magnitude.
    """
    x = np.asarray(x, dtype=np.float64)
    l2 = np.linalg.norm(x)
    if l2 == 0.0:
        raise ValueError("ratio is undefined for the zero vector")
    return float(np.abs(x).sum() / (np.sqrt(x.size) * l2))


def write_basis(path, basis: KernelBasis, fmt: str = "json") -> None:
    """Export dim x N floating values with provenance (N, dim, seed)."""
    if fmt == "json":
        doc = {
            "n_dim": basis.n_dim,
            "dim": basis.dim,
            "seed": basis.seed_hex,
            "vectors": [[float(v) for v in row] for row in basis.vectors],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(f"# n_dim={basis.n_dim} dim={basis.dim} seed={basis.seed_hex or '-'}\n")
            writer = csv.writer(fh)
            for row in basis.vectors:
                writer.writerow([repr(float(v)) for v in row])
    else:
        raise ValueError(f"unknown basis format {fmt!r}")


def read_basis(path) -> KernelBasis:
    with open(path) as fh:
        first = fh.read(1)
        fh.seek(0)
        if first == "{":
            doc = json.load(fh)
            return KernelBasis(
                vectors=np.asarray(doc["vectors"], dtype=np.float64).reshape(doc["dim"], doc["n_dim"]),
                n_dim=doc["n_dim"],
                seed_hex=doc["seed"],
            )
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing CSV provenance header")
        meta = dict(kv.split("=") for kv in header[1:].split())
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        vectors = np.asarray(rows, dtype=np.float64).reshape(int(meta["dim"]), int(meta["n_dim"]))
        seed = None if meta.get("seed") in (None, "-") else meta["seed"]
        return KernelBasis(vectors=vectors, n_dim=int(meta["n_dim"]), seed_hex=seed)
