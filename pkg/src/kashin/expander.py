"""Explicit constant-degree expander on Z_m x Z_m with bit-metered walks.

The graph is the classical Margulis/Gabber-Galil degree-8 family: each
vertex (x, y) is joined to the images of eight fixed affine maps (four
maps and their inverses), so the walk matrix P is symmetric and doubly
stochastic, with self-loops and multi-edges kept.  m is a power of two,
which makes the vertex count m^2 a power of 4 and lets walk positions
double as seeds for the 4-wise independent sign generator.

Known spectral bound for this family: second eigenvalue <= 5*sqrt(2)/8
~ 0.884.  Nothing here assumes that value; `estimate_lambda` and
`lambda_exact` measure it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import BitSource


class ConvergenceError(RuntimeError):
    """Power iteration failed to certify the requested tolerance."""

    def __init__(self, message, best_estimate, residual, iterations):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.residual = residual
        self.iterations = iterations


DEGREE = 8
BITS_PER_STEP = 3  # 3 bits index the 8 neighbor maps
DENSE_GUARD = 4096


@dataclass(frozen=True)
class ExpanderGraph:
    """Gabber-Galil graph on Z_m x Z_m, degree 8, m a power of two."""

    m: int

    def __post_init__(self):
        if self.m < 2 or self.m & (self.m - 1):
            raise ValueError(f"m must be a power of two >= 2, got {self.m}")

    @property
    def num_vertices(self) -> int:
        return self.m * self.m

    @property
    def side_bits(self) -> int:
        return self.m.bit_length() - 1

    @property
    def start_bits(self) -> int:
        return 2 * self.side_bits

    def vertex_id(self, v) -> int:
        x, y = v
        return x * self.m + y

    def id_to_vertex(self, i: int):
        return divmod(i, self.m)


def neighbors(g: ExpanderGraph, v):
    """The eight neighbors of (x, y), in the fixed decoding order."""
    x, y = v
    m = g.m
    return [
        ((x + y) % m, y),
        ((x - y) % m, y),
        ((x + y + 1) % m, y),
        ((x - y - 1) % m, y),
        (x, (y + x) % m),
        (x, (y - x) % m),
        (x, (y + x + 1) % m),
        (x, (y - x - 1) % m),
    ]


def neighbor_index_arrays(g: ExpanderGraph) -> np.ndarray:
    """(8, m^2) array: entry [j, u] is the id of map j applied to vertex u."""
    m = g.m
    x, y = np.divmod(np.arange(g.num_vertices, dtype=np.int64), m)
    maps = [
        ((x + y) % m, y),
        ((x - y) % m, y),
        ((x + y + 1) % m, y),
        ((x - y - 1) % m, y),
        (x, (y + x) % m),
        (x, (y - x) % m),
        (x, (y + x + 1) % m),
        (x, (y - x - 1) % m),
    ]
    return np.stack([mx * m + my for mx, my in maps])


def transition_matrix(g: ExpanderGraph) -> np.ndarray:
    """Dense walk matrix P (symmetric, doubly stochastic)."""
    nv = g.num_vertices
    if nv > DENSE_GUARD:
        raise ValueError(f"dense guard exceeded: {nv} > {DENSE_GUARD} vertices")
    idx = neighbor_index_arrays(g)
    P = np.zeros((nv, nv))
    rows = np.repeat(np.arange(nv), DEGREE)
    np.add.at(P, (rows, idx.T.ravel()), 1.0 / DEGREE)
    return P


@dataclass
class WalkState:
    """Mutable cursor for an in-progress walk; one owner at a time."""

    vertex: tuple
    steps: int = 0
    visited: list = field(default_factory=list)

    def record(self):
        self.visited.append(self.vertex)


def walk(g: ExpanderGraph, bits: BitSource, length: int):
    """Random walk of `length` vertices driven by the bit stream.

    Consumes exactly 2*log2(m) bits for the uniform start and 3 bits per
    subsequent step: total 2*log2(m) + 3*(length - 1).
    """
    if length < 1:
        raise ValueError("walk length must be >= 1")
    x = bits.take_int(g.side_bits)
    y = bits.take_int(g.side_bits)
    state = WalkState(vertex=(x, y))
    state.record()
    for _ in range(length - 1):
        j = bits.take_int(BITS_PER_STEP)
        state.vertex = neighbors(g, state.vertex)[j]
        state.steps += 1
        state.record()
    return state.visited


def walk_ensemble(g: ExpanderGraph, n_walks: int, length: int, rng,
                  return_trajectory: bool = False):
    """Many independent walks at once, as vertex ids (Monte-Carlo helper).

    Uses a numpy Generator rather than a BitSource; the step law is the
    same (uniform start, uniform map index per step).
    """
    idx = neighbor_index_arrays(g)
    pos = rng.integers(0, g.num_vertices, size=n_walks)
    if return_trajectory:
        traj = np.empty((length, n_walks), dtype=np.int64)
        traj[0] = pos
    for step in range(1, length):
        j = rng.integers(0, DEGREE, size=n_walks)
        pos = idx[j, pos]
        if return_trajectory:
            traj[step] = pos
    return traj if return_trajectory else pos


def _as_apply(operator):
    # Accept an ExpanderGraph or a dense symmetric doubly-stochastic matrix.
    if isinstance(operator, ExpanderGraph):
        idx = neighbor_index_arrays(operator)
        nv = operator.num_vertices

        def apply(v):
            return v[idx].sum(axis=0) / DEGREE

        return apply, nv
    P = np.asarray(operator, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("walk operator must be square")
    return (lambda v: P @ v), P.shape[0]


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    residual: float
    iterations: int
    tol: float

    def to_dict(self):
        return {
            "lambda_hat": self.value,
            "residual": self.residual,
            "iterations": self.iterations,
            "tol": self.tol,
        }


def estimate_lambda(operator, tol: float = 1e-8, max_iter: int = 20000,
                    seed: int = 7) -> LambdaEstimate:
    """Second-largest absolute eigenvalue of the walk matrix.

    Power iteration on P^2 restricted to the complement of the uniform
    vector (P^2 is positive semidefinite there, so the iteration is
    monotone and sign-free).  Stops once the eigenvalue residual certifies
    |lambda_hat - lambda| <= tol at the converged eigenpair; raises
    ConvergenceError (carrying the best iterate) otherwise.
    """
    apply, nv = _as_apply(operator)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(nv)
    v -= v.mean()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("degenerate start vector")
    v /= norm

    best = (0.0, np.inf)
    for it in range(1, max_iter + 1):
        w = apply(apply(v))
        w = w - w.mean()
        mu = float(v @ w)
        resid = float(np.linalg.norm(w - mu * v))
        lam_hat = float(np.sqrt(max(mu, 0.0)))
        if resid < best[1]:
            best = (lam_hat, resid)
        # |mu - lambda^2| <= resid for symmetric P^2, so the error on
        # lambda_hat = sqrt(mu) is about resid / (2 lambda_hat).
        if resid <= tol * max(2.0 * lam_hat, 1e-12):
            return LambdaEstimate(value=lam_hat, residual=resid, iterations=it, tol=tol)
        wnorm = np.linalg.norm(w)
        if wnorm == 0.0:
            # P annihilates the complement of e: lambda = 0 exactly.
            return LambdaEstimate(value=0.0, residual=0.0, iterations=it, tol=tol)
        v = w / wnorm

    raise ConvergenceError(
        f"power iteration did not certify tol={tol} within {max_iter} iterations",
        best_estimate=best[0], residual=best[1], iterations=max_iter,
    )


def lambda_exact(operator) -> float:
    """Dense-eigensolve oracle for the second-largest absolute eigenvalue."""
    if isinstance(operator, ExpanderGraph):
        P = transition_matrix(operator)
    else:
        P = np.asarray(operator, dtype=float)
    vals = np.linalg.eigvalsh(P)
    # drop one copy of the top eigenvalue (the uniform vector's)
    return float(max(abs(vals[0]), abs(vals[-2]))) if len(vals) > 1 else 0.0


def _set_mask(g, s):
    mask = np.zeros(g.num_vertices, dtype=bool)
    idx = np.asarray(s)
    if idx.dtype == bool:
        if idx.shape != (g.num_vertices,):
            raise ValueError("boolean set mask has wrong length")
        return idx
    mask[idx] = True
    return mask


def hitting_probability_exact(g: ExpanderGraph, sets) -> float:
    """Exact probability that step i of a walk lies in sets[i] for all i.

    The uniform start counts as step 1.  Computed as the projector product
    sum(Pi_k P ... P Pi_1 u) with u the uniform distribution; dense, so
    guarded to |V| <= 4096.
    """
    nv = g.num_vertices
    if nv > DENSE_GUARD:
        raise ValueError(f"dense guard exceeded: {nv} > {DENSE_GUARD} vertices")
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one step set")
    P = transition_matrix(g)
    v = np.full(nv, 1.0 / nv)
    v = np.where(_set_mask(g, sets[0]), v, 0.0)
    for s in sets[1:]:
        v = P @ v
        v = np.where(_set_mask(g, s), v, 0.0)
    return float(v.sum())


def hitting_bound(lam: float, sizes, num_vertices: int) -> float:
    """Spectral upper bound on the exact walk-hitting probability.

    Product over consecutive steps of sqrt(lam + (1-lam)|S_i|/|V|) *
    sqrt(lam + (1-lam)|S_{i+1}|/|V|); the empty product (one step) is 1.
    Dominates hitting_probability_exact for every symmetric doubly
    stochastic walk with second eigenvalue lam.
    """
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    sizes = list(sizes)
    if any(s < 0 or s > num_vertices for s in sizes):
        raise ValueError("set sizes must lie in [0, |V|]")
    factors = [lam + (1.0 - lam) * s / num_vertices for s in sizes]
    out = 1.0
    for a, b in zip(factors[:-1], factors[1:]):
        out *= np.sqrt(a) * np.sqrt(b)
    return float(out)
