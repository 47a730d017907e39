"""Point sets on the unit cube: Halton, maximin LHS, uniform, and meshes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .gp import as_rng
from .kernels import Domain

HALTON = "halton"
LATIN_HYPERCUBE = "latin_hypercube"
UNIFORM_RANDOM = "uniform_random"
GRID_MESH = "grid_mesh"

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
          53, 59, 61, 67, 71, 73, 79, 83, 89, 97)


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    kind: str

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]


def radical_inverse(i: np.ndarray, base: int) -> np.ndarray:
    i = np.array(i, dtype=np.int64)
    out = np.zeros(i.shape)
    f = 1.0 / base
    while np.any(i > 0):
        out += f * (i % base)
        i //= base
        f /= base
    return out


def halton(n: int, p: int) -> PointSet:
    """First ``n`` Halton points (indices 1..n, unscrambled) in ``p`` dimensions."""
    if n < 1 or p < 1:
        raise ValueError("need n >= 1 and p >= 1")
    if p > len(PRIMES):
        raise ValueError(f"halton supports p <= {len(PRIMES)}, got {p}")
    idx = np.arange(1, n + 1)
    return PointSet(np.column_stack([radical_inverse(idx, b) for b in PRIMES[:p]]), HALTON)


def _min_distances(designs: np.ndarray) -> np.ndarray:
    # designs: (c, n, p)
    diff = designs[:, :, None, :] - designs[:, None, :, :]
    d2 = np.einsum("cijk,cijk->cij", diff, diff)
    n = designs.shape[1]
    d2[:, np.arange(n), np.arange(n)] = np.inf
    return np.sqrt(d2.min(axis=(1, 2)))


def latin_hypercube(n: int, p: int, seed, maximin_candidates: int = 1000) -> PointSet:
    """Best of ``maximin_candidates`` random LHS designs by minimum pairwise distance.

    Each candidate puts exactly one point in every interval ``[(k-1)/n, k/n)`` of
    every coordinate, uniformly jittered inside its cell.  Ties keep the
    earliest candidate.
    """
    if n < 2:
        raise ValueError("latin_hypercube needs n >= 2")
    if maximin_candidates < 1:
        raise ValueError("maximin_candidates must be >= 1")
    rng = as_rng(seed)
    best, best_d = None, -np.inf
    # chunk so the (c, n, n) distance tensor stays small
    chunk = max(1, min(maximin_candidates, 4_000_000 // (n * n)))
    done = 0
    while done < maximin_candidates:
        c = min(chunk, maximin_candidates - done)
        perms = rng.permuted(np.tile(np.arange(n), (c, p, 1)), axis=2)
        cand = (perms.transpose(0, 2, 1) + rng.random((c, n, p))) / n
        d = _min_distances(cand)
        k = int(np.argmax(d))
        if d[k] > best_d:
            best, best_d = cand[k], d[k]
        done += c
    return PointSet(best, LATIN_HYPERCUBE)


def min_distance(points) -> float:
    pts = np.atleast_2d(points)
    return float(pdist(pts).min()) if len(pts) > 1 else np.inf


def uniform_random(n: int, p: int, seed) -> PointSet:
    return PointSet(as_rng(seed).random((n, p)), UNIFORM_RANDOM)


def grid_mesh(per_dim: int, p: int) -> PointSet:
    """Tensor mesh with ``per_dim`` equispaced nodes per axis, endpoints included.

    Rows are in C order (last coordinate varies fastest).
    """
    if per_dim < 2:
        raise ValueError("per_dim must be >= 2")
    axis = np.linspace(0.0, 1.0, per_dim)
    mesh = np.meshgrid(*([axis] * p), indexing="ij")
    return PointSet(np.column_stack([m.ravel() for m in mesh]), GRID_MESH)


def map_to_domain(ps: PointSet, d: Domain) -> PointSet:
    if ps.p != d.p:
        raise ValueError(f"point set has {ps.p} columns, domain has {d.p}")
    return PointSet(np.asarray(d.lower) + ps.points * d.width, ps.kind)
