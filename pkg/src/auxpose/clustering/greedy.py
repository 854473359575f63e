"""Greedy seed-and-prune clustering of auxiliary-part patches."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..features.sift import alignment_energies

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GreedyParams:
    k: int = 60
    alpha: int = 5
    beta: float = 4.5
    gamma: float = 20.0
    seed: int = 0
    window: int = 8
    eta: float = 0.01

    def __post_init__(self):
        if not self.k >= self.alpha >= 1:
            raise ValueError("greedy clustering needs k >= alpha >= 1")
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")


@dataclass(frozen=True, eq=False)
class PartCluster:
    members: np.ndarray          # patch ids, seed first
    seed: Optional[int] = None
    offsets: Optional[np.ndarray] = field(default=None)  # (K, n_parts, 2) part minus patch centre

    def __post_init__(self):
        m = np.asarray(self.members, dtype=np.int64)
        if m.size == 0:
            raise ValueError("a cluster must not be empty")
        if np.unique(m).size != m.size:
            raise ValueError("cluster members must be unique")
        object.__setattr__(self, "members", m)

    def __len__(self):
        return int(self.members.size)


@dataclass
class PatchPool:
    """Candidate patches: BOW pyramids, dense-SIFT fields and offsets to every semantic part."""
    bow: np.ndarray      # (n, 2500)
    sift: np.ndarray     # (n, rows, cols, 128)
    offsets: np.ndarray  # (n, n_parts, 2), semantic part location minus patch centre
    sift_step: int = 4

    def __len__(self):
        return self.bow.shape[0]


def k_most_similar(pool: PatchPool, seed: int, available: np.ndarray, k: int) -> np.ndarray:
    """The k available patches (seed excluded) with largest histogram intersection; ties by index."""
    cand = np.flatnonzero(available)
    cand = cand[cand != seed]
    if cand.size == 0:
        return cand
    # bins empty in the seed contribute nothing; counts are integers, so the sums are exact
    nz = np.flatnonzero(pool.bow[seed])
    sims = np.minimum(pool.bow[np.ix_(cand, nz)], pool.bow[seed, nz][None, :]).sum(axis=1, dtype=np.float64)
    order = np.lexsort((cand, -sims))
    return cand[order[:k]]


def seed_disagreement(pool: PatchPool, seed: int, cand: np.ndarray) -> np.ndarray:
    """Per-part Euclidean deviation of candidate offsets from the seed's offsets, (len(cand), n_parts)."""
    return np.linalg.norm(pool.offsets[cand] - pool.offsets[seed][None], axis=-1)


def _prune(pool: PatchPool, seed: int, q: np.ndarray, params: GreedyParams, need: int):
    # the two prunes are independent filters, so the cheap offset test runs first;
    # returns None as soon as fewer than ``need`` candidates can survive
    if q.size:
        q = q[np.all(seed_disagreement(pool, seed, q) <= params.gamma, axis=1)]
    if q.size < need:
        return None
    if q.size:
        energy = alignment_energies(pool.sift[seed], pool.sift[q], pool.sift_step, params.window, params.eta)
        q = q[energy < params.beta]
    if q.size < need:
        return None
    return np.concatenate([[seed], q]).astype(np.int64)


def get_cluster(pool: PatchPool, seed: int, available: np.ndarray, params: GreedyParams) -> np.ndarray:
    """Seed plus its k nearest available patches that pass both prunes."""
    q = k_most_similar(pool, seed, available, params.k)
    return _prune(pool, seed, q, params, 0)


def greedy_cluster(pool: PatchPool, params: GreedyParams = GreedyParams()) -> list:
    """Form clusters one seed at a time until every seed has been tried.

    Seeds are drawn uniformly from the sorted list of remaining seeds with
    ``numpy.random.default_rng(params.seed)``, so the result is reproducible.
    """
    n = len(pool)
    if n == 0:
        raise ValueError("patch pool is empty")
    rng = np.random.default_rng(params.seed)
    available = np.ones(n, dtype=bool)
    seeds = list(range(n))
    clusters = []
    while seeds:
        pick = int(rng.integers(len(seeds)))
        seed = seeds[pick]
        q = k_most_similar(pool, seed, available, params.k)
        members = _prune(pool, seed, q, params, params.alpha - 1)
        if members is not None:
            available[members] = False
            taken = set(members.tolist())
            seeds = [s for s in seeds if s not in taken]
            clusters.append(PartCluster(members, seed, pool.offsets[members]))
        else:
            seeds.pop(pick)
    log.info("greedy clustering: %d clusters from %d patches", len(clusters), n)
    return clusters
