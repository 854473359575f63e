"""Affinity propagation and the two clusterings built on it."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


def median_preference(S: np.ndarray) -> float:
    n = S.shape[0]
    if n < 2:
        return float(S[0, 0]) if n else 0.0
    return float(np.median(S[~np.eye(n, dtype=bool)]))


def affinity_propagation(S, damping: float = 0.9, max_iter: int = 1000, convergence_iter: int = 10,
                         preference: Optional[float] = None, seed: int = 0, tol: float = 1e-6) -> np.ndarray:
    """Cluster by responsibility/availability message passing.

    Stops once the exemplar set has been unchanged for ``convergence_iter``
    iterations and no message moved by more than ``tol`` times the largest
    similarity magnitude; with strong damping the exemplar set alone can sit
    still through the start-up transient.

    The diagonal of ``S`` holds the preferences unless ``preference`` is
    given. Returns, for every point, the index of its exemplar; exemplars are
    assigned to themselves. A tiny seeded perturbation of ``S`` breaks exact
    symmetries, so results are reproducible for a given ``seed``.
    """
    S = np.array(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {S.shape}")
    if not 0.5 <= damping < 1.0:
        raise ValueError("damping must lie in [0.5, 1)")
    if not np.all(np.isfinite(S)):
        raise ValueError("similarity matrix must be finite")
    n = S.shape[0]
    if preference is not None:
        np.fill_diagonal(S, preference)
    if n == 1:
        return np.zeros(1, dtype=np.int64)

    diag = np.diag(S).copy()
    off = S[~np.eye(n, dtype=bool)]
    if np.all(off == off[0]) and np.all(diag == diag[0]):
        # fully symmetric problem: either everyone is an exemplar or nobody but one
        if diag[0] > off[0]:
            return np.arange(n)
        return np.zeros(n, dtype=np.int64)

    rng = np.random.default_rng(seed)
    tiny = np.finfo(np.float64).tiny
    S += (np.finfo(np.float64).eps * np.abs(S) + tiny * 100) * rng.standard_normal((n, n))

    A = np.zeros((n, n))
    R = np.zeros((n, n))
    rows = np.arange(n)
    history = np.zeros((n, convergence_iter), dtype=bool)
    limit = tol * float(np.abs(S).max())
    for it in range(max_iter):
        A_prev, R_prev = A, R
        tmp = A + S
        best = np.argmax(tmp, axis=1)
        first = tmp[rows, best]
        tmp[rows, best] = -np.inf
        second = tmp.max(axis=1)
        tmp = S - first[:, None]
        tmp[rows, best] = S[rows, best] - second
        R = damping * R + (1.0 - damping) * tmp

        tmp = np.maximum(R, 0.0)
        tmp.flat[::n + 1] = R.flat[::n + 1]
        tmp -= tmp.sum(axis=0)
        dA = np.diag(tmp).copy()
        tmp = np.clip(tmp, 0.0, None)
        tmp.flat[::n + 1] = dA
        A = damping * A - (1.0 - damping) * tmp

        is_exemplar = (np.diag(A) + np.diag(R)) > 0
        history[:, it % convergence_iter] = is_exemplar
        if it >= convergence_iter:
            counts = history.sum(axis=1)
            stable = np.all((counts == convergence_iter) | (counts == 0))
            moved = max(float(np.abs(A - A_prev).max()), float(np.abs(R - R_prev).max()))
            if stable and is_exemplar.any() and moved <= limit:
                break
    else:
        log.warning("affinity propagation did not converge in %d iterations", max_iter)

    exemplars = np.flatnonzero((np.diag(A) + np.diag(R)) > 0)
    if exemplars.size == 0:
        exemplars = np.array([int(np.argmax(np.diag(A) + np.diag(R)))])
    choice = np.argmax(S[:, exemplars], axis=1)
    choice[exemplars] = np.arange(exemplars.size)
    # re-centre each cluster on its most representative member
    for k in range(exemplars.size):
        members = np.flatnonzero(choice == k)
        exemplars[k] = members[np.argmax(S[np.ix_(members, members)].sum(axis=0))]
    choice = np.argmax(S[:, exemplars], axis=1)
    choice[exemplars] = np.arange(exemplars.size)
    return exemplars[choice]


def exemplars_to_clusters(assignment: np.ndarray) -> list:
    """Group point indices by exemplar, ordered by each cluster's smallest member."""
    groups = {}
    for i, e in enumerate(np.asarray(assignment)):
        groups.setdefault(int(e), []).append(i)
    return sorted((np.array(g, dtype=np.int64) for g in groups.values()), key=lambda g: g[0])


def cluster_poses(poses, alpha_scale: float = 0.02, damping: float = 0.9, max_iter: int = 1000,
                  seed: int = 0) -> list:
    """Affinity propagation on exp(-alpha * Euclidean distance) between pose vectors."""
    p = np.asarray(poses, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError("need at least one pose")
    if alpha_scale <= 0:
        raise ValueError("alpha_scale must be positive")
    diff = p[:, None, :] - p[None, :, :]
    S = np.exp(-alpha_scale * np.sqrt(np.square(diff).sum(axis=-1)))
    np.fill_diagonal(S, median_preference(S))
    return exemplars_to_clusters(affinity_propagation(S, damping, max_iter, seed=seed))


def cluster_appearance(whog, damping: float = 0.9, max_iter: int = 1000, seed: int = 0) -> list:
    """Affinity propagation on WHOG dot products for one part type.

    Exact duplicate features are merged before clustering, so duplicated
    inputs land in the same cluster as their originals.
    """
    f = np.asarray(whog, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValueError("need at least one feature")
    unique, inverse = np.unique(f, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    S = unique @ unique.T
    np.fill_diagonal(S, median_preference(S))
    assign = affinity_propagation(S, damping, max_iter, seed=seed)
    return exemplars_to_clusters(assign[inverse])


def cluster_part_patches(whog_by_part: dict, damping: float = 0.9, max_iter: int = 1000,
                         seed: int = 0) -> dict:
    """Per-part-type appearance clusters: ``{part: [index arrays]}``."""
    return {part: cluster_appearance(f, damping, max_iter, seed) for part, f in whog_by_part.items()}
