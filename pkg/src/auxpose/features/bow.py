"""Visual-word dictionary and the two-level spatial-pyramid bag of words."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core import PATCH_SIZE

log = logging.getLogger(__name__)

N_QUADRANTS = 4


@dataclass(frozen=True, eq=False)
class Dictionary:
    centroids: np.ndarray  # (k, 128)
    seed: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(x: np.ndarray, c: np.ndarray, c_sq: np.ndarray) -> np.ndarray:
    d = np.square(x).sum(axis=1)[:, None] - 2.0 * (x @ c.T) + c_sq[None, :]
    return np.maximum(d, 0.0)


def assign_words(descriptors, centroids, chunk: int = 8192) -> np.ndarray:
    """Index of the nearest centroid per descriptor (ties go to the lowest index)."""
    x = np.asarray(descriptors, dtype=np.float64).reshape(-1, centroids.shape[1])
    c = np.asarray(centroids, dtype=np.float64)
    c_sq = np.square(c).sum(axis=1)
    out = np.empty(x.shape[0], dtype=np.int64)
    for s in range(0, x.shape[0], chunk):
        out[s:s + chunk] = np.argmin(_sq_dists(x[s:s + chunk], c, c_sq), axis=1)
    return out


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.square(x - x[chosen[0]]).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, np.square(x - x[idx]).sum(axis=1))
    return x[chosen].copy()


def kmeans(x, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> np.ndarray:
    """Lloyd iterations from a k-means++ start; returns the (k, dim) centroids."""
    x = np.asarray(x, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be positive")
    n_distinct = np.unique(x, axis=0).shape[0]
    if n_distinct < k:
        raise ValueError(f"k-means needs at least {k} distinct samples, got {n_distinct}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    prev = np.inf
    for it in range(max_iter):
        labels = assign_words(x, centroids)
        order = np.argsort(labels, kind="stable")
        ls = labels[order]
        starts = np.flatnonzero(np.r_[True, ls[1:] != ls[:-1]])
        used = ls[starts]
        counts = np.diff(np.r_[starts, ls.size])
        centroids[used] = np.add.reduceat(x[order], starts, axis=0) / counts[:, None]
        obj = np.square(x - centroids[labels]).sum()
        if prev < np.inf and abs(prev - obj) <= tol * max(prev, 1e-300):
            break
        if obj == 0.0:
            break
        prev = obj
    log.debug("k-means stopped after %d iterations", it + 1)
    return centroids


def build_dictionary(descriptors, k: int = 500, seed: int = 0, max_iter: int = 100) -> Dictionary:
    return Dictionary(kmeans(descriptors, k, seed=seed, max_iter=max_iter), seed)


def quadrant_index(positions: np.ndarray, size: int = PATCH_SIZE) -> np.ndarray:
    """0=top-left, 1=top-right, 2=bottom-left, 3=bottom-right; the centre line belongs right/bottom."""
    half = size / 2.0
    right = positions[..., 0] >= half
    bottom = positions[..., 1] >= half
    return right.astype(np.int64) + 2 * bottom.astype(np.int64)


def bow_from_words(words: np.ndarray, quadrants: np.ndarray, k: int) -> np.ndarray:
    """Pyramid histogram [whole patch | TL | TR | BL | BR] from word and quadrant indices."""
    quad = np.bincount(quadrants * k + words, minlength=N_QUADRANTS * k).astype(np.float64)
    level0 = quad.reshape(N_QUADRANTS, k).sum(axis=0)
    return np.concatenate([level0, quad])


def bow_pyramid(field, dictionary: Dictionary) -> np.ndarray:
    desc = np.asarray(field.descriptors)
    if desc.size == 0:
        raise ValueError("empty SIFT field")
    words = assign_words(desc.reshape(-1, desc.shape[-1]), dictionary.centroids)
    quads = quadrant_index(np.asarray(field.positions)).reshape(-1)
    return bow_from_words(words, quads, dictionary.k)


def bow_pyramid_batch(descriptors: np.ndarray, positions: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    """(N, rows, cols, 128) descriptor stacks -> (N, 5k) pyramid features."""
    n = descriptors.shape[0]
    per = descriptors.shape[1] * descriptors.shape[2]
    words = assign_words(descriptors.reshape(n * per, -1), dictionary.centroids).reshape(n, per)
    quads = quadrant_index(positions).reshape(-1)
    return np.stack([bow_from_words(words[i], quads, dictionary.k) for i in range(n)])


def histogram_intersection(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"histogram lengths differ: {a.shape} vs {b.shape}")
    return float(np.minimum(a, b).sum())
