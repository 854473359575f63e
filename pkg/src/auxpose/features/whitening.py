"""Shared background statistics: mean and inverse square root of the regularized covariance.

The covariance is the population (1/N) estimate, so whitening the sample set
itself with lambda = 0 yields exactly unit covariance.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class WhiteningStats:
    mean: np.ndarray       # mu0, (d,)
    transform: np.ndarray  # (Cov + lambda I)^(-1/2), symmetric (d, d)
    regularizer: float = 0.0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def inverse_covariance(self) -> np.ndarray:
        """(Cov + lambda I)^(-1), recovered as transform @ transform."""
        inv = self.transform @ self.transform
        return 0.5 * (inv + inv.T)


def estimate_whitening_stats(samples, regularizer: float = 0.1) -> WhiteningStats:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("whitening statistics need at least 2 samples")
    if regularizer < 0:
        raise ValueError("regularizer must be non-negative")
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, bias=True).reshape(x.shape[1], x.shape[1])
    evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    evals = np.clip(evals, 0.0, None) + regularizer
    if np.any(evals <= 0):
        raise ValueError("covariance is singular; use a positive regularizer")
    transform = (evecs * evals ** -0.5) @ evecs.T
    transform = 0.5 * (transform + transform.T)
    return WhiteningStats(mean, transform, float(regularizer))


def whiten_hog(hog, stats: WhiteningStats) -> np.ndarray:
    """transform @ (hog - mu0); accepts a single vector or an (N, d) stack."""
    h = np.asarray(getattr(hog, "values", hog), dtype=np.float64)
    if h.shape[-1] != stats.dim:
        raise ValueError(f"feature length {h.shape[-1]} does not match whitening stats ({stats.dim})")
    # transform is symmetric, so right-multiplication whitens each row
    return (h - stats.mean) @ stats.transform
