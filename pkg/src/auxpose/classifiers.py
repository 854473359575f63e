"""LDA detectors over HOG and their dense evaluation on images."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import HALF_PATCH, PATCH_SIZE
from .features.hog import hog_batch
from .features.whitening import WhiteningStats


@dataclass(frozen=True)
class GridGeometry:
    """Window-centre grid: cell (row, col) sits at pixel (x0 + stride*col, y0 + stride*row)."""
    rows: int
    cols: int
    stride: int
    x0: float = HALF_PATCH
    y0: float = HALF_PATCH

    @property
    def shape(self) -> tuple:
        return (self.rows, self.cols)

    def pixel(self, row, col) -> tuple:
        return (self.x0 + self.stride * np.asarray(col), self.y0 + self.stride * np.asarray(row))

    def nearest_cell(self, x, y) -> tuple:
        """Nearest (row, col) for pixel coordinates; halves round up. May fall outside the grid."""
        col = np.floor((np.asarray(x, dtype=np.float64) - self.x0) / self.stride + 0.5).astype(np.int64)
        row = np.floor((np.asarray(y, dtype=np.float64) - self.y0) / self.stride + 0.5).astype(np.int64)
        return row, col

    def contains(self, row, col) -> np.ndarray:
        row, col = np.asarray(row), np.asarray(col)
        return (row >= 0) & (row < self.rows) & (col >= 0) & (col < self.cols)


def window_geometry(width: int, height: int, stride: int) -> GridGeometry:
    if width < PATCH_SIZE or height < PATCH_SIZE:
        raise ValueError(f"image {width}x{height} is smaller than the {PATCH_SIZE}x{PATCH_SIZE} window")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return GridGeometry((height - PATCH_SIZE) // stride + 1, (width - PATCH_SIZE) // stride + 1, stride)


@dataclass(frozen=True, eq=False)
class ScoreMap:
    scores: np.ndarray  # (rows, cols)
    geometry: GridGeometry

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.shape != self.geometry.shape:
            raise ValueError(f"scores {s.shape} do not match grid {self.geometry.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("score maps must be finite")
        object.__setattr__(self, "scores", s)

    @property
    def stride(self) -> int:
        return self.geometry.stride

    def argmax_pixel(self) -> tuple:
        r, c = np.unravel_index(int(np.argmax(self.scores)), self.scores.shape)
        x, y = self.geometry.pixel(r, c)
        return float(x), float(y)


def export_score_map(smap: ScoreMap, path) -> None:
    """Write ``<path>.bin`` (little-endian float64, row-major) and a ``<path>.txt`` header."""
    path = Path(path)
    g = smap.geometry
    path.with_suffix(".bin").write_bytes(smap.scores.astype("<f8").tobytes())
    path.with_suffix(".txt").write_text(
        f"rows={g.rows}\ncols={g.cols}\nstride={g.stride}\nx0={g.x0!r}\ny0={g.y0!r}\ndtype=<f8\n",
        encoding="utf-8")


def read_score_map(path) -> ScoreMap:
    path = Path(path)
    header = dict(line.split("=", 1) for line in path.with_suffix(".txt").read_text().split())
    g = GridGeometry(int(header["rows"]), int(header["cols"]), int(header["stride"]),
                     float(header["x0"]), float(header["y0"]))
    data = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8").reshape(g.shape)
    return ScoreMap(data.astype(np.float64), g)


@dataclass(frozen=True, eq=False)
class LdaDetector:
    weights: np.ndarray
    bias: float
    raw_positive_score: float = 0.0  # (mu_pos - mu0)' Sigma^-1 (mu_pos - mu0) before calibration
    n_positives: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("detector weights must be a finite vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def train_lda(positives, stats: WhiteningStats) -> LdaDetector:
    """Shared-covariance LDA, calibrated so that mu0 scores 0 and the positive mean scores 1."""
    pos = np.atleast_2d(np.asarray(positives, dtype=np.float64))
    if pos.shape[0] == 0 or pos.size == 0:
        raise ValueError("LDA needs at least one positive sample")
    if pos.shape[1] != stats.dim:
        raise ValueError(f"feature length {pos.shape[1]} does not match whitening stats ({stats.dim})")
    delta = pos.mean(axis=0) - stats.mean
    w = stats.inverse_covariance @ delta
    raw = float(w @ delta)
    if raw <= 0.0 or not np.isfinite(raw):
        return LdaDetector(np.zeros_like(w), 0.0, 0.0, pos.shape[0])
    w = w / raw
    return LdaDetector(w, -float(w @ stats.mean), raw, pos.shape[0])


def score_window(det: LdaDetector, feature) -> float:
    f = np.asarray(getattr(feature, "values", feature), dtype=np.float64)
    if f.shape != (det.dim,):
        raise ValueError(f"feature length {f.shape} does not match detector ({det.dim})")
    return float(np.einsum("j,j->", f, det.weights) + det.bias)


def window_features(image, stride: int) -> tuple:
    """HOG of every 64x64 window whose top-left lies on the stride grid: ((rows, cols, d), geometry)."""
    values = np.asarray(getattr(image, "values", image), dtype=np.float64)
    geo = window_geometry(values.shape[1], values.shape[0], stride)
    windows = sliding_window_view(values, (PATCH_SIZE, PATCH_SIZE))[::stride, ::stride]
    windows = windows[:geo.rows, :geo.cols].reshape(-1, PATCH_SIZE, PATCH_SIZE)
    feats = hog_batch(windows)
    return feats.reshape(geo.rows, geo.cols, -1), geo


def subsample_features(feats: np.ndarray, geo: GridGeometry, factor: int) -> tuple:
    """Features on a coarser stride reusing windows of a finer grid (same window positions)."""
    sub = feats[::factor, ::factor]
    return sub, GridGeometry(sub.shape[0], sub.shape[1], geo.stride * factor, geo.x0, geo.y0)


def score_features(detectors: Sequence[LdaDetector], feats: np.ndarray, geo: GridGeometry) -> list:
    """Score maps for many detectors over precomputed window features."""
    if not detectors:
        return []
    flat = feats.reshape(-1, feats.shape[-1])
    W = np.stack([d.weights for d in detectors])
    if W.shape[1] != flat.shape[1]:
        raise ValueError("detector and feature dimensions differ")
    raw = np.einsum("ij,kj->ik", flat, W)
    return [ScoreMap((raw[:, k] + d.bias).reshape(geo.shape), geo) for k, d in enumerate(detectors)]


def score_map(det: LdaDetector, image, stride: int = 4) -> ScoreMap:
    feats, geo = window_features(image, stride)
    return score_features([det], feats, geo)[0]
