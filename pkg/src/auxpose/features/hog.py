"""31-dimensional HOG cells (18 signed + 9 unsigned orientations + 4 texture energies).

Gradients use central differences with one-sided differences on the window
border, so a window's descriptor depends only on its own pixels. Orientation
votes are split linearly between the two nearest of 18 bins centred on
multiples of 20 degrees; pixels vote into the 8x8 cell that contains them.
Each cell is normalized by the four 2x2-cell blocks it belongs to, with block
neighbourhoods clamped at the window border.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PATCH_SIZE

CELL_SIZE = 8
N_CELLS = PATCH_SIZE // CELL_SIZE
N_SIGNED = 18
N_UNSIGNED = N_SIGNED // 2
N_TEXTURE = 4
CELL_DIM = N_SIGNED + N_UNSIGNED + N_TEXTURE
HOG_DIM = N_CELLS * N_CELLS * CELL_DIM

TRUNCATION = 0.2
NORM_EPS = 1e-10
TEXTURE_SCALE = 0.2357

_CHUNK = 256


@dataclass(frozen=True, eq=False)
class HogFeature:
    values: np.ndarray  # flattened (cells_y, cells_x, 31)
    cells_x: int = N_CELLS
    cells_y: int = N_CELLS

    @property
    def per_cell_dim(self) -> int:
        return CELL_DIM

    def cells(self) -> np.ndarray:
        return self.values.reshape(self.cells_y, self.cells_x, CELL_DIM)


def orientation_histograms(windows: np.ndarray, n_bins: int, cell: int) -> np.ndarray:
    """Per-cell orientation histograms over a full circle, linear interpolation between bins.

    ``windows`` is (N, H, W); returns (N, H // cell, W // cell, n_bins).
    """
    n, h, w = windows.shape
    gy, gx = np.gradient(windows, axis=(1, 2))
    mag = np.hypot(gx, gy)
    pos = np.mod(np.arctan2(gy, gx) * (n_bins / (2.0 * np.pi)), n_bins)
    base = np.floor(pos)
    frac = pos - base
    lo = base.astype(np.int64) % n_bins
    hi = (lo + 1) % n_bins

    ch, cw = h // cell, w // cell
    rows = np.arange(h) // cell
    cols = np.arange(w) // cell
    cell_idx = (rows[:, None] * cw + cols[None, :])
    flat_cell = (np.arange(n)[:, None, None] * (ch * cw) + cell_idx[None]) * n_bins
    size = n * ch * cw * n_bins
    hist = np.bincount((flat_cell + lo).ravel(), weights=(mag * (1.0 - frac)).ravel(), minlength=size)
    hist += np.bincount((flat_cell + hi).ravel(), weights=(mag * frac).ravel(), minlength=size)
    return hist.reshape(n, ch, cw, n_bins)


def _hog_chunk(windows: np.ndarray) -> np.ndarray:
    signed = orientation_histograms(windows, N_SIGNED, CELL_SIZE)
    unsigned = signed[..., :N_UNSIGNED] + signed[..., N_UNSIGNED:]
    energy = np.square(unsigned).sum(axis=-1)
    padded = np.pad(energy, ((0, 0), (1, 1), (1, 1)), mode="edge")
    blocks = padded[:, :-1, :-1] + padded[:, 1:, :-1] + padded[:, :-1, 1:] + padded[:, 1:, 1:]
    c = N_CELLS
    # up-left, up-right, down-left, down-right blocks around each cell
    norms = [
        1.0 / np.sqrt(blocks[:, dy:dy + c, dx:dx + c] + NORM_EPS)
        for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1))
    ]
    out = np.zeros(windows.shape[:1] + (c, c, CELL_DIM))
    texture = []
    for nb in norms:
        hs = np.minimum(signed * nb[..., None], TRUNCATION)
        out[..., :N_SIGNED] += 0.5 * hs
        out[..., N_SIGNED:N_SIGNED + N_UNSIGNED] += 0.5 * np.minimum(unsigned * nb[..., None], TRUNCATION)
        texture.append(TEXTURE_SCALE * hs.sum(axis=-1))
    out[..., N_SIGNED + N_UNSIGNED:] = np.stack(texture, axis=-1)
    return out


def hog_batch(windows: np.ndarray) -> np.ndarray:
    """HOG for a stack of 64x64 windows; returns (N, 1984)."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or windows.shape[1:] != (PATCH_SIZE, PATCH_SIZE):
        raise ValueError(f"expected (N, {PATCH_SIZE}, {PATCH_SIZE}) windows, got {windows.shape}")
    out = np.empty((windows.shape[0], HOG_DIM))
    for start in range(0, windows.shape[0], _CHUNK):
        chunk = windows[start:start + _CHUNK]
        out[start:start + chunk.shape[0]] = _hog_chunk(chunk).reshape(chunk.shape[0], HOG_DIM)
    return out


def compute_hog(patch) -> HogFeature:
    pixels = getattr(patch, "pixels", patch)
    return HogFeature(hog_batch(np.asarray(pixels)[None])[0])
