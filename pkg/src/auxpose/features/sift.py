"""Dense SIFT fields and the translation-search alignment energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PATCH_SIZE

SUPPORT = 16
SPATIAL_BINS = 4
N_ORIENT = 8
SIFT_DIM = SPATIAL_BINS * SPATIAL_BINS * N_ORIENT
CLAMP = 0.2

_CHUNK = 64


@dataclass(frozen=True, eq=False)
class SiftField:
    descriptors: np.ndarray  # (rows, cols, 128)
    positions: np.ndarray    # (rows, cols, 2) descriptor centres as (x, y)
    step: int


def grid_origins(size: int, step: int) -> np.ndarray:
    """Top-left offsets of descriptor supports along one axis."""
    return np.arange(0, size - SUPPORT + 1, step)


def grid_positions(step: int, size: int = PATCH_SIZE) -> np.ndarray:
    o = grid_origins(size, step) + SUPPORT / 2.0
    xs, ys = np.meshgrid(o, o)
    return np.stack([xs, ys], axis=-1)


def _normalize(desc: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(desc, axis=-1, keepdims=True)
    safe = np.where(norm > 1e-12, norm, 1.0)
    desc = np.where(norm > 1e-12, desc / safe, 0.0)
    desc = np.minimum(desc, CLAMP)
    norm = np.linalg.norm(desc, axis=-1, keepdims=True)
    safe = np.where(norm > 1e-12, norm, 1.0)
    return np.where(norm > 1e-12, desc / safe, 0.0)


def _sift_chunk(patches: np.ndarray, step: int) -> np.ndarray:
    n, h, w = patches.shape
    gy, gx = np.gradient(patches, axis=(1, 2))
    mag = np.hypot(gx, gy)
    pos = np.mod(np.arctan2(gy, gx) * (N_ORIENT / (2.0 * np.pi)), N_ORIENT)
    base = np.floor(pos)
    frac = pos - base
    lo = base.astype(np.int64) % N_ORIENT
    hi = (lo + 1) % N_ORIENT
    orient = np.zeros((n, h, w, N_ORIENT))
    for k in range(N_ORIENT):
        orient[..., k] = mag * ((lo == k) * (1.0 - frac) + (hi == k) * frac)

    integral = np.zeros((n, h + 1, w + 1, N_ORIENT))
    integral[:, 1:, 1:] = orient.cumsum(axis=1).cumsum(axis=2)
    b = SUPPORT // SPATIAL_BINS
    # sum over every b x b box, indexed by its top-left pixel
    boxes = (integral[:, b:, b:] - integral[:, :-b, b:]
             - integral[:, b:, :-b] + integral[:, :-b, :-b])

    oy = grid_origins(h, step)
    ox = grid_origins(w, step)
    offs = np.arange(SPATIAL_BINS) * b
    rows = (oy[:, None] + offs[None, :])  # (ny, 4)
    cols = (ox[:, None] + offs[None, :])  # (nx, 4)
    cells = boxes[:, rows[:, None, :, None], cols[None, :, None, :]]  # (n, ny, nx, 4, 4, 8)
    desc = cells.reshape(n, oy.size, ox.size, SIFT_DIM)
    return _normalize(desc)


def dense_sift_batch(patches: np.ndarray, step: int = 4, dtype=np.float64) -> np.ndarray:
    """Dense SIFT for a stack of patches; returns (N, rows, cols, 128)."""
    patches = np.asarray(patches, dtype=np.float64)
    if step < 1:
        raise ValueError("step must be >= 1")
    if patches.ndim != 3 or patches.shape[1:] != (PATCH_SIZE, PATCH_SIZE):
        raise ValueError(f"expected (N, {PATCH_SIZE}, {PATCH_SIZE}) patches, got {patches.shape}")
    ny = grid_origins(PATCH_SIZE, step).size
    out = np.empty((patches.shape[0], ny, ny, SIFT_DIM), dtype=dtype)
    for start in range(0, patches.shape[0], _CHUNK):
        chunk = patches[start:start + _CHUNK]
        out[start:start + chunk.shape[0]] = _sift_chunk(chunk, step)
    return out


def dense_sift(patch, step: int = 4) -> SiftField:
    pixels = np.asarray(getattr(patch, "pixels", patch))
    desc = dense_sift_batch(pixels[None], step)[0]
    return SiftField(desc, grid_positions(step, pixels.shape[0]), step)


def _shifts(window: int, step: int) -> list:
    r = window // step
    return [(sx, sy) for sy in range(-r, r + 1) for sx in range(-r, r + 1)]


def _shift_costs(seed: np.ndarray, cands: np.ndarray, step: int, window: int, eta: float):
    ny, nx = seed.shape[:2]
    shifts, costs = [], []
    for sx, sy in _shifts(window, step):
        s = seed[max(0, sy):ny + min(0, sy), max(0, sx):nx + min(0, sx)]
        c = cands[:, max(0, -sy):ny + min(0, -sy), max(0, -sx):nx + min(0, -sx)]
        if s.size == 0:
            continue
        l1 = np.abs(c - s[None]).sum(axis=-1, dtype=np.float64).mean(axis=(1, 2))
        shifts.append((sx * step, sy * step))
        costs.append(l1 + eta * step * (abs(sx) + abs(sy)))
    return shifts, np.array(costs)


def alignment_energies(seed: np.ndarray, candidates: np.ndarray, step: int,
                       window: int = 8, eta: float = 0.01) -> np.ndarray:
    """Alignment energy of every candidate field against one seed field.

    For each translation d on the descriptor grid within +-window pixels the
    cost is the mean L1 distance between seed descriptors at p and candidate
    descriptors at p - d over the overlap, plus eta * |d|_1. The energy is the
    minimum cost over translations.
    """
    cands = np.asarray(candidates)
    if cands.ndim == 3:
        cands = cands[None]
    _, costs = _shift_costs(np.asarray(seed), cands, step, window, eta)
    return costs.min(axis=0)


def alignment_energy(seed, candidate, window: int = 8, eta: float = 0.01, step: int = 4) -> float:
    """Alignment energy between two 64x64 patches (lower means better aligned)."""
    fs = dense_sift(seed, step)
    fc = dense_sift(candidate, step)
    return float(alignment_energies(fs.descriptors, fc.descriptors, step, window, eta)[0])


def best_shift(seed, candidate, window: int = 8, eta: float = 0.0, step: int = 4) -> tuple:
    """Minimizing translation (dx, dy) in pixels; ties go to the first in raster order."""
    fs = dense_sift(seed, step).descriptors
    fc = dense_sift(candidate, step).descriptors
    shifts, costs = _shift_costs(fs, fc[None], step, window, eta)
    return shifts[int(np.argmin(costs[:, 0]))]
