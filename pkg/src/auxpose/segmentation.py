"""Foreground segmentation of a dark animal on a bright background."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import GrayImage


@dataclass(frozen=True)
class SegmentationParams:
    bright_fraction: float = 0.93
    gradient_threshold: float = 0.08
    min_component: int = 200
    max_component: Optional[int] = None  # None -> half the image area

    def __post_init__(self):
        if not 0.0 < self.bright_fraction < 1.0:
            raise ValueError("bright_fraction must lie in (0, 1)")
        if self.gradient_threshold <= 0:
            raise ValueError("gradient_threshold must be positive")
        if self.max_component is not None and not self.min_component < self.max_component:
            raise ValueError("min_component must be smaller than max_component")

    def size_bounds(self, width: int, height: int) -> tuple:
        hi = self.max_component if self.max_component is not None else int(0.5 * width * height)
        if not self.min_component < hi:
            raise ValueError("min_component must be smaller than max_component")
        return self.min_component, hi


def threshold_from_percentile(image, bright_fraction: float) -> float:
    """Intensity t such that #(pixels > t) is the largest count not exceeding bright_fraction * N.

    Computed from the sorted value list, so ties never push the brighter count
    over the target.
    """
    values = np.sort(np.asarray(getattr(image, "values", image), dtype=np.float64).ravel())
    n = values.size
    target = math.floor(bright_fraction * n + 1e-9)
    target = min(max(target, 0), n - 1)
    return float(values[n - target - 1])


def gradient_magnitude(image) -> np.ndarray:
    """Central differences inside, one-sided differences on the border."""
    v = np.asarray(getattr(image, "values", image), dtype=np.float64)
    if v.shape[0] < 3 or v.shape[1] < 3:
        raise ValueError("gradient_magnitude needs an image of at least 3x3")
    gy, gx = np.gradient(v)
    return np.hypot(gx, gy)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ValueError("connectivity must be 4 or 8")


def connected_components(mask: np.ndarray, connectivity: int = 8) -> tuple:
    """Label foreground components.

    Returns ``(labels, sizes)`` where ``labels`` is 0 on background and
    1..n on components, and ``sizes[k-1]`` is the pixel count of label k.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_structure(connectivity))
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return labels, sizes


def segment(image: GrayImage, params: SegmentationParams = SegmentationParams(),
            connectivity: int = 8) -> np.ndarray:
    """Dark-or-high-gradient pixels, keeping components within the size bounds."""
    v = image.values
    t = threshold_from_percentile(v, params.bright_fraction)
    candidate = (v <= t) | (gradient_magnitude(v) >= params.gradient_threshold)
    labels, sizes = connected_components(candidate, connectivity)
    lo, hi = params.size_bounds(image.width, image.height)
    keep = np.zeros(sizes.size + 1, dtype=bool)
    keep[1:] = (sizes >= lo) & (sizes <= hi)
    return keep[labels]


def save_mask(mask: np.ndarray, path) -> None:
    """Write a 1-bit raster (PBM for a ``.pbm`` suffix)."""
    Image.fromarray(np.asarray(mask, dtype=bool)).save(Path(path))


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("1"), dtype=bool)
