"""Domain types and dataset ingestion.

Coordinates are pixels with the origin at the top-left corner, x to the
right and y downward. Landmarks are always stored in the canonical part
order given by :data:`PARTS`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

PARTS = ("head", "abdomen_tip", "left_wing_tip", "right_wing_tip")
N_PARTS = len(PARTS)
PATCH_SIZE = 64
HALF_PATCH = PATCH_SIZE // 2
SPLITS = ("train", "test")


class ManifestError(ValueError):
    """Raised when a dataset manifest is missing, malformed or inconsistent."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GrayImage:
    values: np.ndarray  # (height, width), intensities in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError(f"image must be a non-empty 2D grid, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    locations: np.ndarray  # (4, 2) as (x, y)
    occluded: tuple = (False,) * N_PARTS

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=np.float64)
        if loc.shape != (N_PARTS, 2):
            raise ValueError(f"expected {N_PARTS} landmarks, got array of shape {loc.shape}")
        if not np.all(np.isfinite(loc)):
            raise ValueError("landmark coordinates must be finite")
        occ = tuple(bool(o) for o in self.occluded)
        if len(occ) != N_PARTS:
            raise ValueError(f"expected {N_PARTS} occlusion flags, got {len(occ)}")
        object.__setattr__(self, "locations", _readonly(loc))
        object.__setattr__(self, "occluded", occ)

    def __eq__(self, other):
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        return np.array_equal(self.locations, other.locations) and self.occluded == other.occluded

    def __hash__(self):
        return hash((self.locations.tobytes(), self.occluded))


def pose_vector(landmarks: LandmarkSet) -> np.ndarray:
    """Flatten landmarks into the 8-vector (x_H, y_H, x_AT, y_AT, x_LWT, y_LWT, x_RWT, y_RWT)."""
    return landmarks.locations.reshape(-1).copy()


def unflatten_pose(vector: Sequence[float], occluded: Optional[Iterable[bool]] = None) -> LandmarkSet:
    v = np.asarray(vector, dtype=np.float64)
    if v.shape != (2 * N_PARTS,):
        raise ValueError(f"pose vector must have length {2 * N_PARTS}")
    occ = tuple(occluded) if occluded is not None else (False,) * N_PARTS
    return LandmarkSet(v.reshape(N_PARTS, 2), occ)


@dataclass(frozen=True, eq=False)
class Patch:
    pixels: np.ndarray  # (64, 64)
    source_image_id: str
    center: tuple  # integer (x, y)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.shape != (PATCH_SIZE, PATCH_SIZE):
            raise ValueError(f"patch must be {PATCH_SIZE}x{PATCH_SIZE}, got {p.shape}")
        object.__setattr__(self, "pixels", _readonly(p))
        object.__setattr__(self, "center", (int(self.center[0]), int(self.center[1])))


def center_in_bounds(width: int, height: int, cx: int, cy: int) -> bool:
    """True when a 64x64 patch centred at (cx, cy) lies fully inside the image."""
    return HALF_PATCH <= cx <= width - HALF_PATCH and HALF_PATCH <= cy <= height - HALF_PATCH


def extract_patch(image: GrayImage, center, source_image_id: str = "") -> Patch:
    """Crop rows cy-32..cy+31 and columns cx-32..cx+31. Out-of-bounds centres are rejected."""
    cx, cy = int(center[0]), int(center[1])
    if (cx, cy) != (center[0], center[1]):
        raise ValueError(f"patch centre must be integral, got {center}")
    if not center_in_bounds(image.width, image.height, cx, cy):
        raise ValueError(
            f"patch centre ({cx}, {cy}) closer than {HALF_PATCH} px to the border of a "
            f"{image.width}x{image.height} image"
        )
    pixels = image.values[cy - HALF_PATCH: cy + HALF_PATCH, cx - HALF_PATCH: cx + HALF_PATCH]
    return Patch(pixels, source_image_id, (cx, cy))


# --------------------------------------------------------------------------- images

def load_image(path) -> GrayImage:
    """Read a grayscale raster, normalizing intensities to [0, 1] whatever the bit depth."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            top = 65535.0 if im.mode.startswith("I;16") else max(float(arr.max()), 1.0)
            arr = arr / top
        elif im.mode == "1":
            arr = np.asarray(im, dtype=np.float64)
        elif im.mode == "F":
            arr = np.clip(np.asarray(im, dtype=np.float64), 0.0, 1.0)
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return GrayImage(arr)


def save_image(image: GrayImage, path) -> None:
    """Write an 8-bit grayscale raster (format from the file suffix)."""
    arr = np.round(image.values * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


# --------------------------------------------------------------------------- manifest

@dataclass(frozen=True)
class ManifestEntry:
    image_path: Path
    landmarks: LandmarkSet
    split: str
    mask_path: Optional[Path] = None
    image_id: str = ""


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    root: Path = field(default_factory=Path)

    def split(self, tag: str) -> list:
        return [e for e in self.entries if e.split == tag]

    @property
    def train(self) -> list:
        return self.split("train")

    @property
    def test(self) -> list:
        return self.split("test")

    def __len__(self):
        return len(self.entries)


def _parse_floats(text: str, count: int, what: str) -> list:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) != count:
        raise ValueError(f"expected {count} {what}, got {len(parts)}")
    out = []
    for t in parts:
        v = float(t)  # raises ValueError on garbage
        if not np.isfinite(v):
            raise ValueError(f"non-finite {what} value {t!r}")
        out.append(v)
    return out


def parse_manifest_line(line: str) -> tuple:
    """Parse one record: ``image ; x1,y1,...,x4,y4 ; o1,o2,o3,o4 ; split [; mask]``."""
    fields = [f.strip() for f in line.split(";")]
    if len(fields) not in (4, 5):
        raise ValueError(f"expected 4 or 5 ';'-separated fields, got {len(fields)}")
    image, coords, flags, split = fields[:4]
    mask = fields[4] if len(fields) == 5 else None
    if not image:
        raise ValueError("empty image path")
    if len(fields) == 5 and not mask:
        raise ValueError("empty mask path")
    xy = _parse_floats(coords, 2 * N_PARTS, "landmark coordinates")
    occ_raw = [t.strip() for t in flags.split(",")]
    if len(occ_raw) != N_PARTS:
        raise ValueError(f"expected {N_PARTS} occlusion flags, got {len(occ_raw)}")
    if any(t not in ("0", "1") for t in occ_raw):
        raise ValueError(f"occlusion flags must be 0 or 1, got {flags!r}")
    if split not in SPLITS:
        raise ValueError(f"split tag must be one of {SPLITS}, got {split!r}")
    landmarks = LandmarkSet(np.reshape(xy, (N_PARTS, 2)), tuple(t == "1" for t in occ_raw))
    return image, landmarks, split, mask


def load_dataset(manifest_path) -> DatasetManifest:
    """Load and validate a manifest file; paths resolve relative to the manifest's directory."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ManifestError(f"manifest not found: {manifest_path}")
    root = manifest_path.parent
    entries = []
    seen = set()
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            index = len(entries)
            try:
                image, landmarks, split, mask = parse_manifest_line(line)
            except ValueError as exc:
                raise ManifestError(f"entry {index} (line {lineno}): {exc}") from None
            image_path = root / image
            if not image_path.is_file():
                raise ManifestError(f"entry {index} (line {lineno}): image not found: {image_path}")
            mask_path = root / mask if mask else None
            if mask_path is not None and not mask_path.is_file():
                raise ManifestError(f"entry {index} (line {lineno}): mask not found: {mask_path}")
            if image in seen:
                raise ManifestError(f"entry {index} (line {lineno}): duplicate image {image!r}")
            seen.add(image)
            entries.append(ManifestEntry(image_path, landmarks, split, mask_path, image))
    if not entries:
        raise ManifestError("empty dataset")
    return DatasetManifest(tuple(entries), root)


def format_manifest_line(image: str, landmarks: LandmarkSet, split: str, mask: Optional[str] = None) -> str:
    coords = ",".join(repr(float(v)) for v in landmarks.locations.reshape(-1))
    flags = ",".join("1" if o else "0" for o in landmarks.occluded)
    fields = [image, coords, flags, split]
    if mask:
        fields.append(mask)
    return ";".join(fields)


def write_manifest(path, records: Iterable[tuple]) -> None:
    """Write ``(image, landmarks, split, mask)`` records in the manifest grammar."""
    lines = ["# image;x_H,y_H,x_AT,y_AT,x_LWT,y_LWT,x_RWT,y_RWT;occ_H,occ_AT,occ_LWT,occ_RWT;split[;mask]"]
    for image, landmarks, split, mask in records:
        lines.append(format_manifest_line(image, landmarks, split, mask))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
