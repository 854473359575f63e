"""Seeded generator of moth-like figures with exact landmark ground truth.

Each figure has a dark tapered body, two textured wings and, optionally,
unannotated structures tied to landmarks at fixed offsets: clubbed antennae
ahead of the head and dark bands across the abdomen. The rendered ends of the
body overshoot the head and abdomen-tip landmarks by a random amount, so the
appearance right at those two landmarks is an unreliable cue on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import GrayImage, LandmarkSet, save_image, write_manifest
from .segmentation import save_mask


@dataclass(frozen=True)
class SynthConfig:
    width: int = 200
    height: int = 200
    n_train: int = 200
    n_test: int = 200
    n_modes: int = 5
    occlusion_prob: float = 0.1
    unannotated_structures: bool = True
    seed: int = 42
    neck_length: tuple = (16.0, 44.0)
    abdomen_length: tuple = (50.0, 74.0)
    wing_length: tuple = (50.0, 58.0)
    tip_overshoot: tuple = (2.0, 30.0)
    angle_jitter_deg: float = 3.0
    antenna_length: float = 36.0
    antenna_angle_deg: float = 25.0
    stripe_distances: tuple = (40.0, 46.0, 52.0)
    margin: int = 34
    club_margin: int = 8
    noise: float = 0.015
    blur: float = 0.0
    footprint: float = 0.2

    def __post_init__(self):
        if self.n_train <= 0 or self.n_test <= 0 or self.n_modes <= 0:
            raise ValueError("counts must be positive")
        if not 0.0 <= self.occlusion_prob <= 1.0:
            raise ValueError("occlusion_prob must lie in [0, 1]")
        if self.width < 2 * self.margin + 32 or self.height < 2 * self.margin + 32:
            raise ValueError("image too small for the margin")

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise KeyError(f"unknown synth option {key!r}")
            default = getattr(cls, key)
            if isinstance(default, bool):
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            elif isinstance(default, tuple):
                kwargs[key] = tuple(float(v) for v in str(raw).split(","))
            else:
                kwargs[key] = raw
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class SynthSample:
    image: GrayImage
    landmarks: LandmarkSet
    mask: np.ndarray
    mode: int


BACKGROUND = 0.88
BODY = 0.22
WING = 0.5
VEIN = 0.3
ANTENNA = 0.12
STRIPE = 0.05


def _rot(v: np.ndarray, deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _capsule(X, Y, a, b, ra, rb):
    """Coverage of a tapered capsule from a (radius ra) to b (radius rb), plus axial position t."""
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        t = np.zeros_like(X)
    else:
        t = np.clip(((X - a[0]) * ab[0] + (Y - a[1]) * ab[1]) / L2, 0.0, 1.0)
    px, py = a[0] + t * ab[0], a[1] + t * ab[1]
    d = np.hypot(X - px, Y - py) - (ra + (rb - ra) * t)
    return np.clip(0.5 - d, 0.0, 1.0), t


def _triangle(X, Y, p0, p1, p2):
    pts = [p0, p1, p2]
    area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
    sign = 1.0 if area > 0 else -1.0
    d = np.full(X.shape, -np.inf)
    for i in range(3):
        a, b = pts[i], pts[(i + 1) % 3]
        e = b - a
        n = np.array([e[1], -e[0]]) * sign / np.hypot(e[0], e[1])
        d = np.maximum(d, (X - a[0]) * n[0] + (Y - a[1]) * n[1])
    return np.clip(0.5 - d, 0.0, 1.0)


def _paint(img, alpha, value):
    img *= 1.0 - alpha
    img += alpha * value


def _modes(cfg: SynthConfig, rng: np.random.Generator) -> list:
    modes = []
    for _ in range(cfg.n_modes):
        body = -90.0 + rng.uniform(-35.0, 35.0)
        modes.append((body, rng.uniform(35.0, 135.0), rng.uniform(35.0, 135.0)))
    return modes


def render_sample(cfg: SynthConfig, mode: tuple, rng: np.random.Generator) -> tuple:
    """Render one figure; returns (image array, landmarks (4, 2), foreground mask, occluded flags)."""
    W, H = cfg.width, cfg.height
    body_deg = mode[0] + rng.normal(0.0, cfg.angle_jitter_deg)
    left_deg = mode[1] + rng.normal(0.0, cfg.angle_jitter_deg)
    right_deg = mode[2] + rng.normal(0.0, cfg.angle_jitter_deg)
    neck, abdomen = rng.uniform(*cfg.neck_length), rng.uniform(*cfg.abdomen_length)
    wl = rng.uniform(*cfg.wing_length), rng.uniform(*cfg.wing_length)
    over_h, over_a = rng.uniform(*cfg.tip_overshoot), rng.uniform(*cfg.tip_overshoot)

    u = np.array([math.cos(math.radians(body_deg)), math.sin(math.radians(body_deg))])
    thorax = np.zeros(2)
    head = thorax + neck * u
    tip = thorax - abdomen * u
    wing_l = thorax + wl[0] * _rot(u, -left_deg)
    wing_r = thorax + wl[1] * _rot(u, right_deg)
    clubs = [head + cfg.antenna_length * _rot(u, s * cfg.antenna_angle_deg) for s in (-1, 1)]
    key = np.array([head, tip, wing_l, wing_r])
    size = np.array([W - 1, H - 1], dtype=np.float64)
    room_lo = cfg.margin - key.min(axis=0)
    room_hi = size - cfg.margin - key.max(axis=0)
    if cfg.unannotated_structures:
        c = np.array(clubs)
        room_lo = np.maximum(room_lo, cfg.club_margin - c.min(axis=0))
        room_hi = np.minimum(room_hi, size - cfg.club_margin - c.max(axis=0))
    shift = np.array([rng.uniform(min(a, b), max(a, b)) for a, b in zip(room_lo, room_hi)])
    thorax, head, tip, wing_l, wing_r = (p + shift for p in (thorax, head, tip, wing_l, wing_r))
    clubs = [c + shift for c in clubs]

    Y, X = np.mgrid[0:H, 0:W].astype(np.float64)
    field = ndimage.zoom(rng.normal(0.0, 1.0, (5, 5)), (H / 5.0, W / 5.0), order=3)[:H, :W]
    img = BACKGROUND + 0.02 * field
    fg = np.zeros((H, W))

    # wings: triangles from the thorax with darker veins; the landmark sits just inside the corner
    for tipw in (wing_l, wing_r):
        d = (tipw - thorax) / np.linalg.norm(tipw - thorax)
        corner = tipw + 2.5 * d
        a = _triangle(X, Y, thorax + 10.0 * u, thorax - 13.0 * u, corner)
        _paint(img, a, WING)
        fg = np.maximum(fg, a)
        for frac in (0.35, 0.65):
            end = thorax + 7.0 * u + frac * (corner - thorax - 7.0 * u) * 1.0
            end = end + (1.0 - frac) * (corner - end) * 0.8
            v, _ = _capsule(X, Y, thorax, end, 0.7, 0.7)
            _paint(img, v * a, VEIN)

    head_end = head + over_h * u
    tip_end = tip - over_a * u
    axis = [(tip_end, 2.5), (tip_end + 22.0 * u, 6.0), (thorax, 9.0), (head_end, 4.0)]
    body = np.zeros((H, W))
    for (p, rp), (q, rq) in zip(axis[:-1], axis[1:]):
        c, _ = _capsule(X, Y, p, q, rp, rq)
        body = np.maximum(body, c)
    _paint(img, body, BODY)
    fg = np.maximum(fg, body)

    if cfg.unannotated_structures:
        along = (X - tip[0]) * u[0] + (Y - tip[1]) * u[1]
        for s in cfg.stripe_distances:
            band = np.clip(2.0 - np.abs(along - s), 0.0, 1.0) * body
            _paint(img, band, STRIPE)
        for club in clubs:
            stroke, t = _capsule(X, Y, head_end, club, 0.8, 1.2)
            visible = stroke
            _paint(img, visible, ANTENNA)
            knob, _ = _capsule(X, Y, club, club, 3.5, 3.5)
            _paint(img, knob, ANTENNA)
            fg = np.maximum(fg, np.maximum(knob, visible))

    landmarks = np.array([head, tip, wing_l, wing_r])
    occluded = [False] * 4
    mask = fg > cfg.footprint
    if rng.uniform() < cfg.occlusion_prob:
        part = int(rng.integers(4))
        occluded[part] = True
        occ, _ = _capsule(X, Y, landmarks[part], landmarks[part], 9.0, 9.0)
        _paint(img, occ, BACKGROUND)
        mask &= occ <= 1.0 - cfg.footprint

    if cfg.blur > 0:
        img = ndimage.gaussian_filter(img, cfg.blur)
    img += rng.normal(0.0, cfg.noise, img.shape)
    return np.clip(img, 0.0, 1.0), landmarks, mask, occluded


def generate(cfg: SynthConfig) -> list:
    """All samples, training split first."""
    rng = np.random.default_rng(cfg.seed)
    modes = _modes(cfg, rng)
    samples = []
    for _ in range(cfg.n_train + cfg.n_test):
        m = int(rng.integers(cfg.n_modes))
        img, lm, mask, occ = render_sample(cfg, modes[m], rng)
        samples.append(SynthSample(GrayImage(img), LandmarkSet(lm, tuple(occ)), mask, m))
    return samples


def synth_generate(cfg: SynthConfig, out_dir) -> Path:
    """Write images, masks and ``manifest.txt`` to ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    records = []
    for i, s in enumerate(generate(cfg)):
        split = "train" if i < cfg.n_train else "test"
        name = f"{split}_{i:04d}"
        save_image(s.image, out / "images" / f"{name}.png")
        save_mask(s.mask, out / "masks" / f"{name}.pbm")
        records.append((f"images/{name}.png", s.landmarks, split, f"masks/{name}.pbm"))
    manifest = out / "manifest.txt"
    write_manifest(manifest, records)
    return manifest
