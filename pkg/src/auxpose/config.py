"""Pipeline hyperparameters and the key=value configuration file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .clustering.greedy import GreedyParams
from .segmentation import SegmentationParams


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # pose and appearance clustering
    pose_alpha_scale: float = 0.02
    center_poses: bool = True
    ap_damping: float = 0.9
    ap_max_iter: int = 1000
    # whitening statistics
    whiten_regularizer: float = 0.1
    background_per_image: int = 20
    # spatial terms
    variance_floor: float = 1.0
    default_variance: float = 100.0
    # segmentation
    bright_fraction: float = SegmentationParams.bright_fraction
    gradient_threshold: float = SegmentationParams.gradient_threshold
    min_component: int = SegmentationParams.min_component
    max_component: int = 0  # 0 -> half the image area
    # auxiliary patch pool
    aux_patches_per_image: int = 30
    aux_spacing: float = 8.0
    sift_step: int = 4
    dictionary_k: int = 500
    dictionary_samples: int = 20000
    kmeans_max_iter: int = 100
    # greedy clustering
    greedy_k: int = GreedyParams.k
    greedy_alpha: int = GreedyParams.alpha
    greedy_beta: float = GreedyParams.beta
    greedy_gamma: float = GreedyParams.gamma
    greedy_window: int = GreedyParams.window
    greedy_eta: float = GreedyParams.eta
    # auxiliary parts and fusion
    tau: float = 6.0
    theta: float = 0.5
    lam: float = 0.5
    vote_sigma_floor: float = 2.0
    stride: int = 4
    aux_stride: int = 8

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.tau <= 0 or self.aux_spacing < 0 or self.stride < 1:
            raise ValueError("tau must be positive, aux_spacing non-negative and stride >= 1")
        if self.aux_stride < self.stride or self.aux_stride % self.stride:
            raise ValueError("aux_stride must be a multiple of stride")
        self.segmentation_params()
        self.greedy_params()

    def segmentation_params(self) -> SegmentationParams:
        return SegmentationParams(self.bright_fraction, self.gradient_threshold, self.min_component,
                                  self.max_component or None)

    def greedy_params(self) -> GreedyParams:
        return GreedyParams(self.greedy_k, self.greedy_alpha, self.greedy_beta, self.greedy_gamma,
                            self.seed, self.greedy_window, self.greedy_eta)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        types = {f.name: type(f.default) for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown configuration key {key!r}")
            kwargs[key] = coerce(raw, types[key])
        return cls(**kwargs)


def coerce(raw, kind: type):
    if not isinstance(raw, str):
        return kind(raw)
    if kind is bool:
        low = raw.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("1", "true", "yes")
    return kind(raw.strip())


def parse_key_values(text: str) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are ignored; later keys win."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config_file(path) -> dict:
    return parse_key_values(Path(path).read_text(encoding="utf-8"))


def format_key_values(values: dict) -> str:
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in values.items())
