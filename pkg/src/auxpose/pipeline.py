"""Training, inference, evaluation and metric export."""
from __future__ import annotations

import contextlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import bundle as bundle_io
from .auxparts import (AuxiliaryPart, detections_from_map, fuse, log_likelihood, minmax_normalize,
                       select_useful, vote_map, vote_sigmas)
from .classifiers import LdaDetector, score_features, subsample_features, train_lda, window_features
from .clustering import PartCluster, PatchPool, cluster_appearance, cluster_poses, greedy_cluster
from .config import PipelineConfig
from .core import (N_PARTS, PARTS, PATCH_SIZE, HALF_PATCH, DatasetManifest, GrayImage,
                   center_in_bounds, load_image)
from .features import (bow_pyramid_batch, build_dictionary, dense_sift_batch, estimate_whitening_stats,
                       hog_batch, whiten_hog)
from .features.sift import grid_positions
from .features.whitening import WhiteningStats
from .psmodel import MpsModel, PoseEstimate, PsComponent, Tree, assign_appearance_sharing, infer_mps
from .psmodel import learn_spatial_terms, unary_map
from .segmentation import segment

log = logging.getLogger(__name__)

MODES = ("baseline", "proposed")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


# --------------------------------------------------------------------------- trained model

@dataclass(frozen=True, eq=False)
class TrainedModel:
    mps: MpsModel
    aux_parts: tuple
    sigmas: np.ndarray                 # per-part vote smoothing width, pixels
    config: PipelineConfig
    info: Mapping = field(default_factory=dict)

    @property
    def semantic_ids(self) -> list:
        return sorted({d for comp in self.mps.components for ids in comp.detectors for d in ids})

    @property
    def aux_ids(self) -> list:
        return sorted(a.detector_id for a in self.aux_parts)


def _round_center(xy) -> tuple:
    return int(np.floor(xy[0] + 0.5)), int(np.floor(xy[1] + 0.5))


def _crop(values: np.ndarray, cx: int, cy: int) -> np.ndarray:
    return values[cy - HALF_PATCH: cy + HALF_PATCH, cx - HALF_PATCH: cx + HALF_PATCH]


def background_centers(width: int, height: int, count: int, rng: np.random.Generator) -> np.ndarray:
    xs = rng.integers(HALF_PATCH, width - HALF_PATCH + 1, size=count)
    ys = rng.integers(HALF_PATCH, height - HALF_PATCH + 1, size=count)
    return np.stack([xs, ys], axis=1)


def sample_aux_centers(mask: np.ndarray, cap: int, spacing: float, rng: np.random.Generator) -> np.ndarray:
    """Foreground patch centres in random order, each farther than ``spacing`` from earlier picks."""
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    ok = (xs >= HALF_PATCH) & (xs <= w - HALF_PATCH) & (ys >= HALF_PATCH) & (ys <= h - HALF_PATCH)
    xs, ys = xs[ok], ys[ok]
    chosen = []
    for idx in rng.permutation(xs.size):
        if len(chosen) >= cap:
            break
        p = np.array([xs[idx], ys[idx]], dtype=np.float64)
        if all(np.hypot(*(p - q)) > spacing for q in chosen):
            chosen.append(p)
    return np.array(chosen, dtype=np.int64).reshape(-1, 2)


def run_train(manifest: DatasetManifest, config: PipelineConfig = PipelineConfig()) -> TrainedModel:
    """Fit the mixture of pictorial structures and discover auxiliary parts on the train split."""
    for key, value in config.as_dict().items():
        log.info("hyperparameter %s = %r", key, value)
    entries = manifest.train
    if not entries:
        raise StageError("load", "training split is empty")
    with stage("load"):
        images = [load_image(e.image_path) for e in entries]
        ids = [e.image_id for e in entries]
        poses = np.stack([e.landmarks.locations for e in entries])

    with stage("pose-clustering"):
        vectors = poses - poses.mean(axis=1, keepdims=True) if config.center_poses else poses
        pose_clusters = cluster_poses(vectors.reshape(len(entries), -1), config.pose_alpha_scale,
                                      config.ap_damping, config.ap_max_iter, seed=config.seed)
        log.info("%d pose clusters", len(pose_clusters))

    with stage("semantic-patches"):
        sem_windows = {p: [] for p in range(N_PARTS)}
        sem_images = {p: [] for p in range(N_PARTS)}
        for i, (img, pose) in enumerate(zip(images, poses)):
            for p in range(N_PARTS):
                cx, cy = _round_center(pose[p])
                if not center_in_bounds(img.width, img.height, cx, cy):
                    log.warning("%s: %s too close to the border, patch skipped", ids[i], PARTS[p])
                    continue
                sem_windows[p].append(_crop(img.values, cx, cy))
                sem_images[p].append(i)
        sem_hog = {p: hog_batch(np.stack(w)) for p, w in sem_windows.items() if w}
        if len(sem_hog) != N_PARTS:
            raise ValueError("some part has no usable training patch")

    with stage("whitening"):
        bg = []
        for i, img in enumerate(images):
            rng = np.random.default_rng([config.seed, 1, i])
            for cx, cy in background_centers(img.width, img.height, config.background_per_image, rng):
                bg.append(_crop(img.values, int(cx), int(cy)))
        stats = estimate_whitening_stats(hog_batch(np.stack(bg)), config.whiten_regularizer)

    detectors = {}
    visual = []
    with stage("appearance-clustering"):
        for p in range(N_PARTS):
            groups = cluster_appearance(whiten_hog(sem_hog[p], stats), config.ap_damping,
                                        config.ap_max_iter, seed=config.seed)
            log.info("%s: %d appearance clusters", PARTS[p], len(groups))
            table = {}
            for j, g in enumerate(groups):
                det_id = f"{PARTS[p]}/{j}"
                detectors[det_id] = train_lda(sem_hog[p][g], stats)
                table[det_id] = [sem_images[p][k] for k in g]
            visual.append(table)

    with stage("spatial-terms"):
        tree = Tree.star()
        sharing = assign_appearance_sharing(visual, [c.tolist() for c in pose_clusters])
        components = tuple(
            PsComponent(tree, learn_spatial_terms(poses[c], tree, config.variance_floor,
                                                  config.default_variance), sharing[k])
            for k, c in enumerate(pose_clusters))

    with stage("segmentation"):
        params = config.segmentation_params()
        masks = [segment(img, params) for img in images]

    with stage("aux-sampling"):
        windows, offsets, sources = [], [], []
        for i, (img, mask) in enumerate(zip(images, masks)):
            rng = np.random.default_rng([config.seed, 2, i])
            for cx, cy in sample_aux_centers(mask, config.aux_patches_per_image, config.aux_spacing, rng):
                windows.append(_crop(img.values, int(cx), int(cy)))
                offsets.append(poses[i] - np.array([cx, cy], dtype=np.float64))
                sources.append(i)
        if not windows:
            raise ValueError("segmentation produced no foreground to sample from")
        windows = np.stack(windows)
        offsets = np.stack(offsets)
        log.info("auxiliary patch pool: %d patches", len(windows))

    with stage("dictionary"):
        sift = dense_sift_batch(windows, config.sift_step, dtype=np.float32)
        flat = sift.reshape(-1, sift.shape[-1])
        rng = np.random.default_rng([config.seed, 3])
        n_sample = min(config.dictionary_samples, flat.shape[0])
        pick = np.sort(rng.choice(flat.shape[0], size=n_sample, replace=False))
        dictionary = build_dictionary(flat[pick], config.dictionary_k, config.seed, config.kmeans_max_iter)
        positions = grid_positions(config.sift_step, PATCH_SIZE)
        bow = bow_pyramid_batch(sift, positions, dictionary)

    with stage("greedy-clustering"):
        pool = PatchPool(bow, sift, offsets, config.sift_step)
        clusters = greedy_cluster(pool, config.greedy_params())

    with stage("predictiveness"):
        pool_hog = hog_batch(windows)
        aux_parts, aux_detectors = select_useful(clusters, config.tau, pool_hog, stats)
        detectors.update(aux_detectors)
        sigmas = vote_sigmas(aux_parts, N_PARTS, config.vote_sigma_floor)
        log.info("%d greedy clusters, %d useful auxiliary parts", len(clusters), len(aux_parts))

    info = {
        "train_ids": ids,
        "pose_clusters": [c.tolist() for c in pose_clusters],
        "visual_clusters": visual,
        "greedy_clusters": [{"seed": int(c.seed), "members": c.members.tolist()} for c in clusters],
        "pool_sources": sources,
        "pool_size": len(windows),
    }
    mps = MpsModel(components, detectors, stats, {"parts": list(PARTS)})
    return TrainedModel(mps, tuple(aux_parts), sigmas, config, info)


# --------------------------------------------------------------------------- bundle

def _model_arrays(model: TrainedModel) -> tuple:
    det_ids = sorted(model.mps.detectors)
    dets = [model.mps.detectors[d] for d in det_ids]
    arrays = {
        "detector_weights": np.stack([d.weights for d in dets]),
        "detector_bias": np.array([d.bias for d in dets]),
        "detector_raw": np.array([d.raw_positive_score for d in dets]),
        "detector_npos": np.array([d.n_positives for d in dets], dtype=np.int64),
        "vote_sigmas": np.asarray(model.sigmas, dtype=np.float64),
    }
    if model.mps.stats is not None:
        arrays["whiten_mean"] = model.mps.stats.mean
        arrays["whiten_transform"] = model.mps.stats.transform
    if model.aux_parts:
        arrays["aux_mean_offsets"] = np.stack([a.mean_offsets for a in model.aux_parts])
        arrays["aux_disagreements"] = np.stack([a.disagreements for a in model.aux_parts])
    components = [{
        "parents": list(c.tree.parents),
        "terms": [[t.parent, t.child, list(t.mean), list(t.variance)] for t in c.terms],
        "detectors": [list(ids) for ids in c.detectors],
    } for c in model.mps.components]
    meta = {
        "format": "auxpose-model",
        "parts": list(PARTS),
        "config": model.config.as_dict(),
        "detector_ids": det_ids,
        "components": components,
        "whiten_regularizer": model.mps.stats.regularizer if model.mps.stats is not None else None,
        "aux_parts": [{"id": a.detector_id, "predictive": list(a.predictive),
                       "members": None if a.members is None else [int(m) for m in a.members]}
                      for a in model.aux_parts],
        "info": model.info,
    }
    return meta, arrays


def save_model(model: TrainedModel, path) -> str:
    """Write the model bundle; returns its checksum."""
    meta, arrays = _model_arrays(model)
    return bundle_io.write_bundle(path, meta, arrays)


def load_model(path) -> TrainedModel:
    meta, arrays = bundle_io.read_bundle(path)
    if meta.get("format") != "auxpose-model":
        raise bundle_io.BundleError("bundle does not hold a pose model")
    dets = {d: LdaDetector(arrays["detector_weights"][k], float(arrays["detector_bias"][k]),
                           float(arrays["detector_raw"][k]), int(arrays["detector_npos"][k]))
            for k, d in enumerate(meta["detector_ids"])}
    stats = None
    if "whiten_mean" in arrays:
        stats = WhiteningStats(arrays["whiten_mean"], arrays["whiten_transform"], meta["whiten_regularizer"])
    from .psmodel import SpatialTerm
    comps = []
    for c in meta["components"]:
        terms = tuple(SpatialTerm(p, ch, tuple(m), tuple(v)) for p, ch, m, v in c["terms"])
        comps.append(PsComponent(Tree(tuple(c["parents"])), terms, tuple(tuple(d) for d in c["detectors"])))
    aux = tuple(
        AuxiliaryPart(a["id"], arrays["aux_mean_offsets"][k], arrays["aux_disagreements"][k],
                      tuple(a["predictive"]), None if a["members"] is None else np.array(a["members"]))
        for k, a in enumerate(meta["aux_parts"]))
    config = PipelineConfig(**meta["config"])
    mps = MpsModel(tuple(comps), dets, stats, {"parts": meta["parts"]})
    return TrainedModel(mps, aux, arrays["vote_sigmas"], config, meta["info"])


# --------------------------------------------------------------------------- inference

@dataclass(frozen=True)
class Variant:
    mode: str
    lam: Optional[float] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True, eq=False)
class ImageResult:
    image_id: str
    estimates: tuple            # one PoseEstimate per variant
    votes: Optional[np.ndarray] = None


def infer_image(model: TrainedModel, image: GrayImage, variants: Sequence[Variant], keep_votes: bool = False):
    cfg = model.config
    feats, geo = window_features(image, cfg.stride)
    sem_ids, aux_ids = model.semantic_ids, model.aux_ids
    need_votes = keep_votes or any(v.mode == "proposed" for v in variants)
    maps = dict(zip(sem_ids, score_features([model.mps.detectors[d] for d in sem_ids], feats, geo)))
    if need_votes:
        sub, sub_geo = subsample_features(feats, geo, cfg.aux_stride // cfg.stride)
        maps.update(zip(aux_ids, score_features([model.mps.detectors[d] for d in aux_ids], sub, sub_geo)))
    comps = model.mps.components
    unaries = [[unary_map(c, p, maps) for p in range(N_PARTS)] for c in comps]

    votes = np.zeros((N_PARTS,) + geo.shape)
    if need_votes:
        by_id = {a.detector_id: a for a in model.aux_parts}
        for d in aux_ids:
            locs, scores = detections_from_map(maps[d], cfg.theta)
            votes += vote_map(locs, scores, by_id[d], geo, cfg.theta)

    out = []
    for v in variants:
        if v.mode == "baseline":
            lik = [[log_likelihood(minmax_normalize(u)) for u in us] for us in unaries]
        else:
            lam = cfg.lam if v.lam is None else v.lam
            lik = [[log_likelihood(fuse(u, votes[p], lam, model.sigmas[p], geo.stride))
                    for p, u in enumerate(us)] for us in unaries]
        out.append(infer_mps(comps, lik, geo))
    return out, (votes if keep_votes else None)


def run_infer_variants(model: TrainedModel, images: Sequence, variants: Sequence[Variant],
                       threads: int = 1, keep_votes: bool = False) -> list:
    """Per-image estimates for several variants at once; results sorted by image id.

    ``images`` holds ``(image_id, GrayImage or path)`` pairs. Score maps are
    computed once per image and shared by the variants.
    """
    def work(item):
        image_id, img = item
        if not isinstance(img, GrayImage):
            img = load_image(img)
        est, votes = infer_image(model, img, variants, keep_votes)
        return ImageResult(image_id, tuple(est), votes)

    with stage("infer"):
        items = sorted(images, key=lambda t: t[0])
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, items))
        else:
            results = [work(it) for it in items]
    return sorted(results, key=lambda r: r.image_id)


def run_infer(model: TrainedModel, images: Sequence, mode: str = "proposed", lam: Optional[float] = None,
              threads: int = 1) -> list:
    """``[(image_id, PoseEstimate)]`` sorted by image id."""
    res = run_infer_variants(model, images, [Variant(mode, lam)], threads)
    return [(r.image_id, r.estimates[0]) for r in res]


def write_predictions(path, predictions: Sequence) -> None:
    lines = []
    for image_id, est in sorted(predictions, key=lambda t: t[0]):
        coords = "\t".join(repr(float(v)) for v in np.asarray(est.locations).reshape(-1))
        lines.append(f"{image_id}\t{est.component}\t{est.score!r}\t{coords}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_predictions(path) -> list:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        f = line.split("\t")
        if len(f) != 3 + 2 * N_PARTS:
            raise ValueError(f"{path}:{n}: expected {3 + 2 * N_PARTS} fields, got {len(f)}")
        loc = np.array([float(v) for v in f[3:]]).reshape(N_PARTS, 2)
        out.append((f[0], PoseEstimate(loc, int(f[1]), float(f[2]))))
    return out


# --------------------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class ErrorRecord:
    image_id: str
    errors: tuple  # per part, pixels

    def __post_init__(self):
        e = tuple(float(v) for v in self.errors)
        if any(not np.isfinite(v) or v < 0 for v in e):
            raise ValueError("errors must be finite and non-negative")
        object.__setattr__(self, "errors", e)


@dataclass(frozen=True)
class MetricsTable:
    parts: tuple
    mu: tuple
    sigma: tuple
    mse: tuple
    n: int

    def row(self, part: str) -> tuple:
        k = self.parts.index(part)
        return self.mu[k], self.sigma[k], self.mse[k]


def _locations(x) -> np.ndarray:
    if isinstance(x, PoseEstimate):
        x = x.locations
    return np.asarray(getattr(x, "locations", x), dtype=np.float64).reshape(-1, 2)


def metrics_from_errors(records: Sequence[ErrorRecord], parts: Sequence[str] = PARTS) -> MetricsTable:
    recs = sorted(records, key=lambda r: r.image_id)
    if not recs:
        raise ValueError("no error records")
    e = np.array([r.errors for r in recs], dtype=np.float64)
    return MetricsTable(tuple(parts), tuple(float(v) for v in e.mean(axis=0)),
                        tuple(float(v) for v in e.std(axis=0)),
                        tuple(float(v) for v in np.square(e).mean(axis=0)), len(recs))


def evaluate(predictions: Mapping, ground_truth: Mapping) -> tuple:
    """Per-image Euclidean errors and their population statistics; sets keyed by image id."""
    predictions, ground_truth = dict(predictions), dict(ground_truth)
    if set(predictions) != set(ground_truth):
        missing = sorted(set(ground_truth) - set(predictions))[:3]
        extra = sorted(set(predictions) - set(ground_truth))[:3]
        raise ValueError(f"image ids differ (missing {missing}, unexpected {extra})")
    records = []
    for image_id in sorted(predictions):
        d = _locations(predictions[image_id]) - _locations(ground_truth[image_id])
        records.append(ErrorRecord(image_id, tuple(np.hypot(d[:, 0], d[:, 1]))))
    return records, metrics_from_errors(records)


METRICS_FILE = "metrics.tsv"
ERRORS_FILE = "errors.tsv"
PLOT_FILE = "plot_data.tsv"


def export_metrics(table: MetricsTable, errors: Sequence[ErrorRecord], out_dir) -> dict:
    """Write the metrics table, one line per image of errors, and long-format (part, error) plot data."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["part\tn\tmu\tsigma\tmse"]
    for k, part in enumerate(table.parts):
        rows.append(f"{part}\t{table.n}\t{table.mu[k]!r}\t{table.sigma[k]!r}\t{table.mse[k]!r}")
    recs = sorted(errors, key=lambda r: r.image_id)
    err_lines = ["\t".join([r.image_id] + [repr(v) for v in r.errors]) for r in recs]
    plot = ["part\terror"] + [f"{table.parts[k]}\t{r.errors[k]!r}" for r in recs
                              for k in range(len(table.parts))]
    paths = {"metrics": out / METRICS_FILE, "errors": out / ERRORS_FILE, "plot": out / PLOT_FILE}
    for key, lines in (("metrics", rows), ("errors", err_lines), ("plot", plot)):
        paths[key].write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return paths


def read_metrics(path) -> MetricsTable:
    lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip()]
    if not lines or lines[0].split("\t") != ["part", "n", "mu", "sigma", "mse"]:
        raise ValueError(f"{path}: not a metrics table")
    parts, mu, sigma, mse, ns = [], [], [], [], set()
    for line in lines[1:]:
        p, n, a, b, c = line.split("\t")
        parts.append(p)
        ns.add(int(n))
        mu.append(float(a))
        sigma.append(float(b))
        mse.append(float(c))
    if len(ns) != 1:
        raise ValueError(f"{path}: inconsistent image counts")
    return MetricsTable(tuple(parts), tuple(mu), tuple(sigma), tuple(mse), ns.pop())


def read_errors(path, n_parts: int = N_PARTS) -> list:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            f = line.split("\t")
            out.append(ErrorRecord(f[0], tuple(float(v) for v in f[1:1 + n_parts])))
    return out


def ground_truth_of(manifest: DatasetManifest, split: str = "test") -> dict:
    return {e.image_id: e.landmarks for e in manifest.split(split)}


def images_of(manifest: DatasetManifest, split: str = "test") -> list:
    return [(e.image_id, e.image_path) for e in manifest.split(split)]
