"""Predictiveness of discovered clusters, and voting with the useful ones."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .classifiers import GridGeometry, LdaDetector, ScoreMap, train_lda
from .clustering.greedy import PartCluster
from .core import N_PARTS


@dataclass(frozen=True, eq=False)
class AuxiliaryPart:
    detector_id: str
    mean_offsets: np.ndarray   # (n_parts, 2)
    disagreements: np.ndarray  # (n_parts,)
    predictive: tuple          # per-part flags
    members: Optional[np.ndarray] = None


def _offsets(cluster, part: Optional[int] = None) -> np.ndarray:
    off = cluster.offsets if isinstance(cluster, PartCluster) else cluster
    off = np.asarray(off, dtype=np.float64)
    if off.shape[0] == 0:
        raise ValueError("cluster is empty")
    return off if part is None else off[:, part]


def _mean(off: np.ndarray) -> np.ndarray:
    # averaging around the first member keeps identical members exact, so their D is exactly 0
    return off[0] + (off - off[0]).mean(axis=0)


def mean_offset(cluster, part: int) -> np.ndarray:
    """Average displacement (annotation minus patch centre) of one part over the cluster."""
    return _mean(_offsets(cluster, part))


def disagreement(cluster, part: int) -> float:
    """Mean Euclidean distance of member offsets from the cluster's mean offset."""
    off = _offsets(cluster, part)
    return float(np.linalg.norm(off - _mean(off), axis=1).mean())


def cluster_statistics(cluster) -> tuple:
    off = _offsets(cluster)
    means = _mean(off)
    dis = np.linalg.norm(off - means[None], axis=2).mean(axis=0)
    return means, dis


def select_useful(clusters: Sequence, taus, hog=None, stats=None, id_prefix: str = "aux") -> tuple:
    """Keep clusters predictive of at least one part (D_i <= tau_i).

    When ``hog`` (features indexed by patch id) and ``stats`` are given, an LDA
    detector is trained on each kept cluster's members. Returns
    ``(aux_parts, detectors)`` with detectors keyed by id.
    """
    taus = np.broadcast_to(np.asarray(taus, dtype=np.float64), (N_PARTS,))
    if np.any(taus <= 0):
        raise ValueError("thresholds must be positive")
    parts, detectors = [], {}
    for idx, cluster in enumerate(clusters):
        means, dis = cluster_statistics(cluster)
        flags = dis <= taus[:dis.shape[0]]
        if not flags.any():
            continue
        det_id = f"{id_prefix}/{idx}"
        members = getattr(cluster, "members", None)
        if hog is not None and stats is not None and members is not None:
            detectors[det_id] = train_lda(np.asarray(hog)[members], stats)
        parts.append(AuxiliaryPart(det_id, means, dis, tuple(bool(f) for f in flags), members))
    return parts, detectors


def detections_from_map(smap: ScoreMap, threshold: float) -> tuple:
    """Every grid location scoring above the threshold: ((k, 2) pixel locations, (k,) scores)."""
    rows, cols = np.nonzero(smap.scores > threshold)
    xs, ys = smap.geometry.pixel(rows, cols)
    return np.stack([xs, ys], axis=1).astype(np.float64).reshape(-1, 2), smap.scores[rows, cols]


def vote_map(locations, scores, aux: AuxiliaryPart, geometry: GridGeometry,
             threshold: float = 0.5) -> np.ndarray:
    """Votes of one auxiliary part: (n_parts, rows, cols) grid of accumulated weights.

    A detection above the threshold votes max(score, 0) at the cell nearest to
    its location plus the part's mean offset, for every part it predicts.
    Votes landing off the grid are dropped.
    """
    locations = np.asarray(locations, dtype=np.float64).reshape(-1, 2)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(scores)):
        raise ValueError("detection scores must be finite")
    n_parts = len(aux.predictive)
    out = np.zeros((n_parts,) + geometry.shape)
    keep = scores > threshold
    loc, w = locations[keep], np.maximum(scores[keep], 0.0)
    for part in range(n_parts):
        if not aux.predictive[part] or w.size == 0:
            continue
        target = loc + aux.mean_offsets[part][None, :]
        r, c = geometry.nearest_cell(target[:, 0], target[:, 1])
        inside = geometry.contains(r, c)
        np.add.at(out[part], (r[inside], c[inside]), w[inside])
    return out


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def smooth_votes(votes: np.ndarray, sigma_px: float, stride: int) -> np.ndarray:
    if sigma_px <= 0:
        return np.asarray(votes, dtype=np.float64)
    return ndimage.gaussian_filter(np.asarray(votes, dtype=np.float64), sigma_px / stride,
                                   mode="constant", cval=0.0)


def fuse(unary, votes, lam: float, sigma_px: float = 0.0, stride: int = 1) -> np.ndarray:
    """(1 - lam) * normalize(unary) + lam * normalize(smoothed votes)."""
    u = np.asarray(getattr(unary, "scores", unary), dtype=np.float64)
    v = np.asarray(votes, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"unary {u.shape} and vote {v.shape} grids differ")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    fused = (1.0 - lam) * minmax_normalize(u)
    if lam > 0.0:
        fused = fused + lam * minmax_normalize(smooth_votes(v, sigma_px, stride))
    return fused


def vote_sigmas(aux_parts: Sequence[AuxiliaryPart], n_parts: int = N_PARTS, floor: float = 2.0) -> np.ndarray:
    """Per-part smoothing width: mean disagreement over that part's predictive clusters, floored."""
    out = np.full(n_parts, floor)
    for part in range(n_parts):
        d = [a.disagreements[part] for a in aux_parts if a.predictive[part]]
        if d:
            out[part] = max(float(np.mean(d)), floor)
    return out


def log_likelihood(fused: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    return np.log(np.maximum(fused, eps))
