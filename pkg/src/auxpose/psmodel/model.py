"""Mixture-of-pictorial-structures model types, spatial-term learning and appearance sharing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..core import N_PARTS, PARTS

log = logging.getLogger(__name__)

ABDOMEN_TIP = PARTS.index("abdomen_tip")


class ConfigurationError(ValueError):
    """A model cannot be assembled from the given pieces."""


@dataclass(frozen=True)
class Tree:
    """Rooted tree over ``n_parts`` nodes; ``parents[root] == -1``."""
    parents: tuple

    def __post_init__(self):
        parents = tuple(int(p) for p in self.parents)
        object.__setattr__(self, "parents", parents)
        roots = [i for i, p in enumerate(parents) if p == -1]
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        for i in range(len(parents)):
            seen, j = set(), i
            while j != -1:
                if j in seen or not -1 <= parents[j] < len(parents):
                    raise ValueError("parent array does not describe a tree")
                seen.add(j)
                j = parents[j]

    @property
    def n_parts(self) -> int:
        return len(self.parents)

    @property
    def root(self) -> int:
        return self.parents.index(-1)

    @property
    def edges(self) -> list:
        return [(p, c) for c, p in enumerate(self.parents) if p != -1]

    def children(self, node: int) -> list:
        return [c for c, p in enumerate(self.parents) if p == node]

    def topological_order(self) -> list:
        """Root first, every parent before its children."""
        order, frontier = [], [self.root]
        while frontier:
            node = frontier.pop(0)
            order.append(node)
            frontier.extend(self.children(node))
        return order

    @classmethod
    def star(cls, root: int = ABDOMEN_TIP, n_parts: int = N_PARTS) -> "Tree":
        return cls(tuple(-1 if i == root else root for i in range(n_parts)))

    @classmethod
    def chain(cls, n_parts: int) -> "Tree":
        return cls(tuple(i - 1 for i in range(n_parts)))


@dataclass(frozen=True)
class SpatialTerm:
    parent: int
    child: int
    mean: tuple      # child minus parent (dx, dy) in pixels
    variance: tuple  # (var_x, var_y) in pixels^2

    def __post_init__(self):
        if min(self.variance) <= 0:
            raise ValueError("spatial variances must be positive")
        object.__setattr__(self, "mean", (float(self.mean[0]), float(self.mean[1])))
        object.__setattr__(self, "variance", (float(self.variance[0]), float(self.variance[1])))

    def log_prob(self, parent_xy, child_xy) -> np.ndarray:
        """Gaussian log-density up to its normalizing constant."""
        d = np.asarray(child_xy, dtype=np.float64) - np.asarray(parent_xy, dtype=np.float64)
        return (-(d[..., 0] - self.mean[0]) ** 2 / (2.0 * self.variance[0])
                - (d[..., 1] - self.mean[1]) ** 2 / (2.0 * self.variance[1]))


@dataclass(frozen=True)
class PsComponent:
    tree: Tree
    terms: tuple              # SpatialTerm per edge, in tree.edges order
    detectors: tuple = ()     # per part: tuple of detector ids

    def __post_init__(self):
        edges = self.tree.edges
        if [(t.parent, t.child) for t in self.terms] != edges:
            raise ValueError("spatial terms must match the tree edges in order")
        if self.detectors:
            if len(self.detectors) != self.tree.n_parts:
                raise ValueError("need one detector list per part")
            for part, ids in enumerate(self.detectors):
                if not ids:
                    raise ConfigurationError(f"part {part} has no appearance detector")
            object.__setattr__(self, "detectors", tuple(tuple(ids) for ids in self.detectors))

    def term_for(self, child: int) -> SpatialTerm:
        for t in self.terms:
            if t.child == child:
                return t
        raise KeyError(child)


@dataclass(frozen=True, eq=False)
class MpsModel:
    components: tuple
    detectors: Mapping = field(default_factory=dict)  # id -> LdaDetector
    stats: Optional[object] = None                     # WhiteningStats
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.components:
            raise ValueError("a mixture needs at least one component")
        for k, comp in enumerate(self.components):
            for ids in comp.detectors:
                missing = [d for d in ids if d not in self.detectors]
                if missing:
                    raise ConfigurationError(f"component {k} references unknown detectors {missing}")

    @property
    def m(self) -> int:
        return len(self.components)


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    locations: np.ndarray   # (n_parts, 2) pixels
    component: int
    score: float


def learn_spatial_terms(poses, tree: Tree, variance_floor: float = 1.0,
                        default_variance: float = 100.0) -> tuple:
    """Mean and population variance of child-minus-parent offsets per tree edge.

    ``poses`` is (n, n_parts, 2). A single pose gives its own offsets as means
    and ``default_variance`` on both axes.
    """
    p = np.asarray(poses, dtype=np.float64)
    if p.ndim == 2:
        p = p.reshape(p.shape[0], -1, 2)
    if p.shape[0] < 1:
        raise ValueError("need at least one pose")
    terms = []
    for parent, child in tree.edges:
        d = p[:, child] - p[:, parent]
        mean = d.mean(axis=0)
        if p.shape[0] < 2:
            log.warning("singleton pose cluster: using default variance %.1f px^2", default_variance)
            var = np.array([default_variance, default_variance])
        else:
            var = np.maximum(d.var(axis=0), variance_floor)
        terms.append(SpatialTerm(parent, child, tuple(mean), tuple(var)))
    return tuple(terms)


def assign_appearance_sharing(visual_clusters: Sequence[Mapping], pose_clusters: Sequence,
                              n_parts: int = N_PARTS) -> list:
    """Detector ids per component and part.

    ``visual_clusters`` holds one mapping per part, detector id -> image ids of
    its cluster. ``pose_clusters`` holds the image ids of each component. A
    detector is shared with a component iff the id sets intersect.
    """
    if len(visual_clusters) != n_parts:
        raise ValueError(f"need visual clusters for {n_parts} parts")
    out = []
    for k, members in enumerate(pose_clusters):
        members = set(members)
        per_part = []
        for part in range(n_parts):
            ids = tuple(det for det, imgs in visual_clusters[part].items() if members & set(imgs))
            if not ids:
                raise ConfigurationError(f"component {k} has no appearance detector for part {part}")
            per_part.append(ids)
        out.append(tuple(per_part))
    return out


def unary_map(component: PsComponent, part: int, score_maps: Mapping) -> np.ndarray:
    """Per-cell maximum over the part's assigned detectors."""
    ids = component.detectors[part]
    if not ids:
        raise ConfigurationError(f"part {part} has no assigned detectors")
    out = np.array(getattr(score_maps[ids[0]], "scores", score_maps[ids[0]]), dtype=np.float64)
    for det in ids[1:]:
        np.maximum(out, getattr(score_maps[det], "scores", score_maps[det]), out=out)
    return out
