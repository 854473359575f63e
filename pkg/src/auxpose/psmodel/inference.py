"""Exact MAP inference in tree-structured models by max-product with distance transforms."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..classifiers import GridGeometry
from .gdt import gdt_quadratic_2d
from .model import PoseEstimate, PsComponent


def _check_grids(unaries: Sequence[np.ndarray]) -> tuple:
    shape = np.shape(unaries[0])
    for u in unaries:
        if np.shape(u) != shape or len(shape) != 2:
            raise ValueError("unary maps must share one 2D grid")
    return shape


def infer_ps(component: PsComponent, unaries: Sequence[np.ndarray], geometry: GridGeometry) -> tuple:
    """MAP configuration of one component.

    ``unaries[i]`` are log-likelihoods of part i on the grid. Pairwise terms
    are the component's Gaussian log-densities (normalizers dropped). Returns
    ``(PoseEstimate, log_score)``; cells tie toward the smaller row-major index.
    """
    tree = component.tree
    if len(unaries) != tree.n_parts:
        raise ValueError(f"expected {tree.n_parts} unary maps, got {len(unaries)}")
    unaries = [np.asarray(getattr(u, "scores", u), dtype=np.float64) for u in unaries]
    shape = _check_grids(unaries)
    if shape != geometry.shape:
        raise ValueError(f"unary grid {shape} does not match geometry {geometry.shape}")
    s = float(geometry.stride)

    order = tree.topological_order()
    belief = [u.copy() for u in unaries]
    back = {}
    for child in reversed(order[1:]):
        term = component.term_for(child)
        ax = s * s / (2.0 * term.variance[0])
        ay = s * s / (2.0 * term.variance[1])
        msg, arg_y, arg_x = gdt_quadratic_2d(belief[child], ax, ay,
                                             -term.mean[0] / s, -term.mean[1] / s)
        back[child] = (arg_y, arg_x)
        belief[term.parent] = belief[term.parent] + msg

    root = tree.root
    flat = int(np.argmax(belief[root]))
    score = float(belief[root].flat[flat])
    cells = np.zeros((tree.n_parts, 2), dtype=np.int64)
    cells[root] = np.unravel_index(flat, shape)
    for child in order[1:]:
        pr, pc = cells[tree.parents[child]]
        arg_y, arg_x = back[child]
        r = arg_y[pr, pc]
        cells[child] = (r, arg_x[r, pc])
    xs, ys = geometry.pixel(cells[:, 0], cells[:, 1])
    return PoseEstimate(np.stack([xs, ys], axis=1).astype(np.float64), 0, score), score


def configuration_score(component: PsComponent, unaries: Sequence[np.ndarray], cells,
                        geometry: GridGeometry) -> float:
    """Log-score of an explicit configuration given as (row, col) per part."""
    cells = np.asarray(cells)
    total = 0.0
    for i, u in enumerate(unaries):
        total += float(np.asarray(getattr(u, "scores", u))[cells[i, 0], cells[i, 1]])
    xs, ys = geometry.pixel(cells[:, 0], cells[:, 1])
    xy = np.stack([xs, ys], axis=1).astype(np.float64)
    for term in component.terms:
        total += float(term.log_prob(xy[term.parent], xy[term.child]))
    return total


def infer_mps(components: Sequence[PsComponent], unaries_per_component: Sequence[Sequence[np.ndarray]],
              geometry: GridGeometry) -> PoseEstimate:
    """Best MAP estimate over all components; ties go to the lowest component index."""
    if len(components) != len(unaries_per_component):
        raise ValueError("need one set of unaries per component")
    best = None
    for k, (comp, unaries) in enumerate(zip(components, unaries_per_component)):
        est, score = infer_ps(comp, unaries, geometry)
        if best is None or score > best.score:
            best = PoseEstimate(est.locations, k, score)
    return best
