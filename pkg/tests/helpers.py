"""Shared fixture builders for the test suite."""
import itertools

import numpy as np
from scipy import ndimage

from auxpose.clustering import PatchPool
from auxpose.features import build_dictionary, dense_sift_batch
from auxpose.features.bow import bow_pyramid_batch
from auxpose.features.sift import grid_positions


def texture(rng, shape=(64, 64), sigma=2.0):
    t = ndimage.gaussian_filter(rng.uniform(size=shape), sigma)
    return (t - t.min()) / (t.max() - t.min())


def pool_from_patches(patches, offsets, k=40, seed=0):
    sift = dense_sift_batch(np.asarray(patches))
    flat = sift.reshape(-1, sift.shape[-1])
    rng = np.random.default_rng(seed)
    sample = flat[rng.choice(flat.shape[0], size=min(4000, flat.shape[0]), replace=False)]
    d = build_dictionary(sample, k, seed=seed, max_iter=30)
    bow = bow_pyramid_batch(sift, grid_positions(4), d)
    return PatchPool(bow, sift, np.asarray(offsets, dtype=np.float64))


def planted_pool(seed=0, per_group=25, noise=0.03, n_parts=4):
    """Two visually distinct groups whose offsets to every part differ by tens of pixels."""
    rng = np.random.default_rng(seed)
    bases = [texture(rng), texture(rng, sigma=3.0)]
    means = [rng.uniform(-40, 40, size=(n_parts, 2)) for _ in range(2)]
    means[1] = means[0] + 30.0
    patches, offsets, labels = [], [], []
    for g in range(2):
        for _ in range(per_group):
            patches.append(np.clip(bases[g] + rng.normal(0, noise, (64, 64)), 0, 1))
            offsets.append(means[g] + rng.normal(0, 1.0, (n_parts, 2)))
            labels.append(g)
    order = rng.permutation(len(labels))
    pool = pool_from_patches(np.array(patches)[order], np.array(offsets)[order], seed=seed)
    return pool, np.array(labels)[order]


def net_similarity(S, exemplars):
    ex = list(exemplars)
    total = 0.0
    for i in range(S.shape[0]):
        total += S[i, i] if i in ex else max(S[i, e] for e in ex)
    return total


def exhaustive_exemplars(S):
    """Exemplar set maximizing net similarity (preferences on the diagonal), by enumeration."""
    n = S.shape[0]
    best, best_val = None, -np.inf
    for r in range(1, n + 1):
        for ex in itertools.combinations(range(n), r):
            v = net_similarity(S, ex)
            if v > best_val + 1e-12:
                best, best_val = ex, v
    return best


def partition(labels):
    groups = {}
    for i, l in enumerate(np.asarray(labels).tolist()):
        groups.setdefault(l, []).append(i)
    return sorted(tuple(g) for g in groups.values())


def gdt_brute(scores, a, offset):
    """O(n^2) max-plus transform; ties go to the smaller source index."""
    f = [float(v) for v in scores]
    n = len(f)
    out, arg = [], []
    for q in range(n):
        x = q - offset
        best, best_p = -np.inf, 0
        for p in range(n):
            v = f[p] - a * (x - p) ** 2
            if v > best:
                best, best_p = v, p
        out.append(best)
        arg.append(best_p)
    return np.array(out), np.array(arg)


def random_component(rng, n_parts, kind, spread=20.0):
    from auxpose.psmodel import PsComponent, SpatialTerm, Tree
    tree = Tree.star(int(rng.integers(n_parts)), n_parts) if kind == "star" else Tree.chain(n_parts)
    terms = tuple(SpatialTerm(p, c, tuple(rng.uniform(-spread, spread, 2)), tuple(rng.uniform(4.0, 200.0, 2)))
                  for p, c in tree.edges)
    return PsComponent(tree, terms)


def brute_force_map(component, unaries, geometry):
    """Exhaustive enumeration of every joint configuration; returns (cells (n, 2), score)."""
    n = component.tree.n_parts
    rows, cols = geometry.shape
    cells = rows * cols
    r, c = np.divmod(np.arange(cells), cols)
    xs, ys = geometry.pixel(r, c)
    xy = np.stack([xs, ys], axis=1).astype(np.float64)
    total = np.zeros((cells,) * n)
    for i, u in enumerate(unaries):
        shape = [1] * n
        shape[i] = cells
        total = total + np.asarray(u, dtype=np.float64).reshape(shape)
    for t in component.terms:
        pair = t.log_prob(xy[:, None, :], xy[None, :, :])  # [parent cell, child cell]
        shape = [1] * n
        shape[t.parent] = cells
        shape[t.child] = cells
        if t.parent > t.child:
            pair = pair.T
        total = total + pair.reshape(shape)
    flat = int(np.argmax(total))
    idx = np.unravel_index(flat, total.shape)
    return np.array([[k // cols, k % cols] for k in idx]), float(total.flat[flat])


def two_pass_statistics(offsets):
    """Per part: mean offset by accumulate-and-divide, then mean Euclidean deviation from it."""
    off = np.asarray(offsets, dtype=np.float64)
    k, n_parts = off.shape[0], off.shape[1]
    means, dis = [], []
    for i in range(n_parts):
        sx = sy = 0.0
        for m in range(k):
            sx += off[m, i, 0]
            sy += off[m, i, 1]
        mx, my = sx / k, sy / k
        total = 0.0
        for m in range(k):
            total += ((off[m, i, 0] - mx) ** 2 + (off[m, i, 1] - my) ** 2) ** 0.5
        means.append((mx, my))
        dis.append(total / k)
    return np.array(means), np.array(dis)


# one (criterion, passed, detail) entry per acceptance check, printed in the terminal summary
ACCEPTANCE = []


def report(number, title, passed, detail=""):
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    line = f"criterion {number:>2} {status}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE.append((number, line))
    print(line)
    return passed
