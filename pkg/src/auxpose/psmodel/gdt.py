"""Generalized distance transform for quadratic costs (max-plus form).

``out[q] = max_p scores[p] - a * (q - offset - p)**2`` computed from the
upper envelope of parabolas in linear time. Ties go to the smaller ``p``.
"""
from __future__ import annotations

import math

import numpy as np

_NEG_INF = -math.inf


def _envelope_1d(f: list, a: float, offset: float, n: int):
    out = [_NEG_INF] * n
    arg = [0] * n
    if a == 0.0:
        best = max(range(len(f)), key=lambda p: (f[p], -p))
        return [f[best]] * n, [best] * n
    v = []  # parabola positions on the envelope
    z = []  # left boundary of each parabola's region
    for p, fp in enumerate(f):
        if fp == _NEG_INF:
            continue
        s = _NEG_INF
        while v:
            r = v[-1]
            s = 0.5 * (p + r) - (fp - f[r]) / (2.0 * a * (p - r))
            if s <= z[-1]:
                v.pop()
                z.pop()
                s = _NEG_INF
            else:
                break
        v.append(p)
        z.append(s if len(v) > 1 else _NEG_INF)
    if not v:
        return out, arg
    k = 0
    last = len(v) - 1
    for q in range(n):
        x = q - offset
        while k < last and z[k + 1] < x:
            k += 1
        p = v[k]
        out[q] = f[p] - a * (x - p) ** 2
        arg[q] = p
    return out, arg


def gdt_quadratic(scores, a: float, offset: float = 0.0) -> tuple:
    """1D transform of ``scores`` with curvature ``a`` > 0; returns (values, argmax indices)."""
    if a < 0:
        raise ValueError("curvature a must be positive")
    f = [float(v) for v in np.asarray(scores, dtype=np.float64).ravel()]
    out, arg = _envelope_1d(f, float(a), float(offset), len(f))
    return np.array(out), np.array(arg, dtype=np.int64)


def gdt_quadratic_2d(scores: np.ndarray, ax: float, ay: float, offset_x: float = 0.0,
                     offset_y: float = 0.0) -> tuple:
    """Separable 2D transform: a pass along x for every row, then along y for every column.

    Returns ``(values, arg_y, arg_x)``. For target cell (r, c) the maximizing
    source is ``(arg_y[r, c], arg_x[arg_y[r, c], c])``.
    """
    f = np.asarray(scores, dtype=np.float64)
    rows, cols = f.shape
    tmp = np.empty_like(f)
    arg_x = np.empty(f.shape, dtype=np.int64)
    for r in range(rows):
        o, g = _envelope_1d(f[r].tolist(), float(ax), float(offset_x), cols)
        tmp[r] = o
        arg_x[r] = g
    out = np.empty_like(f)
    arg_y = np.empty(f.shape, dtype=np.int64)
    tmp_t = tmp.T
    for c in range(cols):
        o, g = _envelope_1d(tmp_t[c].tolist(), float(ay), float(offset_y), rows)
        out[:, c] = o
        arg_y[:, c] = g
    return out, arg_y, arg_x
