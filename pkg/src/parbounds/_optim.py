"""Deterministic derivative-free box search: coarse grid + golden refinement.

Shared by the bound modules.  Objectives may return +inf for degenerate
parameter combinations; the search simply avoids them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class BoxResult:
    x: tuple
    value: float
    boundary: bool
    evals: int


def golden_min(f, a: float, b: float, iters: int):
    """Golden-section minimum of f on [a, b] with a fixed iteration count."""
    if b <= a:
        return a, f(a)
    c = b - _PHI * (b - a)
    d = a + _PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def minimize_box(objective, grids, bounds, seed=None, anchors=(), skeleton=(),
                 seed_offsets=None, refine_rounds=3, golden_iters=24) -> BoxResult:
    """Minimize ``objective(*x)`` over a box.

    ``grids`` is one value tuple per dimension for the coarse pass; with a
    ``seed``, a local stencil around it plus the sparse global ``skeleton``
    (which guards against a poisoned seed) is scanned instead.  ``anchors``
    are always evaluated.  Refinement runs coordinate-wise golden sections
    in shrinking windows.  Fully deterministic for fixed inputs.
    """
    dim = len(grids)
    cache = {}
    evals = [0]

    def f(x):
        if x not in cache:
            evals[0] += 1
            v = objective(*x)
            cache[x] = v if not math.isnan(v) else math.inf
        return cache[x]

    def clip(i, v):
        lo, hi = bounds[i]
        return min(max(v, lo), hi)

    candidates = set(tuple(a) for a in anchors)
    if seed is None:
        def build(i, prefix):
            if i == dim:
                candidates.add(tuple(prefix))
                return
            for v in grids[i]:
                build(i + 1, prefix + [clip(i, v)])
        build(0, [])
        spans = [
            max((g[j + 1] - g[j] for j in range(len(g) - 1)), default=0.1)
            for g in grids
        ]
    else:
        candidates.update(tuple(p) for p in skeleton)
        offsets = seed_offsets or [(-0.1, -0.03, 0.0, 0.03, 0.1)] * dim
        def build(i, prefix):
            if i == dim:
                candidates.add(tuple(prefix))
                return
            for off in offsets[i]:
                build(i + 1, prefix + [clip(i, seed[i] + off)])
        build(0, [])
        spans = [max(o) - min(o) for o in (seed_offsets or [(-0.1, 0.1)] * dim)]

    best = min(sorted(candidates), key=f)
    best_val = f(best)

    for rnd in range(refine_rounds):
        for i in range(dim):
            span = spans[i] / (2.0 ** rnd)
            lo, hi = bounds[i]
            a = max(lo, best[i] - span)
            b = min(hi, best[i] + span)

            def f1d(v, i=i):
                x = best[:i] + (v,) + best[i + 1:]
                return f(x)

            x_i, v_i = golden_min(f1d, a, b, golden_iters)
            if v_i < best_val:
                best = best[:i] + (x_i,) + best[i + 1:]
                best_val = v_i

    eps = 1e-9
    boundary = any(
        abs(best[i] - bounds[i][0]) < eps or abs(best[i] - bounds[i][1]) < eps
        for i in range(dim)
    )
    return BoxResult(best, best_val, boundary, evals[0])
