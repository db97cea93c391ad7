"""Composite tensor Gauss-Legendre rules on axis-aligned cell arrangements."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

import numpy as np


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def partition(lo: float, hi: float, breakpoints: Iterable[float] = (),
              max_width: float = math.inf) -> List[Tuple[float, float]]:
    """Split ``[lo, hi]`` at the given breakpoints, then into pieces of at most ``max_width``."""
    if not hi > lo:
        return []
    cuts = sorted({float(lo), float(hi)} | {float(b) for b in breakpoints if lo < b < hi})
    cells = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        pieces = 1 if not math.isfinite(max_width) else max(1, int(math.ceil((b - a) / max_width)))
        edges = np.linspace(a, b, pieces + 1)
        cells.extend((float(edges[i]), float(edges[i + 1])) for i in range(pieces))
    return cells


def axis_rule(cells: Sequence[Tuple[float, float]], n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Concatenated nodes and weights of an n-point rule on each cell."""
    if not cells:
        return np.empty(0), np.empty(0)
    x, w = gauss_legendre(n)
    a = np.array([c[0] for c in cells])[:, None]
    b = np.array([c[1] for c in cells])[:, None]
    half = 0.5 * (b - a)
    pts = (0.5 * (a + b) + half * x[None, :]).ravel()
    wts = (half * w[None, :]).ravel()
    return pts, wts


def tensor_grid(axes_pts: Sequence[np.ndarray]) -> np.ndarray:
    """All tensor-product points as an ``(n, d)`` array, last axis fastest."""
    mesh = np.meshgrid(*axes_pts, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def tensor_weights(axes_wts: Sequence[np.ndarray]) -> np.ndarray:
    w = np.ones(1)
    for aw in axes_wts:
        w = np.outer(w, aw).ravel()
    return w
