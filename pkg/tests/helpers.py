"""Independent reference implementations the tests compare against.

Everything here is deliberately naive (pixel BFS, exhaustive scans,
two-pass statistics) and shares no code with the package internals.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

import numpy as np

OFFSETS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
OFFSETS_8 = OFFSETS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def flood_components(mask: np.ndarray, connectivity: int) -> np.ndarray:
    """BFS labeling; labels assigned in raster order of first pixel, from 1."""
    offsets = OFFSETS_8 if connectivity == 8 else OFFSETS_4
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    nxt = 0
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or labels[r, c]:
                continue
            nxt += 1
            queue = deque([(r, c)])
            labels[r, c] = nxt
            while queue:
                y, x = queue.popleft()
                for dy, dx in offsets:
                    ny, nx_ = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx_ < w and mask[ny, nx_] and not labels[ny, nx_]:
                        labels[ny, nx_] = nxt
                        queue.append((ny, nx_))
    return labels


def flood_count_holes(mask: np.ndarray, connectivity: int) -> int:
    """Background components that never touch the image border."""
    bg = flood_components(~np.asarray(mask, dtype=bool), connectivity)
    if bg.max() == 0:
        return 0
    border = set(bg[0, :]) | set(bg[-1, :]) | set(bg[:, 0]) | set(bg[:, -1])
    border.discard(0)
    return int(bg.max() - len(border))


def brute_otsu_bin(hist) -> int:
    """Exhaustive between-class-variance maximization in exact rationals;
    lowest index wins ties. Cuts leaving a side empty are inadmissible."""
    h = [int(v) for v in hist]
    total = sum(h)
    best_k, best_v = None, Fraction(-1)
    for k in range(len(h) - 1):
        w0 = sum(h[: k + 1])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = Fraction(sum(i * h[i] for i in range(k + 1)), w0)
        mu1 = Fraction(sum(i * h[i] for i in range(k + 1, len(h))), w1)
        v = Fraction(w0 * w1, total * total) * (mu0 - mu1) ** 2
        if v > best_v:
            best_k, best_v = k, v
    return best_k


def naive_pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    am, bm = a - a.mean(), b - b.mean()
    return float((am * bm).sum() / np.sqrt((am * am).sum() * (bm * bm).sum()))


_METRIC_FNS = {
    "euclidean": lambda d: np.sqrt((d ** 2).sum()),
    "manhattan": lambda d: np.abs(d).sum(),
    "chebyshev": lambda d: np.abs(d).max(),
    "minkowski_p1": lambda d: np.abs(d).sum(),
    "minkowski_p2": lambda d: np.sqrt((d ** 2).sum()),
    "minkowski_p3": lambda d: (np.abs(d) ** 3).sum() ** (1.0 / 3.0),
}


def naive_knn_predict(train, labels, query, k: int, metric: str) -> int:
    """Full sort per query; distance ties broken by lower training index."""
    fn = _METRIC_FNS[metric]
    dists = [(fn(np.asarray(t) - np.asarray(query)), i) for i, t in enumerate(train)]
    dists.sort()
    votes = [int(labels[i]) for _, i in dists[:k]]
    ones = sum(votes)
    return 1 if ones > k - ones else 0


def gini(y) -> float:
    y = np.asarray(y)
    if y.size == 0:
        return 0.0
    p1 = float(np.mean(y))
    return 1.0 - p1 * p1 - (1.0 - p1) ** 2


def best_stump(x, y, min_leaf: int = 1):
    """Exhaustive best single split of one feature by Gini decrease.

    Returns (threshold, decrease) with thresholds at midpoints of adjacent
    distinct values; lowest threshold wins ties. None when nothing
    admissible improves purity.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    parent = gini(y)
    values = np.unique(x)
    best = None
    for lo, hi in zip(values[:-1], values[1:]):
        t = (lo + hi) / 2.0
        left = y[x <= t]
        right = y[x > t]
        if left.size < min_leaf or right.size < min_leaf:
            continue
        score = parent - (left.size * gini(left) + right.size * gini(right)) / y.size
        if score > 1e-12 and (best is None or score > best[1] + 1e-15):
            best = (t, score)
    return best


def random_mask(rng: np.random.Generator, shape, density: float) -> np.ndarray:
    return rng.random(shape) < density
