"""Random forest of axis-aligned decision trees, trained from scratch.

Each tree trains on a seeded bootstrap resample; splits are chosen by the
best impurity decrease over an exhaustive scan of midpoints between sorted
unique values of a random feature subset. Ties go to the lowest feature
index, then the lowest threshold. Per-tree seeds are seed + tree_index so
any parallel construction would match sequential output exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonBinaryLabelsError

CRITERIA = ("gini", "entropy")
MAX_FEATURES_MODES = ("sqrt", "log2")


@dataclass(frozen=True)
class TreeNodes:
    """Flat node arrays; feature == -1 marks a leaf. Root is node 0."""

    feature: np.ndarray    # int8
    threshold: np.ndarray  # float64, 0 for leaves
    left: np.ndarray       # int32, 0 for leaves
    right: np.ndarray      # int32, 0 for leaves
    count0: np.ndarray     # int64 class counts at leaves, 0 for internal
    count1: np.ndarray     # int64

    def __len__(self) -> int:
        return self.feature.size


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[TreeNodes, ...]
    n_estimators: int
    max_depth: int | None
    min_samples_split: int
    min_samples_leaf: int
    max_features: str
    criterion: str
    seed: int
    n_features: int = 2

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority vote over trees (tie votes resolve to Uninfected)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] == 1:
            votes = np.array([sum(_tree_class_scalar(t, X[0]) for t in self.trees)])
        else:
            votes = np.zeros(X.shape[0], dtype=np.int64)
            for tree in self.trees:
                votes += _tree_class_batch(tree, X)
        return (2 * votes > len(self.trees)).astype(np.int8)


def _impurity(n0, n1, criterion: str):
    """Impurity from class counts; works elementwise on arrays."""
    n = n0 + n1
    p0 = np.divide(n0, n, out=np.zeros_like(np.asarray(n, dtype=np.float64)), where=n > 0)
    p1 = 1.0 - p0
    if criterion == "gini":
        return 1.0 - p0 * p0 - p1 * p1
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(p0 > 0, p0 * np.log2(p0, where=p0 > 0), 0.0)
        t1 = np.where(p1 > 0, p1 * np.log2(p1, where=p1 > 0), 0.0)
    return -(t0 + t1)


def _best_split(X, y, idx, feats, min_leaf, criterion):
    """Best (feature, threshold, decrease) at a node, or None."""
    n = idx.size
    yv = y[idx]
    total1 = int(yv.sum())
    total0 = n - total1
    imp_parent = float(_impurity(np.float64(total0), np.float64(total1), criterion))
    best = None
    best_dec = 1e-12  # require a strictly positive decrease
    for f in feats:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = yv[order]
        cut = np.flatnonzero(xs[1:] != xs[:-1])  # split after these positions
        if cut.size == 0:
            continue
        cum1 = np.cumsum(ys)
        nL = (cut + 1).astype(np.float64)
        n1L = cum1[cut].astype(np.float64)
        n0L = nL - n1L
        nR = n - nL
        n1R = total1 - n1L
        n0R = nR - n1R
        ok = (nL >= min_leaf) & (nR >= min_leaf)
        if not ok.any():
            continue
        weighted = (nL * _impurity(n0L, n1L, criterion) + nR * _impurity(n0R, n1R, criterion)) / n
        dec = imp_parent - weighted
        dec[~ok] = -np.inf
        j = int(np.argmax(dec))  # first max = lowest threshold
        if dec[j] > best_dec:
            best_dec = float(dec[j])
            thr = float((xs[cut[j]] + xs[cut[j] + 1]) / 2.0)
            best = (int(f), thr, best_dec)
    return best


def _grow_tree(X, y, idx, rng, max_depth, min_split, min_leaf, n_subset, criterion) -> TreeNodes:
    n_features = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    count0: list[int] = []
    count1: list[int] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(0)
        right.append(0)
        count0.append(0)
        count1.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, idx, 0)]
    while stack:
        nid, node_idx, depth = stack.pop()
        n1 = int(y[node_idx].sum())
        n0 = node_idx.size - n1
        split = None
        depth_ok = max_depth is None or depth < max_depth
        if depth_ok and node_idx.size >= min_split and 0 < n1 < node_idx.size:
            feats = rng.choice(n_features, size=n_subset, replace=False)
            feats.sort()  # ascending order backs the lowest-feature tie rule
            split = _best_split(X, y, node_idx, feats, min_leaf, criterion)
        if split is None:
            count0[nid] = n0
            count1[nid] = n1
            continue
        f, thr, _ = split
        go_left = X[node_idx, f] <= thr
        lid = new_node()
        rid = new_node()
        feature[nid] = f
        threshold[nid] = thr
        left[nid] = lid
        right[nid] = rid
        # right first so the left child pops first (raster-ish determinism)
        stack.append((rid, node_idx[~go_left], depth + 1))
        stack.append((lid, node_idx[go_left], depth + 1))

    return TreeNodes(
        feature=np.array(feature, dtype=np.int8),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        count0=np.array(count0, dtype=np.int64),
        count1=np.array(count1, dtype=np.int64),
    )


def _tree_class_batch(tree: TreeNodes, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        f = tree.feature[node]
        active = np.flatnonzero(f >= 0)
        if active.size == 0:
            break
        cur = node[active]
        go_left = X[active, f[active]] <= tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
    return (tree.count1[node] > tree.count0[node]).astype(np.int64)


def _tree_class_scalar(tree: TreeNodes, x: np.ndarray) -> int:
    nid = 0
    feature = tree.feature
    while feature[nid] >= 0:
        if x[feature[nid]] <= tree.threshold[nid]:
            nid = int(tree.left[nid])
        else:
            nid = int(tree.right[nid])
    return int(tree.count1[nid] > tree.count0[nid])


def _subset_size(max_features: str, n_features: int) -> int:
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(n_features))))
    if max_features == "log2":
        return max(1, int(math.floor(math.log2(n_features))))
    raise ValueError(f"max_features must be one of {MAX_FEATURES_MODES}, got {max_features!r}")


def train_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    max_features: str = "sqrt",
    criterion: str = "gini",
    seed: int = 0,
) -> RandomForestModel:
    """Fit on raw (unstandardized) features; trees are scale-invariant."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    values = np.unique(y)
    if values.size > 2 or not np.all(np.isin(values, (0, 1))):
        raise NonBinaryLabelsError(f"labels must be in {{0, 1}}, got values {values}")
    y = y.astype(np.int64)
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    n = X.shape[0]
    if n < min_samples_split:
        raise ValueError(f"need at least min_samples_split={min_samples_split} rows, got {n}")
    n_subset = _subset_size(max_features, X.shape[1])
    trees = []
    for i in range(n_estimators):
        rng = np.random.default_rng(seed + i)
        boot = rng.integers(0, n, size=n)
        trees.append(
            _grow_tree(X, y, boot, rng, max_depth, min_samples_split, min_samples_leaf, n_subset, criterion)
        )
    return RandomForestModel(
        trees=tuple(trees),
        n_estimators=n_estimators,
        max_depth=max_depth,
        min_samples_split=min_samples_split,
        min_samples_leaf=min_samples_leaf,
        max_features=max_features,
        criterion=criterion,
        seed=seed,
        n_features=X.shape[1],
    )
