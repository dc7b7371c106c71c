"""Structural features of a binary mask: area, background, enclosed holes.

Connected components are labeled with a deterministic two-pass union-find
scan over row runs; label IDs follow raster-scan first-encounter order so
repeated runs produce identical label maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError

FEATURE_NAMES = ("foreground", "background", "holes")


@dataclass(frozen=True)
class FeatureVector:
    """Per-image structural measurements."""

    foreground: int
    background: int
    holes: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.foreground, self.background, self.holes)


def foreground_count(mask: np.ndarray) -> int:
    """Number of True pixels (cell area)."""
    return int(np.count_nonzero(mask))


def background_count(mask: np.ndarray) -> int:
    """Number of False pixels; complement of the foreground count."""
    return int(mask.size - np.count_nonzero(mask))


def _row_runs(tgt: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Maximal horizontal runs of True pixels, in raster order.

    Returns (row, start, end) arrays with end exclusive. Computed in one
    numpy pass by flattening with a separator column so runs never straddle
    row boundaries.
    """
    h, w = tgt.shape
    padded = np.zeros((h, w + 1), dtype=bool)
    padded[:, :w] = tgt
    flat = padded.ravel()
    edges = np.diff(flat.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1
    if flat[0]:
        starts = np.concatenate([[0], starts])
    rows = starts // (w + 1)
    return rows, starts - rows * (w + 1), ends - rows * (w + 1)


def label_components(mask: np.ndarray, target: str = "foreground", connectivity: int = 8) -> np.ndarray:
    """Label connected components of one pixel class.

    Returns an int32 map where pixels of the target class carry component
    IDs 1..K (raster-scan first-encounter order) and all other pixels are 0.
    Two-pass union-find over row runs: the first scan links each run to
    overlapping runs of the previous row (ranges dilated by one column for
    8-connectivity) and records equivalences; the second pass resolves roots
    and renumbers in first-encounter order.
    """
    if target not in ("foreground", "background"):
        raise ValueError(f"target must be 'foreground' or 'background', got {target!r}")
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    tgt = np.asarray(mask, dtype=bool)
    if target == "background":
        tgt = ~tgt
    h, w = tgt.shape
    rows, starts, ends = _row_runs(tgt)
    n_runs = rows.size
    out = np.zeros((h, w), dtype=np.int32)
    if n_runs == 0:
        return out

    rows_l = rows.tolist()
    starts_l = starts.tolist()
    ends_l = ends.tolist()
    reach = 0 if connectivity == 4 else 1  # column dilation for diagonal adjacency

    parent = list(range(n_runs))

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # path compression
            parent[x], x = root, parent[x]
        return root

    prev_first = 0  # index of the first run of the previous row
    prev_last = 0   # one past the last run of the previous row
    row_first = 0
    current_row = rows_l[0]
    for i in range(n_runs):
        r = rows_l[i]
        if r != current_row:
            if r == current_row + 1:
                prev_first, prev_last = row_first, i
            else:  # blank row gap: nothing to link against
                prev_first, prev_last = i, i
            row_first = i
            current_row = r
        s = starts_l[i] - reach
        e = ends_l[i] + reach
        for j in range(prev_first, prev_last):
            if starts_l[j] < e and s < ends_l[j]:
                ra, rb = find(i), find(j)
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb

    remap: dict[int, int] = {}
    next_id = 1
    for i in range(n_runs):
        root = find(i)
        lab = remap.get(root)
        if lab is None:
            lab = next_id
            remap[root] = lab
            next_id += 1
        out[rows_l[i], starts_l[i]:ends_l[i]] = lab
    return out


def count_holes(mask: np.ndarray, connectivity: int = 8) -> int:
    """Background components fully enclosed by foreground.

    Labels the background, discards every component with a pixel on the
    image border, and counts the remainder.
    """
    labels = label_components(mask, target="background", connectivity=connectivity)
    n_components = int(labels.max())
    if n_components == 0:
        return 0
    border = np.concatenate([labels[0, :], labels[-1, :], labels[1:-1, 0], labels[1:-1, -1]])
    border_ids = np.unique(border)
    n_border = int(np.count_nonzero(border_ids))
    return n_components - n_border


def extract_features(mask: np.ndarray, connectivity: int = 8) -> FeatureVector:
    """Bundle the three structural counts for one mask."""
    return FeatureVector(
        foreground=foreground_count(mask),
        background=background_count(mask),
        holes=count_holes(mask, connectivity=connectivity),
    )


def feature_statistics(vectors: list[FeatureVector]) -> dict[str, dict[str, float]]:
    """Population mean/std/min/max per feature over a list of vectors."""
    if not vectors:
        raise EmptyInputError("feature_statistics needs at least one vector")
    data = np.array([v.as_tuple() for v in vectors], dtype=np.float64)
    stats = {}
    for j, name in enumerate(FEATURE_NAMES):
        col = data[:, j]
        stats[name] = {
            "mean": float(col.mean()),
            "std": float(col.std()),  # population denominator
            "min": float(col.min()),
            "max": float(col.max()),
        }
    return stats
