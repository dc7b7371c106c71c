"""Dataset ingestion, feature table persistence, splits, and correlation.

The on-disk layout is `<root>/Parasitized/*.png` and `<root>/Uninfected/*.png`.
Tables are ordered by (class name, lexicographic relative path) so two ingest
runs over the same tree are identical. The feature CSV schema is fixed:
`path,label,foreground,background,holes` with label Parasitized=1.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import MASK_PIXELS
from .errors import (
    AllFilesFailedError,
    ConstantColumnError,
    MissingClassDirError,
    PipelineError,
    SchemaError,
    SingleClassTableError,
    TooFewSamplesError,
)
from .imaging import preprocess_file
from .morphology import FeatureVector, extract_features
from .seeding import derive_rng

CSV_HEADER = ("path", "label", "foreground", "background", "holes")

# (directory name, label value); Parasitized is the positive class.
CLASS_DIRS = (("Parasitized", 1), ("Uninfected", 0))
LABEL_NAMES = {1: "Parasitized", 0: "Uninfected"}

CORRELATION_COLUMNS = ("foreground", "background", "holes", "label")


@dataclass(frozen=True)
class Sample:
    path: str
    label: int
    features: FeatureVector


@dataclass
class FeatureTable:
    """Labeled feature dataset; immutable by convention once built."""

    paths: list[str]
    labels: np.ndarray        # int8, values in {0, 1}
    features: np.ndarray      # int64, columns (foreground, background, holes)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.paths)

    def sample(self, i: int) -> Sample:
        fg, bg, holes = (int(v) for v in self.features[i])
        return Sample(self.paths[i], int(self.labels[i]), FeatureVector(fg, bg, holes))

    def class_counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.labels == value)) for name, value in CLASS_DIRS}


@dataclass(frozen=True)
class SplitAssignment:
    train_indices: np.ndarray
    test_indices: np.ndarray


def _process_one(root: Path, rel: str, polarity: str, connectivity: int):
    mask = preprocess_file(root / rel, polarity)
    return extract_features(mask, connectivity=connectivity)


def ingest(root, polarity: str = "paper", connectivity: int = 8, workers: int = 1) -> FeatureTable:
    """Run the full extraction pipeline over a dataset tree.

    Per-file failures are collected in metadata["failures"] rather than
    aborting the run; AllFilesFailedError is raised only when nothing at all
    could be processed. With workers > 1 the extraction fans out over a
    thread pool; results are merged back in deterministic table order.
    """
    root = Path(root)
    rel_paths: list[str] = []
    file_labels: list[int] = []
    for dirname, label in CLASS_DIRS:
        class_dir = root / dirname
        if not class_dir.is_dir():
            raise MissingClassDirError(f"missing class directory: {class_dir}")
        names = sorted(p.name for p in class_dir.iterdir() if p.suffix.lower() == ".png")
        rel_paths.extend(f"{dirname}/{n}" for n in names)
        file_labels.extend([label] * len(names))
    if not rel_paths:
        raise AllFilesFailedError(f"no PNG files found under {root}")

    def work(rel: str):
        try:
            return _process_one(root, rel, polarity, connectivity)
        except (PipelineError, OSError) as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, rel_paths))
    else:
        results = [work(rel) for rel in rel_paths]

    paths: list[str] = []
    labels: list[int] = []
    rows: list[tuple[int, int, int]] = []
    failures: list[dict] = []
    for rel, label, res in zip(rel_paths, file_labels, results):
        if isinstance(res, Exception):
            failures.append({"path": rel, "error": f"{type(res).__name__}: {res}"})
            continue
        paths.append(rel)
        labels.append(label)
        rows.append(res.as_tuple())
    if not paths:
        raise AllFilesFailedError(f"all {len(rel_paths)} files under {root} failed extraction")

    metadata = {
        "root": str(root),
        "polarity": polarity,
        "connectivity": connectivity,
        "extracted_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "failures": failures,
    }
    return FeatureTable(
        paths=paths,
        labels=np.array(labels, dtype=np.int8),
        features=np.array(rows, dtype=np.int64),
        metadata=metadata,
    )


def stratified_split(labels: np.ndarray, test_fraction: float = 0.2, seed: int = 42) -> SplitAssignment:
    """80/20-style split preserving class proportions.

    Each class is shuffled with its own generator derived from the seed; the
    tail floor(n_class * test_fraction) goes to test. Deterministic for a
    fixed (label order, seed).
    """
    labels = np.asarray(labels)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    classes = np.unique(labels)
    if classes.size < 2:
        raise SingleClassTableError("both classes must be present to split")
    train_parts = []
    test_parts = []
    for value in classes:
        idx = np.flatnonzero(labels == value)
        rng = derive_rng(seed, int(value))
        perm = idx[rng.permutation(idx.size)]
        n_test = int(np.floor(idx.size * test_fraction))
        test_parts.append(perm[idx.size - n_test:])
        train_parts.append(perm[:idx.size - n_test])
    return SplitAssignment(
        train_indices=np.sort(np.concatenate(train_parts)),
        test_indices=np.sort(np.concatenate(test_parts)),
    )


def kfold_indices(labels: np.ndarray, train_indices: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Stratified k folds over the training indices.

    Per-class fold sizes differ by at most one; the folds partition the
    training set and never touch anything outside it.
    """
    labels = np.asarray(labels)
    train_indices = np.asarray(train_indices)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if train_indices.size < k:
        raise TooFewSamplesError(f"{train_indices.size} samples cannot fill {k} folds")
    folds: list[list[np.ndarray]] = [[] for _ in range(k)]
    for value in np.unique(labels[train_indices]):
        idx = train_indices[labels[train_indices] == value]
        rng = derive_rng(seed, int(value), k)
        perm = idx[rng.permutation(idx.size)]
        for i, chunk in enumerate(np.array_split(perm, k)):
            folds[i].append(chunk)
    return [np.sort(np.concatenate(parts)) for parts in folds]


def pearson_correlation_matrix(table: FeatureTable) -> np.ndarray:
    """4x4 Pearson correlation over (foreground, background, holes, label)."""
    if len(table) < 2:
        raise ValueError("correlation needs at least two samples")
    data = np.column_stack([table.features.astype(np.float64), table.labels.astype(np.float64)])
    stds = data.std(axis=0)
    for name, s in zip(CORRELATION_COLUMNS, stds):
        if s == 0.0:
            raise ConstantColumnError(f"column {name!r} is constant; correlation undefined")
    return np.corrcoef(data, rowvar=False)


def feature_matrix(table: FeatureTable, feature_set: str = "two") -> tuple[np.ndarray, tuple[str, ...]]:
    """Model input matrix: 'two' drops the redundant background column."""
    if feature_set == "two":
        return table.features[:, [0, 2]].astype(np.float64), ("foreground", "holes")
    if feature_set == "three":
        return table.features.astype(np.float64), ("foreground", "background", "holes")
    raise ValueError(f"feature_set must be 'two' or 'three', got {feature_set!r}")


def select_final_features(table: FeatureTable) -> np.ndarray:
    """The 2-column (foreground, holes) view used by all final models."""
    return feature_matrix(table, "two")[0]


def save_table(table: FeatureTable, path) -> None:
    """Write the feature CSV (UTF-8, LF, header mandatory)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p, label, row in zip(table.paths, table.labels, table.features):
            writer.writerow([p, int(label), int(row[0]), int(row[1]), int(row[2])])


def load_table(path) -> FeatureTable:
    """Read a feature CSV back; SchemaError on any malformed content."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if tuple(header) != CSV_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        paths: list[str] = []
        labels: list[int] = []
        rows: list[tuple[int, int, int]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise SchemaError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            p = row[0]
            try:
                label, fg, bg, holes = (int(v) for v in row[1:])
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-integer field") from None
            if label not in (0, 1):
                raise SchemaError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
            if fg < 0 or bg < 0 or holes < 0 or fg + bg != MASK_PIXELS:
                raise SchemaError(f"{path}:{lineno}: counts violate the {MASK_PIXELS}-pixel mask invariant")
            paths.append(p)
            labels.append(label)
            rows.append((fg, bg, holes))
    if not paths:
        raise SchemaError(f"{path}: no data rows")
    return FeatureTable(
        paths=paths,
        labels=np.array(labels, dtype=np.int8),
        features=np.array(rows, dtype=np.int64),
        metadata={"source": str(path)},
    )
