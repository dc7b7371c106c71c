"""K-nearest-neighbors with exact linear-scan search.

The feature space is 2-D, so a chunked brute-force scan is both exact and
fast enough. Distance ties are broken by the lower training index; class
vote ties resolve to the lower label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import KTooLargeError, NonBinaryLabelsError
from .standardize import Standardizer, fit_standardizer

METRICS = ("euclidean", "manhattan", "chebyshev", "minkowski_p1", "minkowski_p2", "minkowski_p3")

_QUERY_CHUNK = 256


@dataclass(frozen=True)
class KnnModel:
    train: np.ndarray   # standardized training matrix
    labels: np.ndarray  # int8
    n_neighbors: int
    metric: str
    standardizer: Standardizer

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self.standardizer.apply(np.atleast_2d(X))
        out = np.empty(Z.shape[0], dtype=np.int8)
        for lo in range(0, Z.shape[0], _QUERY_CHUNK):
            chunk = Z[lo:lo + _QUERY_CHUNK]
            d = pairwise_distance(chunk, self.train, self.metric)
            # stable sort keeps the lower training index on distance ties
            order = np.argsort(d, axis=1, kind="stable")[:, : self.n_neighbors]
            votes1 = self.labels[order].astype(np.int64).sum(axis=1)
            votes0 = self.n_neighbors - votes1
            out[lo:lo + chunk.shape[0]] = (votes1 > votes0).astype(np.int8)
        return out


def pairwise_distance(A: np.ndarray, B: np.ndarray, metric: str) -> np.ndarray:
    """Dense |A| x |B| distance matrix for the supported metrics."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    diff = np.abs(A[:, None, :] - B[None, :, :])
    if metric in ("euclidean", "minkowski_p2"):
        return np.sqrt((diff ** 2).sum(axis=2))
    if metric in ("manhattan", "minkowski_p1"):
        return diff.sum(axis=2)
    if metric == "chebyshev":
        return diff.max(axis=2)
    return ((diff ** 3).sum(axis=2)) ** (1.0 / 3.0)  # minkowski_p3


def train_knn(
    X: np.ndarray,
    y: np.ndarray,
    n_neighbors: int = 5,
    metric: str = "euclidean",
    standardize: bool = True,
) -> KnnModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    values = np.unique(y)
    if values.size > 2 or not np.all(np.isin(values, (0, 1))):
        raise NonBinaryLabelsError(f"labels must be in {{0, 1}}, got values {values}")
    if n_neighbors < 1 or n_neighbors > X.shape[0]:
        raise KTooLargeError(f"n_neighbors={n_neighbors} outside [1, {X.shape[0]}]")
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    scaler = fit_standardizer(X) if standardize else Standardizer.identity(X.shape[1])
    return KnnModel(
        train=scaler.apply(X),
        labels=y.astype(np.int8),
        n_neighbors=int(n_neighbors),
        metric=metric,
        standardizer=scaler,
    )
