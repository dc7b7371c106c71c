"""Per-feature standardization fitted on training data only."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConstantColumnError


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds

    @staticmethod
    def identity(n_features: int) -> "Standardizer":
        return Standardizer(np.zeros(n_features), np.ones(n_features))


def fit_standardizer(X: np.ndarray) -> Standardizer:
    """Column means and population stds; transformed columns get mean 0, std 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("standardizer needs a 2-D matrix with at least two rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    if np.any(stds == 0.0):
        bad = int(np.flatnonzero(stds == 0.0)[0])
        raise ConstantColumnError(f"column {bad} is constant; cannot standardize")
    return Standardizer(means=means, stds=stds)
