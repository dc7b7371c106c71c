"""Model families: from-scratch trainers plus shared dispatch plumbing."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .ensemble import TwoStageEnsembleModel, train_two_stage
from .forest import CRITERIA, MAX_FEATURES_MODES, RandomForestModel, train_random_forest
from .logistic import (
    PENALTIES,
    LogisticRegressionModel,
    predict_proba_logreg,
    train_logreg,
)
from .model_io import (
    FORMAT_VERSION,
    MAGIC,
    load_model,
    model_kind_name,
    n_features_of,
    save_model,
    serialize_model,
    write_logreg_sidecar,
)
from .neighbors import METRICS, KnnModel, pairwise_distance, train_knn
from .standardize import Standardizer, fit_standardizer
from .svm import SvmRbfModel, dual_objective, train_svm_rbf

MODEL_FAMILIES = ("logreg", "rf", "knn", "svm", "ensemble")

_TRAINERS = {
    "logreg": train_logreg,
    "rf": train_random_forest,
    "knn": train_knn,
    "svm": train_svm_rbf,
    "ensemble": train_two_stage,
}

DEFAULT_PARAMS: Mapping[str, Mapping[str, Any]] = MappingProxyType({
    "logreg": MappingProxyType({"penalty": "l2", "C": 1.0}),
    "rf": MappingProxyType({"n_estimators": 100, "max_features": "sqrt"}),
    "knn": MappingProxyType({"n_neighbors": 5, "metric": "euclidean"}),
    "svm": MappingProxyType({"C": 1.0, "gamma": "scale"}),
    "ensemble": MappingProxyType({}),
})

# Discrete tuning grids; every value list is exhaustive, so randomized
# search can draw without replacement.
SEARCH_SPACES: Mapping[str, Mapping[str, tuple]] = MappingProxyType({
    "logreg": MappingProxyType({
        "penalty": ("none", "l1", "l2", "elasticnet"),
        "C": (0.01, 0.1, 1.0, 10.0, 100.0),
    }),
    "rf": MappingProxyType({
        "n_estimators": (100, 200, 500),
        "max_depth": (None, 10, 20, 30),
        "min_samples_split": (2, 5, 10),
        "min_samples_leaf": (1, 2, 4),
        "max_features": ("sqrt", "log2"),
    }),
    "knn": MappingProxyType({
        "n_neighbors": tuple(range(1, 21)),
        "metric": METRICS,
    }),
})


def train_model(family: str, X: np.ndarray, y: np.ndarray,
                params: Mapping[str, Any] | None = None, seed: int = 0):
    """Train one model of the named family with defaults filled in."""
    if family not in _TRAINERS:
        raise ValueError(f"unknown model family {family!r}; choose from {MODEL_FAMILIES}")
    kwargs = dict(DEFAULT_PARAMS[family])
    kwargs.update(params or {})
    if family != "knn":  # KNN has no randomness
        kwargs.setdefault("seed", seed)
    return _TRAINERS[family](X, y, **kwargs)


@dataclass(frozen=True)
class ModelSpec:
    """A trainable family + hyperparameters; what CV and search score."""

    family: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def train(self, X: np.ndarray, y: np.ndarray, seed: int = 0):
        return train_model(self.family, X, y, self.params, seed=seed)


def spec_of(model) -> ModelSpec:
    """Recover the hyperparameters of a fitted model as a trainable spec."""
    if isinstance(model, LogisticRegressionModel):
        return ModelSpec("logreg", {"penalty": model.penalty, "C": model.C,
                                    "threshold": model.threshold})
    if isinstance(model, RandomForestModel):
        return ModelSpec("rf", {
            "n_estimators": model.n_estimators, "max_depth": model.max_depth,
            "min_samples_split": model.min_samples_split,
            "min_samples_leaf": model.min_samples_leaf,
            "max_features": model.max_features, "criterion": model.criterion,
        })
    if isinstance(model, KnnModel):
        return ModelSpec("knn", {"n_neighbors": model.n_neighbors,
                                 "metric": model.metric})
    if isinstance(model, SvmRbfModel):
        return ModelSpec("svm", {"C": model.C, "gamma": model.gamma})
    if isinstance(model, TwoStageEnsembleModel):
        return ModelSpec("ensemble", {
            "logreg_params": dict(spec_of(model.screen).params),
            "forest_params": dict(spec_of(model.confirm).params),
        })
    raise TypeError(f"no spec for {type(model).__name__}")


__all__ = [
    "CRITERIA", "DEFAULT_PARAMS", "FORMAT_VERSION", "KnnModel",
    "LogisticRegressionModel", "MAGIC", "MAX_FEATURES_MODES", "METRICS",
    "MODEL_FAMILIES", "ModelSpec", "PENALTIES", "RandomForestModel",
    "SEARCH_SPACES", "Standardizer", "SvmRbfModel", "TwoStageEnsembleModel",
    "dual_objective", "fit_standardizer", "load_model", "model_kind_name",
    "n_features_of", "pairwise_distance", "predict_proba_logreg", "save_model",
    "serialize_model", "spec_of", "train_knn", "train_logreg", "train_model",
    "train_random_forest", "train_svm_rbf", "train_two_stage",
    "write_logreg_sidecar",
]
