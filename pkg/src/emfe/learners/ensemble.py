"""Two-stage sequential ensemble: logistic screen, forest confirmation.

Stage one (logistic regression) sees every sample. A stage-one negative is
final — the forest is never consulted for it. Stage-one positives are passed
to the forest, whose verdict stands. The forest is trained on the full
training set, not only on screen-positives, so stage two stays calibrated
even when stage one under-triggers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import RandomForestModel, train_random_forest
from .logistic import LogisticRegressionModel, train_logreg


@dataclass(frozen=True)
class TwoStageEnsembleModel:
    screen: LogisticRegressionModel
    confirm: RandomForestModel

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        first = self.screen.predict(X)
        out = np.zeros(X.shape[0], dtype=np.int8)
        positive = first == 1
        if np.any(positive):
            out[positive] = self.confirm.predict(X[positive])
        return out

    def stage_decisions(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-stage verdicts (stage two evaluated everywhere, for analysis)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.screen.predict(X), self.confirm.predict(X)


def train_two_stage(
    X: np.ndarray,
    y: np.ndarray,
    logreg_params: dict | None = None,
    forest_params: dict | None = None,
    seed: int = 0,
) -> TwoStageEnsembleModel:
    lr_kw = dict(logreg_params or {})
    rf_kw = dict(forest_params or {})
    lr_kw.setdefault("seed", seed)
    rf_kw.setdefault("seed", seed)
    screen = train_logreg(X, y, **lr_kw)
    confirm = train_random_forest(X, y, **rf_kw)
    return TwoStageEnsembleModel(screen=screen, confirm=confirm)
