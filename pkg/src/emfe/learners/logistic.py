"""Binary logistic regression trained by proximal gradient descent.

Objective: mean logistic loss + (1/C) * penalty, bias unpenalized.
The L2 (and the smooth half of elastic-net) part is folded into the
gradient; the L1 part is handled by a soft-threshold proximal step.
Backtracking line search keeps the objective monotonically non-increasing,
and full-batch updates make training deterministic regardless of seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergedError, NonBinaryLabelsError
from .standardize import Standardizer, fit_standardizer

PENALTIES = ("none", "l1", "l2", "elasticnet")

# elastic-net mixing: weight of the L1 part (the rest is L2)
ELASTICNET_RATIO = 0.5


@dataclass(frozen=True)
class LogisticRegressionModel:
    weights: np.ndarray
    bias: float
    penalty: str
    C: float
    standardizer: Standardizer
    threshold: float = 0.5
    n_iter: int = 0
    final_loss: float = float("nan")

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        Z = self.standardizer.apply(np.atleast_2d(X))
        return Z @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """P(Parasitized) per row, in (0, 1)."""
        return _sigmoid(self.decision_values(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) > self.threshold).astype(np.int8)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_binary(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    values = np.unique(y)
    if values.size > 2 or not np.all(np.isin(values, (0, 1))):
        raise NonBinaryLabelsError(f"labels must be in {{0, 1}}, got values {values}")
    return y.astype(np.float64)

def _penalty_strengths(penalty: str, C: float) -> tuple[float, float]:
    """(l1 strength, l2 strength) entering the objective as lam * term."""
    if penalty == "none":
        return 0.0, 0.0
    if penalty == "l1":
        return 1.0 / C, 0.0
    if penalty == "l2":
        return 0.0, 1.0 / C
    if penalty == "elasticnet":
        return ELASTICNET_RATIO / C, (1.0 - ELASTICNET_RATIO) / C
    raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")


def mean_log_loss(w: np.ndarray, b: float, Z: np.ndarray, y: np.ndarray) -> float:
    """Mean logistic loss, numerically stable via logaddexp."""
    z = Z @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def smooth_objective(w: np.ndarray, b: float, Z: np.ndarray, y: np.ndarray, lam2: float) -> float:
    return mean_log_loss(w, b, Z, y) + lam2 * 0.5 * float(w @ w)


def smooth_gradient(w: np.ndarray, b: float, Z: np.ndarray, y: np.ndarray, lam2: float) -> tuple[np.ndarray, float]:
    """Analytic gradient of the smooth objective part (checked against
    central finite differences in the test suite)."""
    z = Z @ w + b
    resid = _sigmoid(z) - y
    grad_w = Z.T @ resid / Z.shape[0] + lam2 * w
    grad_b = float(resid.mean())
    return grad_w, grad_b


def _soft_threshold(v: np.ndarray, radius: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - radius, 0.0)


def full_objective(w: np.ndarray, b: float, Z: np.ndarray, y: np.ndarray, penalty: str, C: float) -> float:
    lam1, lam2 = _penalty_strengths(penalty, C)
    return smooth_objective(w, b, Z, y, lam2) + lam1 * float(np.abs(w).sum())


def train_logreg(
    X: np.ndarray,
    y: np.ndarray,
    penalty: str = "l2",
    C: float = 1.0,
    max_iter: int = 5000,
    tol: float = 1e-6,
    seed: int = 0,
    standardize: bool = True,
    threshold: float = 0.5,
) -> LogisticRegressionModel:
    """Fit from a raw feature matrix; standardization is fitted here and
    stored on the model so prediction takes raw features."""
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y)
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    scaler = fit_standardizer(X) if standardize else Standardizer.identity(X.shape[1])
    Z = scaler.apply(X)
    lam1, lam2 = _penalty_strengths(penalty, C)

    w = np.zeros(X.shape[1])
    b = 0.0
    step = 1.0
    prev_obj = smooth_objective(w, b, Z, y, lam2) + lam1 * float(np.abs(w).sum())
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        g_w, g_b = smooth_gradient(w, b, Z, y, lam2)
        g_val = smooth_objective(w, b, Z, y, lam2)
        step = min(step * 2.0, 1e6)  # let the step recover between iterations
        while True:
            w_new = _soft_threshold(w - step * g_w, step * lam1)
            b_new = b - step * g_b
            dw = w_new - w
            db = b_new - b
            quad = g_val + float(g_w @ dw) + g_b * db + (float(dw @ dw) + db * db) / (2.0 * step)
            if smooth_objective(w_new, b_new, Z, y, lam2) <= quad + 1e-12:
                break
            step *= 0.5
            if step < 1e-18:
                raise DivergedError("line search step collapsed")
        w, b = w_new, b_new
        obj = smooth_objective(w, b, Z, y, lam2) + lam1 * float(np.abs(w).sum())
        if not np.isfinite(obj):
            raise DivergedError(f"objective became non-finite at iteration {n_iter}")
        if abs(prev_obj - obj) < tol:
            prev_obj = obj
            break
        prev_obj = obj

    return LogisticRegressionModel(
        weights=w,
        bias=float(b),
        penalty=penalty,
        C=float(C),
        standardizer=scaler,
        threshold=float(threshold),
        n_iter=n_iter,
        final_loss=float(prev_obj),
    )


def predict_proba_logreg(model: LogisticRegressionModel, x: np.ndarray) -> float:
    """Probability of Parasitized for a single raw feature vector."""
    return float(model.predict_proba(np.atleast_2d(x))[0])
