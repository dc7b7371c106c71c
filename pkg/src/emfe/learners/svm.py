"""RBF-kernel SVM trained by simplified sequential minimal optimization.

Works on standardized features and may subsample large training sets (the
dual is quadratic in the row count). A sweep with zero KKT violations at
the working tolerance ends training; exhausting max_passes while alphas are
still moving raises DivergedError.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergedError, NonBinaryLabelsError
from .standardize import Standardizer, fit_standardizer

SUBSAMPLE_CAP = 5000

_MIN_ALPHA_STEP = 1e-8


@dataclass(frozen=True)
class SvmRbfModel:
    support_vectors: np.ndarray  # standardized
    dual_coef: np.ndarray        # alpha_i * s_i, |coef| <= C
    bias: float
    gamma: float
    C: float
    standardizer: Standardizer

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        Z = self.standardizer.apply(np.atleast_2d(X))
        K = rbf_kernel(Z, self.support_vectors, self.gamma)
        return K @ self.dual_coef + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_values(X) > 0).astype(np.int8)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * sq)


def dual_objective(alpha: np.ndarray, s: np.ndarray, K: np.ndarray) -> float:
    """SVM dual W(alpha); each accepted SMO step must not decrease it."""
    v = alpha * s
    return float(alpha.sum() - 0.5 * v @ (K @ v))


def train_svm_rbf(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    gamma: float | str = "scale",
    tol: float = 1e-3,
    max_passes: int = 1000,
    seed: int = 0,
    subsample_cap: int = SUBSAMPLE_CAP,
) -> SvmRbfModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    values = np.unique(y)
    if values.size > 2 or not np.all(np.isin(values, (0, 1))):
        raise NonBinaryLabelsError(f"labels must be in {{0, 1}}, got values {values}")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")

    rng = np.random.default_rng(seed)
    if subsample_cap is not None and X.shape[0] > subsample_cap:
        keep = np.sort(rng.choice(X.shape[0], size=subsample_cap, replace=False))
        X = X[keep]
        y = y[keep]

    scaler = fit_standardizer(X)
    Z = scaler.apply(X)
    s = (2 * y.astype(np.float64)) - 1.0
    n = Z.shape[0]
    if gamma == "scale":
        var = float(Z.var())
        gamma = 1.0 / (Z.shape[1] * var) if var > 0 else 1.0
    gamma = float(gamma)

    K = rbf_kernel(Z, Z, gamma).astype(np.float32)
    Kd = K.astype(np.float64, copy=False)

    alpha = np.zeros(n)
    b = 0.0
    E = -s.copy()  # f(x) - s with all-zero alphas

    def take_step(i: int, j: int) -> bool:
        """Optimize the (i, j) pair; returns True when alphas moved."""
        nonlocal b, E
        Ei = float(E[i])
        Ej = float(E[j])
        ai_old = alpha[i]
        aj_old = alpha[j]
        if s[i] != s[j]:
            L = max(0.0, aj_old - ai_old)
            H = min(C, C + aj_old - ai_old)
        else:
            L = max(0.0, ai_old + aj_old - C)
            H = min(C, ai_old + aj_old)
        if L >= H:
            return False
        eta = float(Kd[i, i] + Kd[j, j] - 2.0 * Kd[i, j])
        if eta <= 0:
            return False
        aj = aj_old + s[j] * (Ei - Ej) / eta
        aj = min(max(aj, L), H)
        if abs(aj - aj_old) < _MIN_ALPHA_STEP:
            return False
        ai = ai_old + s[i] * s[j] * (aj_old - aj)
        d_i = s[i] * (ai - ai_old)
        d_j = s[j] * (aj - aj_old)
        b1 = b - Ei - d_i * Kd[i, i] - d_j * Kd[i, j]
        b2 = b - Ej - d_i * Kd[i, j] - d_j * Kd[j, j]
        if 0.0 < ai < C:
            b_new = b1
        elif 0.0 < aj < C:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0
        alpha[i] = ai
        alpha[j] = aj
        E += d_i * Kd[i, :] + d_j * Kd[j, :] + (b_new - b)
        b = b_new
        return True

    converged = False
    for _ in range(max_passes):
        changed = 0
        for i in range(n):
            r = float(E[i]) * s[i]
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0)):
                continue
            # second-choice heuristic: the partner with the largest |Ei - Ej|
            j = int(np.argmax(np.abs(E - E[i])))
            if j != i and take_step(i, j):
                changed += 1
                continue
            # fall back to every other partner, from a random start, so a
            # zero-change sweep certifies no pair can make progress
            start = int(rng.integers(n))
            for off in range(n):
                j = (start + off) % n
                if j != i and take_step(i, j):
                    changed += 1
                    break
        if changed == 0:  # no pair anywhere could improve the dual
            converged = True
            break
    if not converged:
        raise DivergedError(f"SMO still moving after {max_passes} passes")

    sv = alpha > 1e-12
    return SvmRbfModel(
        support_vectors=Z[sv].copy(),
        dual_coef=(alpha[sv] * s[sv]),
        bias=float(b),
        gamma=gamma,
        C=float(C),
        standardizer=scaler,
    )
