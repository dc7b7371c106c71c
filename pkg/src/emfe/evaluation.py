"""Metrics, cross-validation, randomized search, threshold and stability analysis.

Percentages are rounded half-up to two decimals at the reporting boundary;
all intermediate arithmetic stays in full precision. A metric whose
denominator is zero is reported as 0 and flagged by name in `undefined`,
never silently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .dataset import kfold_indices
from .errors import EmptySearchSpaceError, LengthMismatchError, NonBinaryLabelsError
from .learners import ModelSpec, train_logreg, train_random_forest, train_two_stage
from .learners.logistic import LogisticRegressionModel
from .seeding import derive_rng, derive_seed

POSITIVE_NAME = "Parasitized"
NEGATIVE_NAME = "Uninfected"


def round_pct(x: float) -> float:
    """Half-up to 2 decimals, e.g. 94.805 -> 94.81 (paper-table convention)."""
    return float(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _check_binary(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        raise NonBinaryLabelsError(f"{what} must be 0/1")
    return arr.astype(np.int64)


# ---------------------------------------------------------------- confusion

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}

    def text_table(self) -> str:
        w = max(len(str(v)) for v in (self.tp, self.fn, self.fp, self.tn))
        w = max(w, len("Pred " + NEGATIVE_NAME))
        head = f"{'':>18} {'Pred ' + POSITIVE_NAME:>{w}} {'Pred ' + NEGATIVE_NAME:>{w}}"
        r1 = f"{'True ' + POSITIVE_NAME:>18} {self.tp:>{w}} {self.fn:>{w}}"
        r2 = f"{'True ' + NEGATIVE_NAME:>18} {self.fp:>{w}} {self.tn:>{w}}"
        return "\n".join((head, r1, r2))


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    yt = _check_binary(np.asarray(y_true), "y_true")
    yp = _check_binary(np.asarray(y_pred), "y_pred")
    if yt.shape != yp.shape:
        raise LengthMismatchError(f"{yt.size} true labels vs {yp.size} predictions")
    return ConfusionMatrix(
        tp=int(np.sum((yt == 1) & (yp == 1))),
        fn=int(np.sum((yt == 1) & (yp == 0))),
        fp=int(np.sum((yt == 0) & (yp == 1))),
        tn=int(np.sum((yt == 0) & (yp == 0))),
    )


# ------------------------------------------------------------------ report

@dataclass(frozen=True)
class ClassScores:
    precision: float  # percent, rounded
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    positive: ClassScores
    negative: ClassScores
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            POSITIVE_NAME: vars(self.positive).copy(),
            NEGATIVE_NAME: vars(self.negative).copy(),
            "accuracy": self.accuracy,
            "macro_avg": {"precision": self.macro_precision,
                          "recall": self.macro_recall, "f1": self.macro_f1},
            "weighted_avg": {"precision": self.weighted_precision,
                             "recall": self.weighted_recall, "f1": self.weighted_f1},
            "undefined": list(self.undefined),
        }

    def text_table(self) -> str:
        total = self.positive.support + self.negative.support
        rows = [
            f"{'':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>9}",
            f"{POSITIVE_NAME:<14}{self.positive.precision:>10.2f}"
            f"{self.positive.recall:>10.2f}{self.positive.f1:>10.2f}"
            f"{self.positive.support:>9}",
            f"{NEGATIVE_NAME:<14}{self.negative.precision:>10.2f}"
            f"{self.negative.recall:>10.2f}{self.negative.f1:>10.2f}"
            f"{self.negative.support:>9}",
            f"{'accuracy':<14}{'':>10}{'':>10}{self.accuracy:>10.2f}{total:>9}",
            f"{'macro avg':<14}{self.macro_precision:>10.2f}"
            f"{self.macro_recall:>10.2f}{self.macro_f1:>10.2f}{total:>9}",
            f"{'weighted avg':<14}{self.weighted_precision:>10.2f}"
            f"{self.weighted_recall:>10.2f}{self.weighted_f1:>10.2f}{total:>9}",
        ]
        if self.undefined:
            rows.append("undefined (reported as 0): " + ", ".join(self.undefined))
        return "\n".join(rows)


def _ratio(num: int, den: int, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def report(cm: ConfusionMatrix) -> ClassificationReport:
    if cm.total == 0:
        raise ValueError("cannot report on an empty confusion matrix")
    flags: list[str] = []
    sup_p = cm.tp + cm.fn
    sup_n = cm.tn + cm.fp
    prec_p = _ratio(cm.tp, cm.tp + cm.fp, "precision_" + POSITIVE_NAME, flags)
    rec_p = _ratio(cm.tp, cm.tp + cm.fn, "recall_" + POSITIVE_NAME, flags)
    prec_n = _ratio(cm.tn, cm.tn + cm.fn, "precision_" + NEGATIVE_NAME, flags)
    rec_n = _ratio(cm.tn, cm.tn + cm.fp, "recall_" + NEGATIVE_NAME, flags)

    def f1(p: float, r: float, name: str) -> float:
        if p + r == 0:
            flags.append(name)
            return 0.0
        return 2 * p * r / (p + r)

    f1_p = f1(prec_p, rec_p, "f1_" + POSITIVE_NAME)
    f1_n = f1(prec_n, rec_n, "f1_" + NEGATIVE_NAME)
    acc = (cm.tp + cm.tn) / cm.total

    def weighted(a: float, b: float) -> float:
        return (a * sup_p + b * sup_n) / cm.total

    return ClassificationReport(
        positive=ClassScores(round_pct(100 * prec_p), round_pct(100 * rec_p),
                             round_pct(100 * f1_p), sup_p),
        negative=ClassScores(round_pct(100 * prec_n), round_pct(100 * rec_n),
                             round_pct(100 * f1_n), sup_n),
        accuracy=round_pct(100 * acc),
        macro_precision=round_pct(100 * (prec_p + prec_n) / 2),
        macro_recall=round_pct(100 * (rec_p + rec_n) / 2),
        macro_f1=round_pct(100 * (f1_p + f1_n) / 2),
        weighted_precision=round_pct(100 * weighted(prec_p, prec_n)),
        weighted_recall=round_pct(100 * weighted(rec_p, rec_n)),
        weighted_f1=round_pct(100 * weighted(f1_p, f1_n)),
        undefined=tuple(flags),
    )


# ---------------------------------------------------------- cross-validation

@dataclass(frozen=True)
class CvResult:
    accuracies: tuple[float, ...]  # percent per fold, unrounded
    mean: float                    # percent
    std: float                     # percent, population std over folds

    def as_dict(self) -> dict:
        return {"fold_accuracies": [round_pct(a) for a in self.accuracies],
                "mean": round_pct(self.mean), "std": round_pct(self.std)}

    def text_table(self) -> str:
        folds = "  ".join(f"{a:.2f}" for a in self.accuracies)
        return (f"folds (%): {folds}\n"
                f"mean {self.mean:.2f}%  std {self.std:.2f}pp  (k={len(self.accuracies)})")


def _cv_result(accs: Sequence[float]) -> CvResult:
    arr = np.asarray(accs, dtype=np.float64)
    return CvResult(accuracies=tuple(float(a) for a in arr),
                    mean=float(arr.mean()), std=float(arr.std()))


def _cv_predictions(
    train_fn: Callable[[np.ndarray, np.ndarray, int], Any],
    X: np.ndarray,
    y: np.ndarray,
    folds: Sequence[np.ndarray],
    seed: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per fold: (held-out indices, predictions there). Train errors carry
    the fold index."""
    all_idx = np.arange(y.size)
    out = []
    for i, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, test_idx, assume_unique=True)
        try:
            model = train_fn(X[train_idx], y[train_idx], derive_seed(seed, i))
        except Exception as exc:
            raise type(exc)(f"fold {i}: {exc}") from exc
        out.append((test_idx, np.asarray(model.predict(X[test_idx]))))
    return out


def cross_validate(spec: ModelSpec, X: np.ndarray, y: np.ndarray,
                   k: int = 5, seed: int = 0) -> CvResult:
    """Stratified k-fold accuracy of freshly trained models."""
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y, "y")
    folds = kfold_indices(y, np.arange(y.size), k, seed)
    per_fold = _cv_predictions(lambda Xt, yt, s: spec.train(Xt, yt, seed=s),
                               X, y, folds, seed)
    accs = [100.0 * float(np.mean(preds == y[idx])) for idx, preds in per_fold]
    return _cv_result(accs)


# ------------------------------------------------------------ random search

@dataclass(frozen=True)
class SearchEntry:
    params: Mapping[str, Any]
    mean: float
    std: float


@dataclass(frozen=True)
class SearchResult:
    family: str
    entries: tuple[SearchEntry, ...]  # in draw order
    best_index: int

    @property
    def best(self) -> SearchEntry:
        return self.entries[self.best_index]

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "samples": [{"params": {k: v for k, v in e.params.items()},
                         "cv_mean": round_pct(e.mean), "cv_std": round_pct(e.std)}
                        for e in self.entries],
            "best_index": self.best_index,
            "best_params": {k: v for k, v in self.best.params.items()},
            "best_cv_mean": round_pct(self.best.mean),
            "best_cv_std": round_pct(self.best.std),
        }

    def text_table(self) -> str:
        rows = [f"{'#':>3}  {'cv mean':>8}  {'cv std':>7}  params"]
        for i, e in enumerate(self.entries):
            mark = " *" if i == self.best_index else ""
            kv = ", ".join(f"{k}={v}" for k, v in e.params.items())
            rows.append(f"{i:>3}  {e.mean:>8.2f}  {e.std:>7.2f}  {kv}{mark}")
        return "\n".join(rows)


def enumerate_grid(space: Mapping[str, Sequence[Any]]) -> list[dict[str, Any]]:
    names = list(space)
    if not names or any(len(space[n]) == 0 for n in names):
        raise EmptySearchSpaceError("search space has an empty dimension")
    return [dict(zip(names, combo))
            for combo in itertools.product(*(space[n] for n in names))]


def random_search(family: str, X: np.ndarray, y: np.ndarray,
                  space: Mapping[str, Sequence[Any]], n_samples: int = 25,
                  k: int = 5, seed: int = 0) -> SearchResult:
    """Seeded uniform draws from the grid, each scored by k-fold CV.

    The grids here are small enough to enumerate, so draws are always
    without replacement; every candidate is scored on the same folds.
    Best = highest CV mean, ties to lower std, then earlier draw.
    """
    grid = enumerate_grid(space)
    rng = derive_rng(seed)
    order = rng.permutation(len(grid))[:max(0, n_samples)]
    if order.size == 0:
        raise EmptySearchSpaceError("n_samples must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y, "y")
    folds = kfold_indices(y, np.arange(y.size), k, seed)  # shared across draws
    entries = []
    for draw_i, grid_i in enumerate(order):
        params = grid[int(grid_i)]
        spec = ModelSpec(family, params)
        per_fold = _cv_predictions(
            lambda Xt, yt, s, sp=spec: sp.train(Xt, yt, seed=s),
            X, y, folds, derive_seed(seed, draw_i))
        accs = [100.0 * float(np.mean(p == y[idx])) for idx, p in per_fold]
        r = _cv_result(accs)
        entries.append(SearchEntry(params=params, mean=r.mean, std=r.std))
    best = 0
    for i, e in enumerate(entries[1:], start=1):
        b = entries[best]
        if (e.mean, -e.std) > (b.mean, -b.std):
            best = i
    return SearchResult(family=family, entries=tuple(entries), best_index=best)


# ---------------------------------------------------------- threshold sweep

@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    precision: float  # percent, unrounded
    recall: float


@dataclass(frozen=True)
class ThresholdSweep:
    points: tuple[ThresholdPoint, ...]  # ascending threshold
    target_recall: float                # fraction, e.g. 0.95
    selected: float | None              # largest threshold meeting the target
    warning: str

    def as_dict(self) -> dict:
        return {
            "target_recall": self.target_recall,
            "selected_threshold": self.selected,
            "warning": self.warning,
            "points": [{"threshold": p.threshold,
                        "precision": round_pct(p.precision),
                        "recall": round_pct(p.recall)} for p in self.points],
        }


_SWEEP_WARNING = ("threshold chosen on this evaluation set; for deployment, "
                  "select it on a validation subset to avoid leakage")


def threshold_sweep(model: LogisticRegressionModel, X: np.ndarray,
                    y: np.ndarray, target_recall: float = 0.95) -> ThresholdSweep:
    """Precision/recall trace over every distinct operating point.

    A sample counts positive when probability > threshold, so threshold 0
    recalls everything and threshold 1 recalls nothing.
    """
    y = _check_binary(y, "y")
    proba = np.asarray(model.predict_proba(X), dtype=np.float64)
    if proba.shape[0] != y.size:
        raise LengthMismatchError(f"{proba.shape[0]} probabilities vs {y.size} labels")
    total_pos = int(y.sum())
    thresholds = np.unique(np.concatenate(([0.0], proba, [1.0])))
    order = np.argsort(-proba, kind="stable")
    cum_tp = np.concatenate(([0], np.cumsum(y[order])))
    asc = np.sort(proba)
    n = proba.size
    points = []
    selected = None
    for t in thresholds:
        n_pred = n - int(np.searchsorted(asc, t, side="right"))
        tp = int(cum_tp[n_pred])
        prec = 100.0 * tp / n_pred if n_pred else 0.0
        rec = 100.0 * tp / total_pos if total_pos else 0.0
        points.append(ThresholdPoint(float(t), prec, rec))
        if total_pos and rec >= 100.0 * target_recall:
            selected = float(t)  # thresholds ascend, so the last hit is largest
    return ThresholdSweep(points=tuple(points), target_recall=float(target_recall),
                          selected=selected, warning=_SWEEP_WARNING)


# ------------------------------------------------- ensemble CV + significance

@dataclass(frozen=True)
class EnsembleCvReport:
    ensemble: CvResult
    logreg: CvResult
    forest: CvResult
    best_single: str               # "logreg" or "rf", by CV mean
    t_statistic: float
    p_value: float                 # paired two-sided t over matched folds
    mcnemar_statistic: float
    mcnemar_p_value: float         # pooled predictions, continuity-corrected
    pooled_confusion: ConfusionMatrix

    def as_dict(self) -> dict:
        return {
            "ensemble_cv": self.ensemble.as_dict(),
            "logreg_cv": self.logreg.as_dict(),
            "forest_cv": self.forest.as_dict(),
            "best_single": self.best_single,
            "significance": {
                "paired_t": {"statistic": self.t_statistic, "p_value": self.p_value},
                "mcnemar": {"statistic": self.mcnemar_statistic,
                            "p_value": self.mcnemar_p_value},
            },
            "pooled_confusion": self.pooled_confusion.as_dict(),
        }

    def text_table(self) -> str:
        lines = [
            f"{'model':<10}{'cv mean':>9}{'cv std':>8}",
            f"{'ensemble':<10}{self.ensemble.mean:>9.2f}{self.ensemble.std:>8.2f}",
            f"{'logreg':<10}{self.logreg.mean:>9.2f}{self.logreg.std:>8.2f}",
            f"{'rf':<10}{self.forest.mean:>9.2f}{self.forest.std:>8.2f}",
            f"paired t vs {self.best_single}: t={self.t_statistic:.3f} "
            f"p={self.p_value:.4g}",
            f"mcnemar vs {self.best_single}: chi2={self.mcnemar_statistic:.3f} "
            f"p={self.mcnemar_p_value:.4g}",
            "pooled ensemble confusion over CV folds:",
            self.pooled_confusion.text_table(),
        ]
        return "\n".join(lines)


def _paired_t(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if np.allclose(diff, 0.0) or diff.std(ddof=1) == 0.0:
        return 0.0, 1.0
    t, p = stats.ttest_rel(a, b)
    return float(t), float(p)


def _mcnemar(correct_a: np.ndarray, correct_b: np.ndarray) -> tuple[float, float]:
    b = int(np.sum(correct_a & ~correct_b))   # a right, b wrong
    c = int(np.sum(~correct_a & correct_b))
    if b + c == 0:
        return 0.0, 1.0
    chi2 = (abs(b - c) - 1) ** 2 / (b + c)
    return float(chi2), float(stats.chi2.sf(chi2, df=1))


def evaluate_ensemble_cv(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    seed: int = 0,
    logreg_params: Mapping[str, Any] | None = None,
    forest_params: Mapping[str, Any] | None = None,
) -> EnsembleCvReport:
    """Matched-fold comparison of the two-stage ensemble vs its members.

    All three train on identical fold splits, so the per-fold accuracy
    vectors are paired; the t-test runs against the stronger single model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y, "y")
    folds = kfold_indices(y, np.arange(y.size), k, seed)
    lr_kw = dict(logreg_params or {})
    rf_kw = dict(forest_params or {})

    def mk(trainer, kw):
        return lambda Xt, yt, s: trainer(Xt, yt, **{**kw, "seed": s})

    runs = {
        "ensemble": _cv_predictions(
            lambda Xt, yt, s: train_two_stage(Xt, yt, logreg_params=lr_kw,
                                              forest_params=rf_kw, seed=s),
            X, y, folds, seed),
        "logreg": _cv_predictions(mk(train_logreg, lr_kw), X, y, folds, seed),
        "rf": _cv_predictions(mk(train_random_forest, rf_kw), X, y, folds, seed),
    }
    accs = {name: [100.0 * float(np.mean(p == y[idx])) for idx, p in per_fold]
            for name, per_fold in runs.items()}
    results = {name: _cv_result(a) for name, a in accs.items()}
    best_single = "logreg" if results["logreg"].mean >= results["rf"].mean else "rf"

    t_stat, t_p = _paired_t(accs["ensemble"], accs[best_single])

    pooled: dict[str, np.ndarray] = {}
    pooled_truth = np.concatenate([y[idx] for idx, _ in runs["ensemble"]])
    for name, per_fold in runs.items():
        pooled[name] = np.concatenate([p for _, p in per_fold])
    mc_stat, mc_p = _mcnemar(pooled["ensemble"] == pooled_truth,
                             pooled[best_single] == pooled_truth)
    return EnsembleCvReport(
        ensemble=results["ensemble"],
        logreg=results["logreg"],
        forest=results["rf"],
        best_single=best_single,
        t_statistic=t_stat,
        p_value=t_p,
        mcnemar_statistic=mc_stat,
        mcnemar_p_value=mc_p,
        pooled_confusion=confusion(pooled_truth, pooled["ensemble"]),
    )


# ------------------------------------------------------ coefficient stability

@dataclass(frozen=True)
class StabilityReport:
    weights: np.ndarray        # (n_runs, n_features)
    biases: np.ndarray         # (n_runs,)
    mean_weights: np.ndarray
    max_deviation: float       # max |w - run mean| over runs and features
    signs: tuple[int, ...]     # per feature: +1/-1 if consistent, else 0
    feature_names: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "n_runs": int(self.weights.shape[0]),
            "feature_names": list(self.feature_names),
            "weights": [[float(v) for v in row] for row in self.weights],
            "biases": [float(b) for b in self.biases],
            "mean_weights": [float(v) for v in self.mean_weights],
            "max_deviation": float(self.max_deviation),
            "signs": list(self.signs),
        }

    def text_table(self) -> str:
        names = self.feature_names or tuple(
            f"x{i}" for i in range(self.weights.shape[1]))
        rows = [f"{'feature':<14}{'mean w':>10}{'max dev':>10}{'sign':>6}"]
        devs = np.abs(self.weights - self.mean_weights).max(axis=0)
        for i, name in enumerate(names):
            sign = {1: "+", -1: "-", 0: "mixed"}[self.signs[i]]
            rows.append(f"{name:<14}{self.mean_weights[i]:>10.4f}"
                        f"{devs[i]:>10.2e}{sign:>6}")
        rows.append(f"max deviation across runs: {self.max_deviation:.2e}")
        return "\n".join(rows)


def coefficient_stability(
    X: np.ndarray,
    y: np.ndarray,
    n_runs: int = 10,
    base_seed: int = 42,
    logreg_params: Mapping[str, Any] | None = None,
    feature_names: Sequence[str] = (),
) -> StabilityReport:
    """Retrain LR on reshuffled row orders and measure weight drift.

    Full-batch training is permutation-invariant up to float summation
    order, so deviations should sit near machine precision.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y, "y")
    kw = dict(logreg_params or {})
    kw.pop("seed", None)
    weights, biases = [], []
    for run in range(n_runs):
        perm = derive_rng(base_seed, run).permutation(y.size)
        model = train_logreg(X[perm], y[perm], seed=derive_seed(base_seed, run), **kw)
        weights.append(model.weights)
        biases.append(model.bias)
    W = np.vstack(weights)
    mean_w = W.mean(axis=0)
    signs = []
    for j in range(W.shape[1]):
        col = np.sign(W[:, j])
        signs.append(int(col[0]) if np.all(col == col[0]) else 0)
    return StabilityReport(
        weights=W,
        biases=np.asarray(biases),
        mean_weights=mean_w,
        max_deviation=float(np.abs(W - mean_w).max()) if W.size else 0.0,
        signs=tuple(signs),
        feature_names=tuple(feature_names),
    )
