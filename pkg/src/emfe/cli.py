"""Command-line entry point: extract, train, tune, eval, ensemble, bench, explain.

Every command writes a resolved-config JSON next to its outputs so runs are
auditable, and all randomness flows from --seed. Failures exit nonzero with
a machine-readable JSON object on stderr: 64 for usage problems, 2 for data
problems, 3 for I/O. EMFE_THREADS caps worker parallelism (0 or unset =
one worker per CPU).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .bench import run_bench
from .config import RunConfig
from .dataset import (
    CORRELATION_COLUMNS,
    FeatureTable,
    feature_matrix,
    ingest,
    load_table,
    pearson_correlation_matrix,
    save_table,
    stratified_split,
)
from .errors import PipelineError
from .evaluation import (
    coefficient_stability,
    confusion,
    evaluate_ensemble_cv,
    random_search,
    report,
    threshold_sweep,
)
from .imaging import POLARITY_MODES, load_rgb, preprocess_rgb, resize_antialiased, to_gray, write_pbm, write_pgm
from .learners import (
    MODEL_FAMILIES,
    SEARCH_SPACES,
    LogisticRegressionModel,
    load_model,
    model_kind_name,
    n_features_of,
    save_model,
    spec_of,
    train_model,
)

USAGE_EXIT = 64
DATA_EXIT = 2
IO_EXIT = 3


def _fail_json(code: int, kind: str, message: str) -> None:
    sys.stderr.write(json.dumps(
        {"error": kind, "message": message, "exit_code": code}) + "\n")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as JSON and exits 64."""

    def error(self, message: str):
        _fail_json(USAGE_EXIT, "usage", f"{self.prog}: {message}")
        raise SystemExit(USAGE_EXIT)


def _workers() -> int:
    cap = os.environ.get("EMFE_THREADS", "").strip()
    cpus = os.cpu_count() or 1
    if not cap or not cap.isdigit() or int(cap) == 0:
        return cpus
    return max(1, min(int(cap), cpus))


def _parse_params(raw: str | None) -> dict[str, Any]:
    if raw is None or raw.strip() == "":
        return {}
    try:
        params = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"--params is not valid JSON: {exc}") from exc
    if not isinstance(params, dict):
        raise ValueError("--params must be a JSON object")
    return params


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text.rstrip("\n") + "\n", encoding="utf-8")


def _config(args, **overrides) -> RunConfig:
    fields = {
        "command": args.command,
        "out": str(args.out),
        "seed": args.seed,
    }
    for name in ("data", "csv", "test_fraction", "polarity", "connectivity",
                 "features", "n_samples", "folds", "threshold_target",
                 "n_iterations"):
        if hasattr(args, name) and getattr(args, name) is not None:
            fields[name] = getattr(args, name)
    if getattr(args, "model", None):
        fields["model"] = args.model
    fields.update(overrides)
    return RunConfig(**fields)


def _split_table(args) -> tuple[FeatureTable, np.ndarray, tuple[str, ...]]:
    table = load_table(args.csv)
    X, names = feature_matrix(table, args.features)
    return table, X.astype(np.float64), names


def _eval_envelope(cm, rep, cv=None, search=None, significance=None, sweep=None) -> dict:
    return {
        "confusion": cm.as_dict(),
        "report": rep.as_dict(),
        "cv": cv,
        "search": search,
        "significance": significance,
        "threshold_sweep": sweep,
    }


# ------------------------------------------------------------------ commands

def cmd_extract(args) -> int:
    out = _out_dir(args)
    table = ingest(args.data, polarity=args.polarity,
                   connectivity=args.connectivity, workers=_workers())
    save_table(table, out / "features.csv")

    corr = pearson_correlation_matrix(table)
    lines_csv = ["," + ",".join(CORRELATION_COLUMNS)]
    lines_txt = [f"{'':<12}" + "".join(f"{c:>12}" for c in CORRELATION_COLUMNS)]
    for name, row in zip(CORRELATION_COLUMNS, corr):
        lines_csv.append(name + "," + ",".join(f"{v:.6f}" for v in row))
        lines_txt.append(f"{name:<12}" + "".join(f"{v:>12.4f}" for v in row))
    _write_text(out / "correlation.csv", "\n".join(lines_csv))
    _write_text(out / "correlation.txt", "\n".join(lines_txt))

    if args.debug_images > 0:
        dbg = out / "debug"
        dbg.mkdir(exist_ok=True)
        root = Path(args.data)
        for rel in table.paths[:args.debug_images]:
            img = load_rgb(root / rel)
            gray = to_gray(resize_antialiased(img))
            stem = Path(rel).stem
            write_pgm(gray, dbg / f"{stem}.pgm")
            write_pbm(preprocess_rgb(img, args.polarity), dbg / f"{stem}.pbm")

    _config(args).write(out / "extract_config.json")
    counts = table.class_counts()
    failures = table.metadata.get("failures", [])
    per_class = ", ".join(f"{name} {n}" for name, n in counts.items())
    print(f"extracted {len(table)} samples ({per_class}), "
          f"{len(failures)} failures -> {out / 'features.csv'}")
    return 0


def _train_eval_common(args, family: str, params: Mapping[str, Any],
                       model_stem: str, extra_json: dict | None = None) -> int:
    out = _out_dir(args)
    table, X, names = _split_table(args)
    y = table.labels.astype(np.int8)
    split = stratified_split(y, args.test_fraction, args.seed)
    model = train_model(family, X[split.train_indices], y[split.train_indices],
                        params, seed=args.seed)
    model_path = out / f"{model_stem}.emfe"
    save_model(model, model_path, feature_names=names)

    preds = model.predict(X[split.test_indices])
    cm = confusion(y[split.test_indices], preds)
    rep = report(cm)
    envelope = _eval_envelope(cm, rep, **(extra_json or {}))
    _write_json(out / "eval_report.json", envelope)
    _write_text(out / "eval_report.txt",
                cm.text_table() + "\n\n" + rep.text_table())
    _config(args, params=dict(params)).write(out / f"{args.command}_config.json")
    print(f"{family}: test accuracy {rep.accuracy:.2f}% "
          f"({cm.total} samples) -> {model_path}")
    return 0


def cmd_train(args) -> int:
    params = _parse_params(args.params)
    return _train_eval_common(args, args.model, params, f"model_{args.model}")


def cmd_tune(args) -> int:
    out = _out_dir(args)
    table, X, names = _split_table(args)
    y = table.labels.astype(np.int8)
    split = stratified_split(y, args.test_fraction, args.seed)
    result = random_search(args.model, X[split.train_indices],
                           y[split.train_indices], SEARCH_SPACES[args.model],
                           n_samples=args.n_samples, k=args.folds,
                           seed=args.seed)
    _write_json(out / "search.json", result.as_dict())
    _write_text(out / "search.txt", result.text_table())

    best = dict(result.best.params)
    model = train_model(args.model, X[split.train_indices],
                        y[split.train_indices], best, seed=args.seed)
    model_path = out / f"model_{args.model}_tuned.emfe"
    save_model(model, model_path, feature_names=names)
    preds = model.predict(X[split.test_indices])
    cm = confusion(y[split.test_indices], preds)
    rep = report(cm)
    _write_json(out / "eval_report.json",
                _eval_envelope(cm, rep, search=result.as_dict()))
    _write_text(out / "eval_report.txt",
                cm.text_table() + "\n\n" + rep.text_table())
    _config(args, params=best).write(out / "tune_config.json")
    kv = ", ".join(f"{k}={v}" for k, v in best.items())
    print(f"{args.model} best of {len(result.entries)}: cv {result.best.mean:.2f}% "
          f"({kv}); test accuracy {rep.accuracy:.2f}% -> {model_path}")
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    model = load_model(args.model_file)
    table, X, names = _split_table(args)
    y = table.labels.astype(np.int8)
    if n_features_of(model) != X.shape[1]:
        raise ValueError(
            f"model expects {n_features_of(model)} features but --features "
            f"{args.features!r} provides {X.shape[1]}")
    if args.split == "all":
        idx = np.arange(y.size)
    else:
        split = stratified_split(y, args.test_fraction, args.seed)
        idx = split.test_indices if args.split == "test" else split.train_indices
    preds = model.predict(X[idx])
    cm = confusion(y[idx], preds)
    rep = report(cm)
    sweep = None
    if isinstance(model, LogisticRegressionModel):
        sweep = threshold_sweep(model, X[idx], y[idx], args.threshold_target)
    _write_json(out / "eval_report.json",
                _eval_envelope(cm, rep, sweep=sweep.as_dict() if sweep else None))
    text = cm.text_table() + "\n\n" + rep.text_table()
    if sweep is not None:
        sel = "none" if sweep.selected is None else f"{sweep.selected:.4f}"
        text += (f"\n\nthreshold for recall >= {100 * sweep.target_recall:.0f}%: "
                 f"{sel}\n({sweep.warning})")
    _write_text(out / "eval_report.txt", text)
    _config(args).write(out / "eval_config.json")
    print(f"{model_kind_name(model)} on {args.split} split: "
          f"accuracy {rep.accuracy:.2f}% ({cm.total} samples)")
    return 0


def cmd_ensemble(args) -> int:
    out = _out_dir(args)
    params = _parse_params(args.params)
    lr_kw = dict(params.get("logreg_params", {}))
    rf_kw = dict(params.get("forest_params", {}))
    table, X, names = _split_table(args)
    y = table.labels.astype(np.int8)
    split = stratified_split(y, args.test_fraction, args.seed)
    Xtr, ytr = X[split.train_indices], y[split.train_indices]

    cv = evaluate_ensemble_cv(Xtr, ytr, k=args.folds, seed=args.seed,
                              logreg_params=lr_kw, forest_params=rf_kw)
    _write_json(out / "ensemble_cv.json", cv.as_dict())
    _write_text(out / "ensemble_cv.txt", cv.text_table())

    model = train_model("ensemble", Xtr, ytr,
                        {"logreg_params": lr_kw, "forest_params": rf_kw},
                        seed=args.seed)
    model_path = out / "model_ensemble.emfe"
    save_model(model, model_path, feature_names=names)
    preds = model.predict(X[split.test_indices])
    cm = confusion(y[split.test_indices], preds)
    rep = report(cm)
    _write_json(out / "eval_report.json",
                _eval_envelope(cm, rep, cv=cv.ensemble.as_dict(),
                               significance=cv.as_dict()["significance"]))
    _write_text(out / "eval_report.txt",
                cm.text_table() + "\n\n" + rep.text_table())
    _config(args, params=params).write(out / "ensemble_config.json")
    print(f"ensemble: {args.folds}-fold cv {cv.ensemble.mean:.2f}% "
          f"(logreg {cv.logreg.mean:.2f}%, rf {cv.forest.mean:.2f}%), "
          f"paired-t p={cv.p_value:.4g}; test accuracy {rep.accuracy:.2f}% "
          f"-> {model_path}")
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args)
    model = load_model(args.model_file)
    table, X, names = _split_table(args)
    y = table.labels.astype(np.int8)
    split = stratified_split(y, args.test_fraction, args.seed)
    image_paths: Sequence[str] | None = None
    if args.data:
        root = Path(args.data)
        image_paths = [str(root / table.paths[i]) for i in split.test_indices[:256]]
    bench = run_bench(model, spec_of(model),
                      X[split.train_indices], y[split.train_indices],
                      model_path=args.model_file, image_paths=image_paths,
                      n_iterations=args.n_iterations, repeats=args.repeats,
                      seed=args.seed)
    _write_json(out / "bench.json", bench.as_dict())
    _write_text(out / "bench.txt", bench.text_table())
    _config(args).write(out / "bench_config.json")
    print(bench.text_table())
    return 0


def cmd_explain(args) -> int:
    out = _out_dir(args)
    model = load_model(args.model_file)
    if not isinstance(model, LogisticRegressionModel):
        raise ValueError(
            f"explain needs a logistic-regression model file, got {model_kind_name(model)}")
    names = {2: ("foreground", "holes"),
             3: ("foreground", "background", "holes")}.get(
        n_features_of(model),
        tuple(f"x{i}" for i in range(n_features_of(model))))
    coef_rows = [f"{'feature':<14}{'weight':>10}"]
    coef_rows += [f"{n:<14}{w:>10.4f}" for n, w in zip(names, model.weights)]
    coef_rows.append(f"{'bias':<14}{model.bias:>10.4f}")
    text = "\n".join(coef_rows)
    doc: dict[str, Any] = {
        "model_kind": "logreg",
        "features": list(names),
        "weights": [float(w) for w in model.weights],
        "bias": float(model.bias),
        "stability": None,
    }
    if args.csv:
        table, X, _ = _split_table(args)
        y = table.labels.astype(np.int8)
        split = stratified_split(y, args.test_fraction, args.seed)
        stab = coefficient_stability(
            X[split.train_indices], y[split.train_indices],
            n_runs=args.runs, base_seed=args.seed,
            logreg_params={"penalty": model.penalty, "C": model.C},
            feature_names=names)
        doc["stability"] = stab.as_dict()
        text += "\n\n" + stab.text_table()
    _write_json(out / "explain.json", doc)
    _write_text(out / "explain.txt", text)
    _config(args).write(out / "explain_config.json")
    print(text)
    return 0


# -------------------------------------------------------------------- parser

def _add_common(p: argparse.ArgumentParser, *, csv: bool = False,
                data: bool = False, data_required: bool = False) -> None:
    if data:
        p.add_argument("--data", required=data_required,
                       help="dataset root with Parasitized/ and Uninfected/ dirs")
    if csv:
        p.add_argument("--csv", required=True, help="feature CSV from extract")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--seed", type=int, default=42)


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--features", choices=("two", "three"), default="two",
                   help="two = foreground+holes; three adds background")


def build_parser() -> _Parser:
    parser = _Parser(prog="emfe",
                     description="morphology-based malaria cell classification")
    parser.add_argument("--version", action="version", version=f"emfe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract",
                       help="build the feature CSV from an image tree")
    _add_common(p, data=True, data_required=True)
    p.add_argument("--polarity", choices=POLARITY_MODES, default="paper")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--debug-images", type=int, default=0, metavar="N",
                   help="dump gray PGM + mask PBM for the first N images")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train",
                       help="train one model family on the train split")
    _add_common(p, csv=True)
    _add_split_flags(p)
    p.add_argument("--model", choices=MODEL_FAMILIES, required=True)
    p.add_argument("--params", help="hyperparameter overrides as a JSON object")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune",
                       help="randomized hyperparameter search with CV")
    _add_common(p, csv=True)
    _add_split_flags(p)
    p.add_argument("--model", choices=tuple(SEARCH_SPACES), required=True)
    p.add_argument("--n-samples", type=int, default=25)
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval",
                       help="evaluate a saved model on a split")
    _add_common(p, csv=True)
    _add_split_flags(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--split", choices=("test", "train", "all"), default="test")
    p.add_argument("--threshold-target", type=float, default=0.95,
                   help="recall target for the threshold sweep (LR only)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble",
                       help="two-stage ensemble: CV report + final model")
    _add_common(p, csv=True)
    _add_split_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--params",
                   help='JSON: {"logreg_params": {...}, "forest_params": {...}}')
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("bench",
                       help="training time, inference latency, model size")
    _add_common(p, csv=True, data=False)
    _add_split_flags(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--data",
                   help="dataset root; enables end-to-end latency timing")
    p.add_argument("--n-iterations", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("explain",
                       help="LR coefficients and retraining stability")
    p.add_argument("--model-file", required=True)
    p.add_argument("--csv", help="feature CSV; enables the stability report")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--features", choices=("two", "three"), default="two")
    p.add_argument("--runs", type=int, default=10,
                   help="retraining runs for the stability report")
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already reported
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PipelineError as exc:
        _fail_json(DATA_EXIT, type(exc).__name__, str(exc))
        return DATA_EXIT
    except OSError as exc:
        _fail_json(IO_EXIT, type(exc).__name__, str(exc))
        return IO_EXIT
    except ValueError as exc:
        _fail_json(USAGE_EXIT, type(exc).__name__, str(exc))
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
