"""Efficiency measurements: training wall time, per-image latency, file size.

Every inference call is timed individually on the monotonic clock (no
batching), after 100 untimed warm-up calls; median and p95 are reported
rather than means so scheduler noise does not skew results. Reports carry
a host descriptor so numbers from different machines are never compared
silently.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .imaging import preprocess_file
from .learners import ModelSpec
from .morphology import extract_features

INFERENCE_MODES = ("model_only", "end_to_end")
WARMUP_CALLS = 100


@dataclass(frozen=True)
class HostInfo:
    cpu_model: str
    cores: int

    def as_dict(self) -> dict:
        return {"cpu_model": self.cpu_model, "cores": self.cores}


def host_info() -> HostInfo:
    cpu = "unknown"
    try:
        with open("/proc/cpuinfo", encoding="utf-8") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return HostInfo(cpu_model=cpu, cores=os.cpu_count() or 1)


@dataclass(frozen=True)
class LatencyStats:
    median_ms: float
    p95_ms: float
    n_iterations: int

    def as_dict(self) -> dict:
        return {"median_ms": self.median_ms, "p95_ms": self.p95_ms,
                "n_iterations": self.n_iterations}


@dataclass(frozen=True)
class BenchReport:
    model_kind: str
    training_seconds: float | None
    model_only: LatencyStats | None
    end_to_end: LatencyStats | None
    size_bytes: int | None
    host: HostInfo

    def as_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "training_seconds": self.training_seconds,
            "inference": {
                "model_only": self.model_only.as_dict() if self.model_only else None,
                "end_to_end": self.end_to_end.as_dict() if self.end_to_end else None,
            },
            "size_bytes": self.size_bytes,
            "host": self.host.as_dict(),
        }

    def text_table(self) -> str:
        def fmt(v, unit, pattern="{:.3f}"):
            return (pattern.format(v) + unit) if v is not None else "-"

        rows = [
            f"model: {self.model_kind}",
            f"{'training time':<26}{fmt(self.training_seconds, ' s')}",
            f"{'inference median (model)':<26}"
            f"{fmt(self.model_only.median_ms if self.model_only else None, ' ms/img')}",
            f"{'inference p95 (model)':<26}"
            f"{fmt(self.model_only.p95_ms if self.model_only else None, ' ms/img')}",
            f"{'inference median (e2e)':<26}"
            f"{fmt(self.end_to_end.median_ms if self.end_to_end else None, ' ms/img')}",
            f"{'inference p95 (e2e)':<26}"
            f"{fmt(self.end_to_end.p95_ms if self.end_to_end else None, ' ms/img')}",
            f"{'model size':<26}"
            f"{fmt(self.size_bytes, ' bytes', '{:.0f}')}",
            f"host: {self.host.cpu_model} ({self.host.cores} cores)",
        ]
        return "\n".join(rows)


def bench_training(spec: ModelSpec, X: np.ndarray, y: np.ndarray,
                   repeats: int = 3, seed: int = 0) -> float:
    """Median wall time to train `spec` on in-memory data."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        spec.train(X, y, seed=seed)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _time_calls(fn, args: Sequence, n_iterations: int) -> LatencyStats:
    n_args = len(args)
    for i in range(WARMUP_CALLS):
        fn(args[i % n_args])
    samples_ns = np.empty(n_iterations, dtype=np.int64)
    for i in range(n_iterations):
        a = args[i % n_args]
        t0 = time.perf_counter_ns()
        fn(a)
        samples_ns[i] = time.perf_counter_ns() - t0
    ms = samples_ns / 1e6
    return LatencyStats(median_ms=float(np.percentile(ms, 50)),
                        p95_ms=float(np.percentile(ms, 95)),
                        n_iterations=n_iterations)


def bench_inference(model, samples: Sequence, n_iterations: int = 1000,
                    mode: str = "model_only") -> LatencyStats:
    """Single-image latency; `samples` cycles round-robin.

    model_only expects precomputed feature rows; end_to_end expects image
    paths and times decode -> mask -> features -> predict per call.
    """
    if mode not in INFERENCE_MODES:
        raise ValueError(f"mode must be one of {INFERENCE_MODES}, got {mode!r}")
    if n_iterations < 1:
        raise ValueError(f"n_iterations must be >= 1, got {n_iterations}")
    if len(samples) == 0:
        raise ValueError("need at least one sample to bench")
    if mode == "model_only":
        rows = [np.asarray(row, dtype=np.float64) for row in samples]
        return _time_calls(lambda r: model.predict(r), rows, n_iterations)

    n_feat = _feature_arity(model)
    paths = [str(p) for p in samples]

    def one(path: str):
        mask, connectivity = preprocess_file(path), 8
        feats = extract_features(mask, connectivity=connectivity)
        row = np.asarray(feats.as_tuple(), dtype=np.float64)
        if n_feat == 2:
            row = row[[0, 2]]  # foreground + holes, the final feature pair
        return model.predict(row)

    return _time_calls(one, paths, n_iterations)


def _feature_arity(model) -> int:
    from .learners import n_features_of  # late import keeps module load light

    return n_features_of(model)


def bench_size(path: str | Path) -> int:
    """Exact serialized size in bytes; missing or non-file paths raise."""
    p = Path(path)
    if str(path) == "" or not p.is_file():
        raise FileNotFoundError(f"no model file at {str(path)!r}")
    return p.stat().st_size


def run_bench(model, spec: ModelSpec, X: np.ndarray, y: np.ndarray,
              model_path: str | Path | None = None,
              image_paths: Sequence[str] | None = None,
              n_iterations: int = 1000, repeats: int = 3,
              seed: int = 0) -> BenchReport:
    """Full efficiency report for one fitted model."""
    from .learners import model_kind_name

    model_only = bench_inference(model, list(X[:256]), n_iterations, "model_only")
    end_to_end = None
    if image_paths:
        end_to_end = bench_inference(model, list(image_paths[:256]),
                                     n_iterations, "end_to_end")
    return BenchReport(
        model_kind=model_kind_name(model),
        training_seconds=bench_training(spec, X, y, repeats=repeats, seed=seed),
        model_only=model_only,
        end_to_end=end_to_end,
        size_bytes=bench_size(model_path) if model_path is not None else None,
        host=host_info(),
    )
