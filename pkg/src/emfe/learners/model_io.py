"""Compact binary model files with a CRC32 trailer, plus an LR JSON sidecar.

Layout (all little-endian):

    magic   4s   b"EMFE"
    version u16  currently 1
    kind    u8   1=logreg 2=forest 3=knn 4=svm 5=ensemble
    n_feat  u8
    means   f64 * n_feat   \\ standardizer (identity for kinds that
    stds    f64 * n_feat   /  do not standardize, e.g. forests)
    payload      kind-specific, see _pack_* below
    crc32   u32  over everything above

An ensemble payload nests two complete records (screen, then confirm),
each length-prefixed, so every member round-trips through the same code.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import CorruptModelError, SchemaError, VersionMismatchError
from .ensemble import TwoStageEnsembleModel
from .forest import CRITERIA, MAX_FEATURES_MODES, RandomForestModel, TreeNodes
from .logistic import PENALTIES, LogisticRegressionModel
from .neighbors import METRICS, KnnModel
from .standardize import Standardizer
from .svm import SvmRbfModel

MAGIC = b"EMFE"
FORMAT_VERSION = 1

KIND_CODES = {
    LogisticRegressionModel: 1,
    RandomForestModel: 2,
    KnnModel: 3,
    SvmRbfModel: 4,
    TwoStageEnsembleModel: 5,
}
KIND_NAMES = {1: "logreg", 2: "forest", 3: "knn", 4: "svm", 5: "ensemble"}

_H = struct.Struct("<4sHBB")


class _Cursor:
    """Bounds-checked reader over a byte buffer."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModelError(
                f"truncated model file: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct("<" + fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        raw = self.take(dt.itemsize * count)
        return np.frombuffer(raw, dtype=dt).astype(np.dtype(dtype), copy=True)


def _pack_arr(a: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(a, dtype=np.dtype(dtype).newbyteorder("<")).tobytes()


def _pack_logreg(m: LogisticRegressionModel) -> bytes:
    head = struct.pack(
        "<BddId",
        PENALTIES.index(m.penalty),
        float(m.C),
        float(m.threshold),
        int(m.n_iter),
        float(m.final_loss),
    )
    return head + struct.pack("<d", float(m.bias)) + _pack_arr(m.weights, "f8")


def _unpack_logreg(cur: _Cursor, nf: int, scaler: Standardizer) -> LogisticRegressionModel:
    pen_code, C, threshold, n_iter, final_loss = cur.unpack("BddId")
    if pen_code >= len(PENALTIES):
        raise CorruptModelError(f"unknown penalty code {pen_code}")
    (bias,) = cur.unpack("d")
    weights = cur.array("f8", nf)
    return LogisticRegressionModel(
        weights=weights, bias=bias, penalty=PENALTIES[pen_code], C=C,
        standardizer=scaler, threshold=threshold, n_iter=n_iter, final_loss=final_loss,
    )


def _pack_forest(m: RandomForestModel) -> bytes:
    parts = [struct.pack(
        "<IiIIBBqI",
        m.n_estimators,
        -1 if m.max_depth is None else int(m.max_depth),
        m.min_samples_split,
        m.min_samples_leaf,
        MAX_FEATURES_MODES.index(m.max_features),
        CRITERIA.index(m.criterion),
        int(m.seed),
        len(m.trees),
    )]
    for t in m.trees:
        parts.append(struct.pack("<I", len(t)))
        parts.append(_pack_arr(t.feature, "i1"))
        parts.append(_pack_arr(t.threshold, "f8"))
        parts.append(_pack_arr(t.left, "i4"))
        parts.append(_pack_arr(t.right, "i4"))
        parts.append(_pack_arr(t.count0, "u4"))
        parts.append(_pack_arr(t.count1, "u4"))
    return b"".join(parts)


def _unpack_forest(cur: _Cursor, nf: int) -> RandomForestModel:
    (n_est, depth, min_split, min_leaf, mf_code, crit_code, seed, n_trees) = cur.unpack("IiIIBBqI")
    if mf_code >= len(MAX_FEATURES_MODES) or crit_code >= len(CRITERIA):
        raise CorruptModelError("unknown forest hyperparameter code")
    trees = []
    for _ in range(n_trees):
        (n_nodes,) = cur.unpack("I")
        trees.append(TreeNodes(
            feature=cur.array("i1", n_nodes),
            threshold=cur.array("f8", n_nodes),
            left=cur.array("i4", n_nodes),
            right=cur.array("i4", n_nodes),
            count0=cur.array("u4", n_nodes).astype(np.int64),
            count1=cur.array("u4", n_nodes).astype(np.int64),
        ))
    return RandomForestModel(
        trees=tuple(trees),
        n_estimators=n_est,
        max_depth=None if depth < 0 else depth,
        min_samples_split=min_split,
        min_samples_leaf=min_leaf,
        max_features=MAX_FEATURES_MODES[mf_code],
        criterion=CRITERIA[crit_code],
        seed=seed,
        n_features=nf,
    )


def _pack_knn(m: KnnModel) -> bytes:
    head = struct.pack("<IBI", m.n_neighbors, METRICS.index(m.metric), m.train.shape[0])
    return head + _pack_arr(m.labels, "i1") + _pack_arr(m.train, "f8")


def _unpack_knn(cur: _Cursor, nf: int, scaler: Standardizer) -> KnnModel:
    k, metric_code, n = cur.unpack("IBI")
    if metric_code >= len(METRICS):
        raise CorruptModelError(f"unknown metric code {metric_code}")
    labels = cur.array("i1", n)
    train = cur.array("f8", n * nf).reshape(n, nf)
    return KnnModel(train=train, labels=labels, n_neighbors=k,
                    metric=METRICS[metric_code], standardizer=scaler)


def _pack_svm(m: SvmRbfModel) -> bytes:
    head = struct.pack("<dddI", float(m.C), float(m.gamma), float(m.bias),
                       m.support_vectors.shape[0])
    return head + _pack_arr(m.dual_coef, "f8") + _pack_arr(m.support_vectors, "f8")


def _unpack_svm(cur: _Cursor, nf: int, scaler: Standardizer) -> SvmRbfModel:
    C, gamma, bias, n_sv = cur.unpack("dddI")
    coef = cur.array("f8", n_sv)
    sv = cur.array("f8", n_sv * nf).reshape(n_sv, nf)
    return SvmRbfModel(support_vectors=sv, dual_coef=coef, bias=bias,
                       gamma=gamma, C=C, standardizer=scaler)


def _model_standardizer(model) -> Standardizer:
    scaler = getattr(model, "standardizer", None)
    if scaler is None:
        scaler = Standardizer.identity(n_features_of(model))
    return scaler


def n_features_of(model) -> int:
    if isinstance(model, LogisticRegressionModel):
        return int(model.weights.size)
    if isinstance(model, RandomForestModel):
        return int(model.n_features)
    if isinstance(model, KnnModel):
        return int(model.train.shape[1])
    if isinstance(model, SvmRbfModel):
        return int(model.support_vectors.shape[1])
    if isinstance(model, TwoStageEnsembleModel):
        return n_features_of(model.screen)
    raise TypeError(f"not a serializable model: {type(model).__name__}")


def serialize_model(model) -> bytes:
    kind = KIND_CODES.get(type(model))
    if kind is None:
        raise TypeError(f"not a serializable model: {type(model).__name__}")
    nf = n_features_of(model)
    scaler = _model_standardizer(model)
    if kind == 1:
        payload = _pack_logreg(model)
    elif kind == 2:
        payload = _pack_forest(model)
    elif kind == 3:
        payload = _pack_knn(model)
    elif kind == 4:
        payload = _pack_svm(model)
    else:
        screen = serialize_model(model.screen)
        confirm = serialize_model(model.confirm)
        payload = (struct.pack("<I", len(screen)) + screen
                   + struct.pack("<I", len(confirm)) + confirm)
    body = (_H.pack(MAGIC, FORMAT_VERSION, kind, nf)
            + _pack_arr(scaler.means, "f8") + _pack_arr(scaler.stds, "f8")
            + payload)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def deserialize_model(data: bytes):
    if len(data) < _H.size + 4:
        raise CorruptModelError(f"file too short to be a model ({len(data)} bytes)")
    body, (stored_crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CorruptModelError("checksum mismatch")
    cur = _Cursor(body)
    magic, version, kind, nf = cur.unpack("4sHBB")
    if magic != MAGIC:
        raise CorruptModelError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version}, this build reads {FORMAT_VERSION}")
    scaler = Standardizer(means=cur.array("f8", nf), stds=cur.array("f8", nf))
    if kind == 1:
        model = _unpack_logreg(cur, nf, scaler)
    elif kind == 2:
        model = _unpack_forest(cur, nf)
    elif kind == 3:
        model = _unpack_knn(cur, nf, scaler)
    elif kind == 4:
        model = _unpack_svm(cur, nf, scaler)
    elif kind == 5:
        (ln,) = cur.unpack("I")
        screen = deserialize_model(cur.take(ln))
        (ln,) = cur.unpack("I")
        confirm = deserialize_model(cur.take(ln))
        if not isinstance(screen, LogisticRegressionModel) or not isinstance(confirm, RandomForestModel):
            raise CorruptModelError("ensemble stages have wrong model kinds")
        model = TwoStageEnsembleModel(screen=screen, confirm=confirm)
    else:
        raise CorruptModelError(f"unknown model kind {kind}")
    if cur.pos != len(body):
        raise CorruptModelError(f"{len(body) - cur.pos} trailing bytes after payload")
    return model


def model_kind_name(model) -> str:
    code = KIND_CODES.get(type(model))
    if code is None:
        raise TypeError(f"not a serializable model: {type(model).__name__}")
    return KIND_NAMES[code]


def save_model(model, path: str | Path,
               feature_names: Sequence[str] | None = None) -> Path:
    """Write the binary model file; LR models also get a JSON sidecar."""
    path = Path(path)
    path.write_bytes(serialize_model(model))
    if isinstance(model, LogisticRegressionModel):
        write_logreg_sidecar(model, path.with_suffix(".json"), feature_names)
    return path


def load_model(path: str | Path):
    return deserialize_model(Path(path).read_bytes())


def write_logreg_sidecar(model: LogisticRegressionModel, path: str | Path,
                         feature_names: Sequence[str] | None = None) -> Path:
    if not isinstance(model, LogisticRegressionModel):
        raise TypeError("sidecar is only defined for logistic-regression models")
    names = list(feature_names) if feature_names is not None else [
        f"x{i}" for i in range(model.weights.size)]
    if len(names) != model.weights.size:
        raise SchemaError(
            f"{len(names)} feature names for {model.weights.size} weights")
    doc = {
        "model_kind": "logreg",
        "features": names,
        "weights": [float(w) for w in model.weights],
        "bias": float(model.bias),
        "standardizer": {
            "means": [float(v) for v in model.standardizer.means],
            "stds": [float(v) for v in model.standardizer.stds],
        },
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path
