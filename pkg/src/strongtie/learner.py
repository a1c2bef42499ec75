"""Logistic regression over motif scores and their log1p transforms."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .motifs import CandidateScores
from .planted import EdgeMotifCounts

MODEL_FORMAT = "strongtie-lr"
MODEL_VERSION = 1

GROUP1 = ("degree", "embeddedness", "adamic_adar", "h1", "triangle")
GROUP2 = GROUP1 + ("square_in", "square_out", "pent_in", "pent_out")
THEORY = {
    "triangles-only": ("triangles",),
    "squares-only": ("squares",),
    "combined": ("triangles", "squares"),
}
CANDIDATE_SCHEMAS = {"group1": GROUP1, "group2": GROUP2}


class SchemaError(ValueError):
    pass


class TrainingError(ValueError):
    pass


class ModelFileError(ValueError):
    pass


def schema_names(raw: Sequence[str]) -> tuple[str, ...]:
    return tuple(raw) + tuple(f"log1p_{r}" for r in raw)


def raw_columns(selection: str) -> tuple[str, ...]:
    if selection in CANDIDATE_SCHEMAS:
        return CANDIDATE_SCHEMAS[selection]
    if selection in THEORY:
        return THEORY[selection]
    raise SchemaError(f"unknown schema {selection!r}")


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.schema):
            raise SchemaError("feature length does not match schema")


def _raw_values(item, cols: Sequence[str], selection: str) -> list[float]:
    if isinstance(item, CandidateScores):
        if selection not in CANDIDATE_SCHEMAS:
            raise SchemaError(f"{selection!r} does not apply to candidate scores")
    elif isinstance(item, EdgeMotifCounts):
        if selection not in THEORY:
            raise SchemaError(f"{selection!r} does not apply to edge motif counts")
    else:
        raise SchemaError(f"cannot featurize {type(item).__name__}")
    return [float(getattr(item, c)) for c in cols]


def log_expand(raw: np.ndarray) -> np.ndarray:
    """Append ``ln(1 + x)`` of every column."""
    raw = np.asarray(raw, dtype=np.float64)
    return np.concatenate((raw, np.log1p(raw)), axis=-1)


def featurize(item, selection: str) -> FeatureVector:
    cols = raw_columns(selection)
    raw = np.array(_raw_values(item, cols, selection))
    return FeatureVector(log_expand(raw), schema_names(cols))


def feature_matrix(items: Sequence, selection: str) -> np.ndarray:
    cols = raw_columns(selection)
    if not items:
        return np.zeros((0, 2 * len(cols)))
    return log_expand(np.array([_raw_values(it, cols, selection) for it in items]))


def sigmoid(z):
    return expit(np.asarray(z, dtype=np.float64))


def loss_and_grad(w: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2: float, counts=None):
    """Mean logistic loss plus ``l2/2 * |w|^2`` and its gradient in (w, bias).

    With ``counts`` each row of ``X`` stands for ``counts[i]`` identical
    examples of which ``y[i]`` are positive.
    """
    if counts is None:
        counts = np.ones(len(y))
    total = counts.sum()
    z = X @ w + bias
    # log(1 + e^z) - y z, computed stably
    loss = float(np.sum(counts * np.logaddexp(0.0, z) - y * z) / total) + 0.5 * l2 * float(w @ w)
    err = counts * sigmoid(z) - y
    gw = X.T @ err / total + l2 * w
    gb = float(err.sum() / total)
    return loss, gw, gb


def _compress(Z: np.ndarray, y: np.ndarray):
    """Merge identical feature rows into (unique rows, positive counts, multiplicities)."""
    uniq, inverse = np.unique(Z, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    counts = np.bincount(inverse, minlength=len(uniq)).astype(np.float64)
    pos = np.bincount(inverse, weights=y, minlength=len(uniq))
    return uniq, pos, counts


@dataclass
class LRModel:
    schema: tuple[str, ...]
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    threshold: float = 0.5
    hyper: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    loss_trace: list[float] = field(default_factory=list, repr=False)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != len(self.schema):
            raise SchemaError(f"expected {len(self.schema)} features, got {X.shape[1]}")
        return self.standardize(X) @ self.weights + self.bias

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba_matrix(X) >= self.threshold).astype(int)


def predict_proba(m: LRModel, x: FeatureVector) -> float:
    if tuple(x.schema) != tuple(m.schema):
        raise SchemaError("feature schema does not match model")
    return float(m.predict_proba_matrix(x.values[None, :])[0])


def _dataset_hash(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def train_matrix(
    X: np.ndarray,
    y: np.ndarray,
    schema: Sequence[str],
    lr: float = 0.1,
    epochs: int = 500,
    l2: float = 1e-4,
    linear: bool = False,
    seed: int | None = None,
) -> LRModel:
    """Full-batch gradient descent on standardized features.

    With ``linear=True`` a least-squares fit replaces the logistic loss
    (experimental; predictions are then clipped scores, not probabilities).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y) or X.shape[1] != len(schema):
        raise SchemaError("feature matrix does not match labels/schema")
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite feature value")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise TrainingError("training data must contain both classes")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std <= 0] = 1.0
    Z = (X - mean) / std
    w = np.zeros(X.shape[1])
    b = 0.0
    trace = []
    if linear:
        A = np.column_stack((Z, np.ones(len(Z))))
        reg = l2 * len(y) * np.eye(A.shape[1])
        reg[-1, -1] = 0.0
        sol = np.linalg.solve(A.T @ A + reg, A.T @ y)
        w, b = sol[:-1], float(sol[-1])
    else:
        U, pos, counts = _compress(Z, y)
        for _ in range(epochs):
            loss, gw, gb = loss_and_grad(w, b, U, pos, l2, counts)
            trace.append(loss)
            w = w - lr * gw
            b = b - lr * gb
        trace.append(loss_and_grad(w, b, U, pos, l2, counts)[0])
    hyper = {"lr": lr, "epochs": epochs, "l2": l2, "loss": "squared" if linear else "logistic"}
    meta = {"seed": seed, "dataset_hash": _dataset_hash(X, y), "examples": int(len(y)), "positives": int(y.sum())}
    return LRModel(tuple(schema), w, b, mean, std, 0.5, hyper, meta, trace)


def train(examples: Sequence[tuple[FeatureVector, int]], lr: float = 0.1, epochs: int = 500, l2: float = 1e-4) -> LRModel:
    if not examples:
        raise TrainingError("no training examples")
    schema = examples[0][0].schema
    if any(fv.schema != schema for fv, _ in examples):
        raise SchemaError("mixed feature schemas")
    X = np.array([fv.values for fv, _ in examples])
    y = np.array([lab for _, lab in examples], dtype=np.float64)
    return train_matrix(X, y, schema, lr, epochs, l2)


def _floats(a) -> list[str]:
    return [format(float(v), ".17g") for v in np.atleast_1d(a)]


def save_model(m: LRModel, path: str | Path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "schema": list(m.schema),
        "weights": _floats(m.weights),
        "bias": _floats(m.bias)[0],
        "mean": _floats(m.mean),
        "std": _floats(m.std),
        "threshold": _floats(m.threshold)[0],
        "hyper": m.hyper,
        "metadata": m.metadata,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LRModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"malformed model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError("not a strongtie model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {doc.get('version')!r}")
    try:
        schema = tuple(doc["schema"])
        arr = {k: np.array([float(v) for v in doc[k]]) for k in ("weights", "mean", "std")}
        m = LRModel(
            schema,
            arr["weights"],
            float(doc["bias"]),
            arr["mean"],
            arr["std"],
            float(doc["threshold"]),
            doc.get("hyper", {}),
            doc.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from None
    if not (len(m.weights) == len(m.mean) == len(m.std) == len(schema)):
        raise ModelFileError("array lengths do not match schema")
    return m
