"""Classifier detector: signed feature hashing plus a tiny sigmoid-over-tanh
MLP head trained with mini-batch gradient descent on binary cross-entropy.

Text is embedded by hashing lowercased word unigrams and bigrams into a
fixed number of buckets with 64-bit FNV-1a (bucket from the low bits, sign
from bit 63) and L2-normalizing. The head computes
sigmoid(W2 . tanh(W1 h + b1) + b2).

The same module owns ingestion of externally computed score files, so a
real transformer can stand in for the internal classifier through a plain
JSONL interface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document
from .errors import ConfigError, DataContractError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

DETECTOR_IDS = ("m1", "m2", "m3")


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class HashedFeatures:
    vector: np.ndarray
    norm: float


@dataclass
class MlpParams:
    W1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H,)
    b2: float

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]


@dataclass
class MlpHyper:
    dim: int = 512
    hidden: int = 32
    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0


@dataclass(frozen=True)
class ScoreRecord:
    doc_id: str
    detector_id: str
    raw_score: float
    prob: float | None


def featurize(text: str, dim: int = 512) -> HashedFeatures:
    """Hash word unigrams and bigrams into ``dim`` signed buckets and
    L2-normalize. Empty text maps to the zero vector."""
    if dim < 16 or dim & (dim - 1) != 0:
        raise DataContractError(f"feature dimension must be a power of two >= 16, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    tokens = [t.lower() for t in text.split()]
    if not tokens:
        return HashedFeatures(vector=vec, norm=0.0)
    keys: Iterable[str] = tokens
    for key in keys:
        h = fnv1a_64(key.encode("utf-8"))
        vec[h % dim] += -1.0 if (h >> 63) & 1 else 1.0
    for a, b in zip(tokens, tokens[1:]):
        h = fnv1a_64(f"{a} {b}".encode("utf-8"))
        vec[h % dim] += -1.0 if (h >> 63) & 1 else 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
        return HashedFeatures(vector=vec, norm=1.0)
    return HashedFeatures(vector=vec, norm=0.0)


def sigmoid(x):
    """Numerically stable logistic function for scalars and arrays."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def mlp_logit(params: MlpParams, vector: np.ndarray) -> float:
    """Pre-sigmoid output; exposed because raw scores are logged alongside
    probabilities."""
    if vector.shape != (params.input_dim,):
        raise DataContractError(
            f"feature dimension {vector.shape} does not match parameters ({params.input_dim},)"
        )
    hidden = np.tanh(params.W1 @ vector + params.b1)
    return float(params.W2 @ hidden + params.b2)


def mlp_forward(params: MlpParams, features: HashedFeatures) -> float:
    return float(sigmoid(mlp_logit(params, features.vector)))


def _forward_batch(params: MlpParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    A = np.tanh(X @ params.W1.T + params.b1)
    p = sigmoid(A @ params.W2 + params.b2)
    return A, p


def bce_loss(params: MlpParams, X: np.ndarray, y: np.ndarray) -> float:
    _, p = _forward_batch(params, X)
    eps = 1e-12
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_gradients(params: MlpParams, X: np.ndarray, y: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean binary cross-entropy over the batch."""
    n = X.shape[0]
    A, p = _forward_batch(params, X)
    delta = (p - y) / n  # (n,)
    dW2 = A.T @ delta
    db2 = float(np.sum(delta))
    dA = np.outer(delta, params.W2) * (1.0 - A**2)
    dW1 = dA.T @ X
    db1 = dA.sum(axis=0)
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": np.float64(db2)}


def init_params(hyper: MlpHyper) -> MlpParams:
    rng = np.random.default_rng(hyper.seed)
    scale = 0.05
    return MlpParams(
        W1=rng.uniform(-scale, scale, size=(hyper.hidden, hyper.dim)),
        b1=rng.uniform(-scale, scale, size=hyper.hidden),
        W2=rng.uniform(-scale, scale, size=hyper.hidden),
        b2=float(rng.uniform(-scale, scale)),
    )


def train_mlp(docs: Sequence[Document], hyper: MlpHyper) -> tuple[MlpParams, list[float]]:
    """Mini-batch gradient descent; deterministic for a given seed. Returns
    the final parameters and the per-epoch loss trace."""
    labels = {d.label for d in docs}
    if labels != {0, 1}:
        raise DataContractError(f"training set must contain both labels, found {sorted(labels)}")
    X = np.stack([featurize(d.text, hyper.dim).vector for d in docs])
    y = np.array([d.label for d in docs], dtype=np.float64)

    rng = np.random.default_rng(hyper.seed)
    params = init_params(hyper)
    trace: list[float] = []
    n = len(docs)
    for _ in range(hyper.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = perm[start : start + hyper.batch_size]
            grads = bce_gradients(params, X[idx], y[idx])
            params.W1 -= hyper.learning_rate * grads["W1"]
            params.b1 -= hyper.learning_rate * grads["b1"]
            params.W2 -= hyper.learning_rate * grads["W2"]
            params.b2 -= hyper.learning_rate * float(grads["b2"])
        trace.append(bce_loss(params, X, y))
    return params, trace


def save_params(params: MlpParams, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "W1": params.W1.tolist(),
        "b1": params.b1.tolist(),
        "W2": params.W2.tolist(),
        "b2": params.b2,
    }
    path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_params(path: str | Path) -> MlpParams:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return MlpParams(
        W1=np.array(payload["W1"], dtype=np.float64),
        b1=np.array(payload["b1"], dtype=np.float64),
        W2=np.array(payload["W2"], dtype=np.float64),
        b2=float(payload["b2"]),
    )


def write_score_records(path: str | Path, records: Iterable[ScoreRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            row = {
                "doc_id": r.doc_id,
                "detector_id": r.detector_id,
                "raw_score": r.raw_score,
                "prob": r.prob,
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def ingest_external_scores(path: str | Path, corpus_ids: set[str]) -> list[ScoreRecord]:
    """Load and validate a detector score file against the loaded corpus.
    Unknown document ids and out-of-range probabilities are hard errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"score file not found: {path}")
    records: list[ScoreRecord] = []
    unknown: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataContractError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            missing = {"doc_id", "detector_id", "raw_score"} - set(row)
            if missing:
                raise DataContractError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            if row["detector_id"] not in DETECTOR_IDS:
                raise DataContractError(
                    f"{path}:{lineno}: detector_id must be one of {DETECTOR_IDS}, got {row['detector_id']!r}"
                )
            raw = float(row["raw_score"])
            if not math.isfinite(raw):
                raise DataContractError(f"{path}:{lineno}: non-finite raw_score")
            prob = row.get("prob")
            if prob is not None:
                prob = float(prob)
                if not 0.0 <= prob <= 1.0:
                    raise DataContractError(f"{path}:{lineno}: prob {prob} outside [0, 1]")
            doc_id = str(row["doc_id"])
            if doc_id not in corpus_ids:
                unknown.append(doc_id)
            records.append(ScoreRecord(doc_id=doc_id, detector_id=row["detector_id"], raw_score=raw, prob=prob))
    if unknown:
        raise DataContractError(f"score file {path} references unknown document ids: {sorted(set(unknown))}")
    return records
