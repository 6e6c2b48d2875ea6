"""Weighted fusion of the three detector probabilities, exhaustive simplex
grid search for F1-optimal weights, and variance/correlation diagnostics.

The search enumerates the simplex exactly as a pair of nested ascending
loops (first weight outer, second inner, third the remainder) and keeps the
earliest candidate achieving the maximum F1, so every run and every
implementation of the same loop agrees on the chosen weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataContractError

COLUMNS = ("m1", "m2", "m3")


@dataclass(frozen=True)
class SimplexWeights:
    w1: float
    w2: float
    w3: float

    def __post_init__(self) -> None:
        for w in (self.w1, self.w2, self.w3):
            if w < 0.0:
                raise DataContractError(f"weights must be non-negative, got {(self.w1, self.w2, self.w3)}")
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > 1e-9:
            raise DataContractError(f"weights must sum to 1 within 1e-9, got {(self.w1, self.w2, self.w3)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3], dtype=np.float64)


@dataclass
class ScoreMatrix:
    doc_ids: list[str]
    probs: np.ndarray  # (N, 3), columns m1, m2, m3
    labels: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.doc_ids)
        if self.probs.shape != (n, 3):
            raise DataContractError(f"probability matrix shape {self.probs.shape} does not match {n} ids x 3 detectors")
        if self.labels.shape != (n,):
            raise DataContractError("labels length does not match document ids")
        if np.any((self.probs < 0.0) | (self.probs > 1.0)):
            raise DataContractError("probabilities must lie in [0, 1]")
        if not set(np.unique(self.labels)) <= {0, 1}:
            raise DataContractError("labels must be binary")

    def __len__(self) -> int:
        return len(self.doc_ids)


@dataclass(frozen=True)
class DiversityReport:
    correlation: np.ndarray  # (3, 3)
    covariance: np.ndarray  # (3, 3)
    ensemble_variance: float


@dataclass(frozen=True)
class GridSearchResult:
    weights: SimplexWeights
    f1: float
    candidates: list[tuple[float, float, float, float]]  # (w1, w2, w3, f1) in loop order


@dataclass(frozen=True)
class AblationResult:
    dropped: str | None
    weights: SimplexWeights
    validation_f1: float
    test_f1: float
    drop_vs_full: float


def fuse(w: SimplexWeights, probs: Sequence[float]) -> float:
    """Convex combination of the three detector probabilities."""
    if len(probs) != 3:
        raise DataContractError(f"expected 3 probabilities, got {len(probs)}")
    return w.w1 * probs[0] + w.w2 * probs[1] + w.w3 * probs[2]


def fuse_column(w: SimplexWeights, probs: np.ndarray) -> np.ndarray:
    return np.asarray(probs, dtype=np.float64) @ w.as_array()


def _f1_at_threshold(fused: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    # Same arithmetic as evaluation.f1_accuracy so every reported F1 agrees
    # bit for bit, including the zero-denominator conventions.
    pred = fused >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def grid_weight_search(
    val: ScoreMatrix,
    delta: float = 0.05,
    threshold: float = 0.5,
    pinned_zero: int | None = None,
) -> GridSearchResult:
    """Enumerate every weight triple on the delta-grid of the simplex and
    return the first one maximizing F1 at the decision threshold.

    Weights are generated as integer multiples of the grid step, never by
    repeated addition. ``pinned_zero`` restricts the search to the facet
    where that detector's weight is zero (used by the ablation study).
    """
    if len(val) == 0:
        raise DataContractError("empty validation matrix")
    if not ({0, 1} <= set(np.unique(val.labels))):
        raise DataContractError("weight search requires both classes in the validation set")
    n = round(1.0 / delta)
    if n <= 0 or abs(n * delta - 1.0) > 1e-9:
        raise DataContractError(f"1/delta must be an integer, got delta={delta}")

    best_w = (1.0, 0.0, 0.0)
    best_f1 = 0.0
    candidates: list[tuple[float, float, float, float]] = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            w = (i / n, j / n, k / n)
            if pinned_zero is not None and w[pinned_zero] != 0.0:
                continue
            fused = val.probs @ np.array(w)
            f1 = _f1_at_threshold(fused, val.labels, threshold)
            candidates.append((w[0], w[1], w[2], f1))
            if f1 > best_f1:
                best_f1 = f1
                best_w = w
    return GridSearchResult(weights=SimplexWeights(*best_w), f1=best_f1, candidates=candidates)


def diversity_report(val: ScoreMatrix, w: SimplexWeights) -> DiversityReport:
    """Sample covariance and Pearson correlation of the three probability
    columns, plus the fused-prediction variance w'Cw."""
    if len(val) < 3:
        raise DataContractError(f"diversity report needs at least 3 rows, got {len(val)}")
    cov = np.cov(val.probs.T, ddof=1)
    std = np.sqrt(np.diag(cov))
    for i, sd in enumerate(std):
        if sd == 0.0:
            raise DataContractError(f"detector {COLUMNS[i]} has zero variance; correlation undefined")
    corr = cov / np.outer(std, std)
    var = float(w.as_array() @ cov @ w.as_array())
    return DiversityReport(correlation=corr, covariance=cov, ensemble_variance=var)


def ablate(
    val: ScoreMatrix,
    test: ScoreMatrix,
    drop: str,
    delta: float = 0.05,
    threshold: float = 0.5,
) -> AblationResult:
    """Re-optimize weights with one detector pinned to zero and report the
    test F1 change versus the full ensemble."""
    if drop not in COLUMNS:
        raise DataContractError(f"drop must be one of {COLUMNS}, got {drop!r}")
    full = grid_weight_search(val, delta=delta, threshold=threshold)
    full_test_f1 = _f1_at_threshold(fuse_column(full.weights, test.probs), test.labels, threshold)
    reduced = grid_weight_search(val, delta=delta, threshold=threshold, pinned_zero=COLUMNS.index(drop))
    reduced_test_f1 = _f1_at_threshold(fuse_column(reduced.weights, test.probs), test.labels, threshold)
    return AblationResult(
        dropped=drop,
        weights=reduced.weights,
        validation_f1=reduced.f1,
        test_f1=reduced_test_f1,
        drop_vs_full=reduced_test_f1 - full_test_f1,
    )


def write_score_matrix(path: str | Path, matrix: ScoreMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "label", *COLUMNS])
        for i, doc_id in enumerate(matrix.doc_ids):
            writer.writerow([doc_id, int(matrix.labels[i]), *(repr(float(v)) for v in matrix.probs[i])])


def read_score_matrix(path: str | Path) -> ScoreMatrix:
    path = Path(path)
    if not path.exists():
        raise DataContractError(f"score matrix not found: {path}")
    ids: list[str] = []
    labels: list[int] = []
    rows: list[list[float]] = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["doc_id", "label", *COLUMNS]:
            raise DataContractError(f"unexpected score matrix header in {path}: {header}")
        for row in reader:
            ids.append(row[0])
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:5]])
    return ScoreMatrix(doc_ids=ids, probs=np.array(rows, dtype=np.float64), labels=np.array(labels))
