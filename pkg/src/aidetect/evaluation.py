"""Classifier evaluation: confusion counts, F1/accuracy, rank-based AUC,
the academic false-positive rate, threshold-sweep curves, and the paired
Wilcoxon signed-rank test used for multi-seed significance reporting.

Prediction rule everywhere: a document is called machine-written when its
probability is greater than or equal to the decision threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DataContractError

Confusion = tuple[int, int, int, int]  # (TP, FP, TN, FN)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    f1: float
    auc: float
    academic_fpr: float
    confusion: Confusion
    n: int


@dataclass(frozen=True)
class CurveSeries:
    points: list[tuple[float, float]]
    kind: str  # "roc" | "fpr_vs_threshold"


def confusion(probs: Sequence[float], labels: Sequence[int], threshold: float) -> Confusion:
    if len(probs) != len(labels):
        raise DataContractError(f"probs ({len(probs)}) and labels ({len(labels)}) differ in length")
    if len(probs) == 0:
        raise DataContractError("cannot build a confusion matrix from zero rows")
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    pred = p >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return tp, fp, tn, fn


def f1_accuracy(counts: Confusion) -> tuple[float, float]:
    """F1 and accuracy from confusion counts; precision, recall, and F1 each
    fall back to 0 when their denominator is 0."""
    tp, fp, tn, fn = counts
    n = tp + fp + tn + fn
    if n < 1:
        raise DataContractError("empty confusion counts")
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return f1, (tp + tn) / n


def _check_both_classes(y: np.ndarray) -> None:
    if not ({0, 1} <= set(np.unique(y).tolist())):
        raise DataContractError("metric requires both classes present")


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average of the tied positions."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def auc(probs: Sequence[float], labels: Sequence[int]) -> float:
    """Rank-based (Mann-Whitney) AUC with ties counted one half."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    _check_both_classes(y)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    ranks = _average_ranks(p)
    rank_sum = float(np.sum(ranks[y == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def academic_fpr(
    probs: Sequence[float],
    labels: Sequence[int],
    sources: Sequence[str],
    source_filter: str = "arxiv",
    threshold: float = 0.5,
) -> float:
    """False positive rate restricted to human documents from the given
    source; the pipeline's safety metric on formal-register text."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    src = np.asarray(list(sources))
    mask = (y == 0) & (src == source_filter)
    if not np.any(mask):
        raise DataContractError(f"no human documents with source {source_filter!r}")
    return float(np.mean(p[mask] >= threshold))


def roc_curve(probs: Sequence[float], labels: Sequence[int]) -> CurveSeries:
    """ROC points over every distinct score threshold, from (0,0) to (1,1)."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    _check_both_classes(y)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    points = [(0.0, 0.0)]
    for t in sorted(set(p.tolist()), reverse=True):
        pred = p >= t
        fpr = float(np.sum(pred & (y == 0))) / n_neg
        tpr = float(np.sum(pred & (y == 1))) / n_pos
        points.append((fpr, tpr))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    deduped = [points[0]]
    for pt in points[1:]:
        if pt != deduped[-1]:
            deduped.append(pt)
    return CurveSeries(points=deduped, kind="roc")


def trapezoid_area(series: CurveSeries) -> float:
    pts = series.points
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def fpr_threshold_curve(
    probs: Sequence[float],
    labels: Sequence[int],
    sources: Sequence[str],
    source_filter: str = "arxiv",
    step: float = 0.01,
) -> CurveSeries:
    """Academic FPR sampled on an even threshold grid; non-increasing in the
    threshold because the prediction rule is inclusive."""
    n_steps = round(1.0 / step)
    points = []
    for i in range(n_steps + 1):
        t = i / n_steps
        points.append((t, academic_fpr(probs, labels, sources, source_filter, threshold=t)))
    return CurveSeries(points=points, kind="fpr_vs_threshold")


def curves(
    probs: Sequence[float],
    labels: Sequence[int],
    sources: Sequence[str],
    source_filter: str = "arxiv",
    step: float = 0.01,
) -> tuple[CurveSeries, CurveSeries]:
    return (
        roc_curve(probs, labels),
        fpr_threshold_curve(probs, labels, sources, source_filter, step),
    )


def _exact_min_rank_sum_p(ranks: np.ndarray, w_obs: float) -> float:
    """Exact two-sided p for the min(W+, W-) statistic by dynamic programming
    over all 2^n sign assignments. Ranks are half-integers at worst, so the
    DP runs on doubled ranks."""
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    dist = np.zeros(total + 1, dtype=np.float64)
    dist[0] = 1.0
    for d in doubled:
        shifted = np.zeros_like(dist)
        shifted[d:] = dist[: total + 1 - d]
        dist = dist + shifted
    w2 = int(round(2 * w_obs))
    values = np.arange(total + 1)
    hits = np.minimum(values, total - values) <= w2
    return float(np.sum(dist[hits]) / 2.0 ** len(doubled))


def wilcoxon_signed_rank(paired_a: Sequence[float], paired_b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are discarded; |differences| get average ranks; the
    statistic is W = min(W+, W-). The p-value is exact (full sign-assignment
    enumeration) for n <= 12 and a normal approximation with continuity and
    tie correction beyond that.
    """
    if len(paired_a) != len(paired_b):
        raise DataContractError("paired samples differ in length")
    diffs = np.asarray(paired_a, dtype=np.float64) - np.asarray(paired_b, dtype=np.float64)
    diffs = diffs[diffs != 0.0]
    if len(diffs) == 0:
        raise DataContractError("all paired differences are zero; the test is undefined")
    if len(diffs) < 5:
        raise DataContractError(f"need at least 5 nonzero differences, got {len(diffs)}")
    n = len(diffs)
    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(np.sum(ranks[diffs > 0]))
    w_minus = float(np.sum(ranks[diffs < 0]))
    w = min(w_plus, w_minus)
    if n <= 12:
        return w, _exact_min_rank_sum_p(ranks, w)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    z = (w - mean + 0.5) / math.sqrt(var)
    p = 2.0 * 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return w, min(1.0, p)


def evaluate_scores(
    probs: Sequence[float],
    labels: Sequence[int],
    sources: Sequence[str],
    threshold: float = 0.5,
    source_filter: str = "arxiv",
) -> EvalReport:
    counts = confusion(probs, labels, threshold)
    f1, accuracy = f1_accuracy(counts)
    return EvalReport(
        accuracy=accuracy,
        f1=f1,
        auc=auc(probs, labels),
        academic_fpr=academic_fpr(probs, labels, sources, source_filter, threshold),
        confusion=counts,
        n=len(probs),
    )


@dataclass(frozen=True)
class SignificanceRow:
    metric: str
    baseline: str
    statistic: float | None
    p_value: float | None
    mean_ensemble: float
    mean_baseline: float
    error: str | None = None


@dataclass(frozen=True)
class MultiSeedResult:
    per_seed: list[dict[str, EvalReport]]  # model name -> report, one dict per seed
    significance: list[SignificanceRow]


def significance_table(per_seed: list[dict[str, EvalReport]]) -> list[SignificanceRow]:
    """Paired Wilcoxon of the optimized ensemble against the best single
    detector (best by mean F1 across seeds), on F1 and on academic FPR."""
    singles = ("m1", "m2", "m3")
    best = max(singles, key=lambda m: float(np.mean([r[m].f1 for r in per_seed])))
    rows: list[SignificanceRow] = []
    for metric in ("f1", "academic_fpr"):
        ens = [getattr(r["ensemble"], metric) for r in per_seed]
        base = [getattr(r[best], metric) for r in per_seed]
        try:
            stat, p = wilcoxon_signed_rank(ens, base)
            rows.append(SignificanceRow(metric, best, stat, p, float(np.mean(ens)), float(np.mean(base))))
        except DataContractError as exc:
            rows.append(SignificanceRow(metric, best, None, None, float(np.mean(ens)), float(np.mean(base)), error=str(exc)))
    return rows


def multi_seed_run(
    config,
    seeds: Sequence[int],
    runner: Callable[[object, int], dict[str, EvalReport]] | None = None,
) -> MultiSeedResult:
    """Re-run the full train/calibrate/optimize/evaluate pipeline once per
    seed and test whether the ensemble's gains over the best single detector
    survive seed-to-seed variation."""
    if len(seeds) < 5:
        raise DataContractError(f"need at least 5 seeds, got {len(seeds)}")
    if runner is None:
        from .pipeline import run_single_seed  # local import: pipeline imports this module

        runner = run_single_seed
    per_seed: list[dict[str, EvalReport]] = []
    for seed in seeds:
        try:
            per_seed.append(runner(config, seed))
        except Exception as exc:
            raise type(exc)(f"seed {seed}: {exc}") from exc
    return MultiSeedResult(per_seed=per_seed, significance=significance_table(per_seed))
