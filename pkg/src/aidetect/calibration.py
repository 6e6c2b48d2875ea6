"""Platt scaling: fit sigmoid(a*s + b) to raw detector scores by maximizing
the Bernoulli log-likelihood with damped Newton-Raphson.

Targets are smoothed the classical way, (N+ + 1)/(N+ + 2) for positives and
1/(N- + 2) for negatives, which keeps the optimum finite even when the raw
scores separate the classes perfectly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataContractError, NumericalError
from .semantic import sigmoid

_STEP_TOL = 1e-8


@dataclass
class CalibrationParams:
    a: float
    b: float
    detector_id: str = ""
    fit_loss: float = math.nan
    n_points: int = 0
    loss_trace: list[float] = field(default_factory=list, repr=False)


def _nll(a: float, b: float, s: np.ndarray, t: np.ndarray) -> float:
    p = np.clip(sigmoid(a * s + b), 1e-12, 1.0 - 1e-12)
    return float(-np.sum(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def fit_platt(
    scores: Sequence[float],
    labels: Sequence[int],
    max_iter: int = 100,
    detector_id: str = "",
) -> CalibrationParams:
    """Fit the calibration sigmoid. Converges when the damped Newton step is
    below 1e-8 or after ``max_iter`` iterations; the recorded loss trace is
    non-increasing by construction of the damping."""
    if len(scores) != len(labels):
        raise DataContractError(f"scores ({len(scores)}) and labels ({len(labels)}) differ in length")
    if len(scores) < 4:
        raise DataContractError(f"at least 4 points required to fit, got {len(scores)}")
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isfinite(s)):
        raise NumericalError("non-finite raw scores passed to calibration")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataContractError("calibration requires both classes present")

    t_pos = (n_pos + 1.0) / (n_pos + 2.0)
    t_neg = 1.0 / (n_neg + 2.0)
    t = np.where(y == 1, t_pos, t_neg)

    if np.max(s) == np.min(s):
        # Uninformative scores: slope pinned to zero, intercept matches the
        # smoothed positive rate exactly.
        b = float(np.log(np.mean(t) / (1.0 - np.mean(t))))
        loss = _nll(0.0, b, s, t)
        return CalibrationParams(a=0.0, b=b, detector_id=detector_id, fit_loss=loss, n_points=len(s), loss_trace=[loss])

    a = 0.0
    b = float(np.log((n_pos + 1.0) / (n_neg + 1.0)))
    loss = _nll(a, b, s, t)
    trace = [loss]
    for _ in range(max_iter):
        p = sigmoid(a * s + b)
        grad = np.array([np.sum((p - t) * s), np.sum(p - t)])
        d = p * (1.0 - p)
        hess = np.array([[np.sum(d * s * s), np.sum(d * s)], [np.sum(d * s), np.sum(d)]])
        ridge = 0.0
        while True:
            try:
                step = np.linalg.solve(hess + ridge * np.eye(2), -grad)
                break
            except np.linalg.LinAlgError:
                ridge = max(1e-12, ridge * 10.0)
        eta = 1.0
        new_loss = _nll(a + eta * step[0], b + eta * step[1], s, t)
        halvings = 0
        while new_loss > loss and halvings < 60:
            eta *= 0.5
            halvings += 1
            new_loss = _nll(a + eta * step[0], b + eta * step[1], s, t)
        if new_loss > loss:
            break
        a += eta * step[0]
        b += eta * step[1]
        loss = new_loss
        trace.append(loss)
        if float(np.linalg.norm(eta * step)) < _STEP_TOL:
            break
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NumericalError("calibration diverged to non-finite parameters")
    return CalibrationParams(a=float(a), b=float(b), detector_id=detector_id, fit_loss=loss, n_points=len(s), loss_trace=trace)


def apply_platt(params: CalibrationParams, s):
    """Map a raw score (or array of scores) through the fitted sigmoid."""
    return sigmoid(params.a * np.asarray(s, dtype=np.float64) + params.b) if np.ndim(s) else float(
        sigmoid(params.a * float(s) + params.b)
    )
