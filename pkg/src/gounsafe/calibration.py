"""Per-head temperature scaling and inductive conformal prediction sets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from gounsafe.errors import EmptyCalibration, LabelOutOfRange

DEFAULT_EPSILON = 0.1
T_MIN, T_MAX = 0.05, 10.0
MASS_TOL = 1e-12


def temperature_grid(points: int = 801) -> np.ndarray:
    return np.unique(np.concatenate([np.geomspace(T_MIN, T_MAX, points), [1.0]]))


def nll(logits: np.ndarray, gold: np.ndarray, T: float = 1.0) -> float:
    lp = log_softmax(np.asarray(logits, dtype=np.float64) / T, axis=1)
    return float(-lp[np.arange(len(gold)), gold].mean())


def fit_temperature(logits: Sequence, gold: Sequence[int]) -> float:
    """Temperature minimizing calibration NLL on a log grid; ties go to the T nearest 1."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(gold, dtype=np.int64)
    if z.ndim != 2 or len(z) == 0:
        raise EmptyCalibration("temperature scaling needs at least one calibration instance")
    if len(y) != len(z):
        raise ValueError("logits and gold labels differ in length")
    if y.min() < 0 or y.max() >= z.shape[1]:
        raise LabelOutOfRange("gold label outside the logit columns")
    grid = temperature_grid()
    losses = np.array([nll(z, y, t) for t in grid])
    best = losses.min()
    tied = grid[losses <= best + 1e-12 * max(1.0, abs(best))]
    return float(tied[np.argmin(np.abs(np.log(tied)))])


def probabilities(logits: np.ndarray, T: float = 1.0) -> np.ndarray:
    return softmax(np.asarray(logits, dtype=np.float64) / T, axis=-1)


def _ranking(probs: np.ndarray) -> np.ndarray:
    # descending probability, ties broken by class index
    return np.lexsort((np.arange(len(probs)), -probs))


def giq_score(probs: Sequence[float], label: int) -> float:
    """Probability mass of every class ranked at or above ``label``."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < len(p):
        raise LabelOutOfRange(f"label {label} outside {len(p)} classes")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}")
    order = _ranking(p)
    rank = int(np.flatnonzero(order == label)[0])
    return float(min(p[order[: rank + 1]].sum(), 1.0))


def conformal_threshold(scores: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> float:
    """The ceil((m+1)(1-eps))-th smallest score, or 1 if that exceeds m."""
    s = np.sort(np.asarray(scores, dtype=np.float64))
    m = len(s)
    if m == 0:
        raise EmptyCalibration("no calibration scores")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    # rounding guards against (m+1)(1-eps) landing a hair above an integer
    idx = math.ceil(round((m + 1) * (1.0 - epsilon), 9))
    if idx > m:
        return 1.0
    return float(s[max(idx, 1) - 1])


@dataclass
class PredictionSet:
    labels: list[int]
    probabilities: list[float]

    def __contains__(self, label: int) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.labels)


def predict_set(probs: Sequence[float], threshold: float) -> PredictionSet:
    """Add classes by descending probability until their mass reaches ``threshold``."""
    p = np.asarray(probs, dtype=np.float64)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    labels, mass = [], 0.0
    for c in _ranking(p):
        labels.append(int(c))
        mass += p[c]
        if mass >= threshold - MASS_TOL:
            break
    return PredictionSet(labels, [float(p[c]) for c in labels])


@dataclass
class CalibrationArtifact:
    T_what: float
    T_why: float
    threshold_what: float
    threshold_why: float
    epsilon: float = DEFAULT_EPSILON
    calibration_size: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> CalibrationArtifact:
        return cls(**d)

    def with_epsilon(self, epsilon: float, scores_what: Sequence[float],
                     scores_why: Sequence[float]) -> CalibrationArtifact:
        return CalibrationArtifact(self.T_what, self.T_why,
                                   conformal_threshold(scores_what, epsilon),
                                   conformal_threshold(scores_why, epsilon), epsilon,
                                   self.calibration_size)


def calibration_scores(logits: np.ndarray, gold: Sequence[int], T: float) -> np.ndarray:
    p = probabilities(logits, T)
    return np.array([giq_score(row, int(g)) for row, g in zip(p, gold)])


def calibrate(logits_what: np.ndarray, logits_why: np.ndarray, gold_what: Sequence[int],
              gold_why: Sequence[int], epsilon: float = DEFAULT_EPSILON) -> CalibrationArtifact:
    """Fit both temperatures, then both conformal thresholds on the same held-out split."""
    tw = fit_temperature(logits_what, gold_what)
    ty = fit_temperature(logits_why, gold_why)
    return CalibrationArtifact(
        tw, ty,
        conformal_threshold(calibration_scores(logits_what, gold_what, tw), epsilon),
        conformal_threshold(calibration_scores(logits_why, gold_why, ty), epsilon),
        epsilon, len(gold_what))


def predict_sets(logits: np.ndarray, T: float, threshold: float) -> list[PredictionSet]:
    return [predict_set(row, threshold) for row in probabilities(logits, T)]
