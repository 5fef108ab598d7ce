"""TPR/FPR bookkeeping and ROC curves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import ParameterError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ParameterError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def tpr(self) -> float:
        """TP / (TP + FN); NaN when there are no positives."""
        den = self.tp + self.fn
        return self.tp / den if den else math.nan

    @property
    def fpr(self) -> float:
        """FP / (TN + FP); NaN when there are no negatives."""
        den = self.tn + self.fp
        return self.fp / den if den else math.nan


def confusion(predicted: Sequence[bool], actual: Sequence[bool]) -> ConfusionCounts:
    """Window-level confusion counts for aligned prediction and label masks."""
    p = np.asarray(predicted, dtype=bool)
    a = np.asarray(actual, dtype=bool)
    if p.shape != a.shape:
        raise ParameterError(f"prediction and label windowings differ: {p.shape} vs {a.shape}")
    return ConfusionCounts(int(np.sum(p & a)), int(np.sum(p & ~a)), int(np.sum(~p & ~a)), int(np.sum(~p & a)))


def pooled_rates(per_device: Iterable[ConfusionCounts], average: str = "micro") -> tuple[float, float]:
    """Average TPR/FPR over devices: pool counts ("micro") or mean of rates ("macro")."""
    counts = list(per_device)
    if average == "micro":
        total = sum(counts, ConfusionCounts())
        return total.tpr, total.fpr
    if average == "macro":
        tprs = [c.tpr for c in counts if not math.isnan(c.tpr)]
        fprs = [c.fpr for c in counts if not math.isnan(c.fpr)]
        return (float(np.mean(tprs)) if tprs else math.nan, float(np.mean(fprs)) if fprs else math.nan)
    raise ParameterError(f"unknown averaging {average!r}")


@dataclass(frozen=True)
class RocPoint:
    parameter: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class RocCurve:
    points: tuple[RocPoint, ...]

    def __iter__(self):
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def at(self, parameter: float) -> RocPoint:
        for p in self.points:
            if p.parameter == parameter:
                return p
        raise KeyError(parameter)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fp:
            w = csv.writer(fp)
            w.writerow(["parameter", "tpr", "fpr"])
            for p in self.points:
                w.writerow([p.parameter, p.tpr, p.fpr])


def roc(sweep: Iterable[tuple[float, float, float]]) -> RocCurve:
    """Build a curve from (parameter, tpr, fpr) sweep results, ordered by parameter."""
    pts = sorted((RocPoint(float(a), float(b), float(c)) for a, b, c in sweep), key=lambda p: p.parameter)
    if len(pts) < 2:
        raise ParameterError("an ROC curve needs at least two sweep points")
    for p in pts:
        for v in (p.tpr, p.fpr):
            if not (math.isnan(v) or 0.0 <= v <= 1.0):
                raise ParameterError(f"rate outside [0, 1] at parameter {p.parameter}")
    return RocCurve(tuple(pts))
