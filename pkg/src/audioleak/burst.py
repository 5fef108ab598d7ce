"""Baseline audio detector: sustained outbound rate above a threshold."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .metrics import ConfusionCounts, confusion, pooled_rates
from .model import DeviceAddress, DeviceTrace, Direction, ParameterError, intervals_mask, window_rates

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BurstParams:
    s_w: float = 1.0
    b_audio: float = 23_000.0
    n: int = 5

    def __post_init__(self):
        if not self.s_w > 0:
            raise ParameterError("window size s_w must be positive")
        if not self.b_audio > 0:
            raise ParameterError("rate threshold b_audio must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("consecutive window count n must be an integer >= 1")


@dataclass(frozen=True)
class BurstEvent:
    device: DeviceAddress
    start: float
    end: float
    peak_rate: float
    window_count: int


def _runs(above: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, stop) index runs of True."""
    if not len(above):
        return []
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1).tolist(), np.flatnonzero(edges == -1).tolist()))


def flagged_windows(trace: DeviceTrace, params: BurstParams,
                    direction: Optional[Direction] = Direction.OUTBOUND) -> np.ndarray:
    """Mask of windows that belong to a detected burst."""
    rates = window_rates(trace, params.s_w, direction)
    flags = np.zeros(len(rates), dtype=bool)
    for a, b in _runs(rates > params.b_audio):
        if b - a >= params.n:
            flags[a:b] = True
    return flags


def detect_bursts(trace: DeviceTrace, params: BurstParams = BurstParams(),
                  direction: Optional[Direction] = Direction.OUTBOUND) -> list[BurstEvent]:
    """One event per maximal run of at least n windows with rate strictly above b_audio."""
    rates = window_rates(trace, params.s_w, direction)
    t0 = trace.span[0]
    events = []
    for a, b in _runs(rates > params.b_audio):
        if b - a < params.n:
            continue
        events.append(BurstEvent(trace.device, t0 + a * params.s_w, t0 + b * params.s_w,
                                 float(rates[a:b].max()), b - a))
    return events


def window_bounds(trace: DeviceTrace, s_w: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    start = trace.span[0] + np.arange(count) * s_w
    return start, start + s_w


def label_gaps(span: tuple[float, float], labels: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Label-free stretches of the span; each is one negative at event level."""
    gaps, cur = [], span[0]
    for a, b in sorted(labels):
        if a > cur:
            gaps.append((cur, a))
        cur = max(cur, b)
    if cur < span[1]:
        gaps.append((cur, span[1]))
    return gaps


def event_confusion(events: Sequence[BurstEvent], labels: Sequence[tuple[float, float]],
                    span: tuple[float, float]) -> ConfusionCounts:
    """Event-level counts: labels hit by any event, and label-free gaps holding a stray event."""
    tp = sum(any(e.start < b and a < e.end for e in events) for a, b in labels)
    stray = [e for e in events if not any(e.start < b and a < e.end for a, b in labels)]
    gaps = label_gaps(span, labels)
    fp = sum(any(e.start < g1 and g0 < e.end for e in stray) for g0, g1 in gaps)
    return ConfusionCounts(tp=tp, fp=fp, tn=len(gaps) - fp, fn=len(labels) - tp)


@dataclass(frozen=True)
class BurstSweepPoint:
    n: int
    tpr: float
    fpr: float
    event_tpr: float
    event_fpr: float
    windows: ConfusionCounts
    events: ConfusionCounts


def sweep_n(traces: Mapping[DeviceAddress, DeviceTrace], labels: Sequence, params_base: BurstParams = BurstParams(),
            n_range: tuple[int, int] = (1, 8), average: str = "micro") -> list[BurstSweepPoint]:
    """TPR/FPR for each n in the inclusive range; per-window rates are primary.

    `labels` are objects with ``device``, ``start`` and ``end`` attributes.
    """
    n_min, n_max = n_range
    if n_min < 1 or n_max < n_min:
        raise ParameterError("invalid n range")
    by_dev: dict[DeviceAddress, list[tuple[float, float]]] = {d: [] for d in traces}
    for l in labels:
        by_dev.setdefault(l.device, []).append((l.start, l.end))
    if not any(by_dev.values()):
        log.warning("no audio labels: TPR is undefined")
    counts = [burst_counts(tr, by_dev.get(dev, []), params_base, n_range) for dev, tr in traces.items()]
    return sweep_points(counts, n_range, average)


def burst_counts(trace: DeviceTrace, labels: Sequence[tuple[float, float]], params_base: BurstParams,
                 n_range: tuple[int, int]) -> list[tuple[ConfusionCounts, ConfusionCounts]]:
    """(window, event) confusion counts of one trace for each n in the inclusive range."""
    rates = window_rates(trace, params_base.s_w)
    ws, we = window_bounds(trace, params_base.s_w, len(rates))
    actual = intervals_mask([a for a, _ in labels], [b for _, b in labels], ws, we)
    out = []
    for n in range(n_range[0], n_range[1] + 1):
        params = BurstParams(params_base.s_w, params_base.b_audio, n)
        out.append((confusion(flagged_windows(trace, params), actual),
                    event_confusion(detect_bursts(trace, params), labels, trace.span)))
    return out


def sweep_points(per_device: Sequence[list[tuple[ConfusionCounts, ConfusionCounts]]], n_range: tuple[int, int],
                 average: str = "micro") -> list[BurstSweepPoint]:
    """Average per-device burst_counts results into one point per n."""
    out = []
    for i, n in enumerate(range(n_range[0], n_range[1] + 1)):
        win = [c[i][0] for c in per_device]
        evt = [c[i][1] for c in per_device]
        tpr, fpr = pooled_rates(win, average)
        etpr, efpr = pooled_rates(evt, average)
        out.append(BurstSweepPoint(n, tpr, fpr, etpr, efpr, sum(win, ConfusionCounts()), sum(evt, ConfusionCounts())))
    return out
