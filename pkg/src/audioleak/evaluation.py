"""Desk-scale experiments: controlled datasets, ROC sweeps and frequency curves."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import devices
from .burst import BurstParams, BurstSweepPoint, burst_counts, sweep_points
from .metrics import ConfusionCounts, RocCurve, confusion, pooled_rates, roc
from .model import DeviceTrace, intervals_mask
from .simulator import DeviceModel, Event, EventKind, LabeledTraceSet, Scenario, controlled_scenario, simulate
from .stats import auto_bins, histogram, welch_t_test
from .statprobe import DEFAULT_SCAN_WINDOW, compare_windows, sliding_scan

CONTROLLED_INTERVALS = (60.0, 300.0, 600.0)
FREQUENCY_INTERVALS = (120.0, 300.0, 600.0, 1800.0, 3600.0, 7200.0)
DEFAULT_THRESHOLDS = tuple(np.round(np.linspace(0.0, 1.0, 101), 2).tolist())


def controlled_dataset(models: Sequence[DeviceModel] | None = None,
                       intervals: Sequence[float] = CONTROLLED_INTERVALS, count: int = 100,
                       seed: int = 0) -> list[LabeledTraceSet]:
    """One simulated run per (model, interval), each with `count` wake-word injections."""
    if models is None:
        models = [devices.device(n) for n in devices.CONTROLLED]
    out = []
    for k, (m, iv) in enumerate(itertools.product(models, intervals)):
        out.append(simulate(controlled_scenario(m, iv, count, seed=seed * 1000 + k)))
    return out


def _labels_by_trace(data: LabeledTraceSet):
    for dev, tr in data.traces.items():
        yield tr, [(l.start, l.end) for l in data.labels_for(dev)]


def burst_sweep(datasets: Iterable[LabeledTraceSet], params_base: BurstParams = BurstParams(),
                n_range: tuple[int, int] = (1, 8), average: str = "micro") -> list[BurstSweepPoint]:
    """sweep_n pooled over several labeled sets whose device addresses may repeat."""
    counts = [burst_counts(tr, labs, params_base, n_range)
              for data in datasets for tr, labs in _labels_by_trace(data)]
    return sweep_points(counts, n_range, average)


@dataclass(frozen=True)
class ScanOutcome:
    p_values: np.ndarray
    positive: np.ndarray


def scan_outcome(trace: DeviceTrace, labels: Sequence[tuple[float, float]], window: float = DEFAULT_SCAN_WINDOW,
                 combine_iat: bool = False) -> ScanOutcome:
    """Sliding-scan p-values with ground truth: a pair is positive if a label touches either window."""
    recs = sliding_scan(trace, window, combine_iat=combine_iat)
    starts = np.array([r.t_start for r in recs])
    ends = np.array([r.t_end for r in recs])
    pos = intervals_mask([a for a, _ in labels], [b for _, b in labels], starts, ends)
    return ScanOutcome(np.array([r.p_value for r in recs]), pos)


def stat_sweep(outcomes: Sequence[ScanOutcome], thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
               average: str = "micro") -> RocCurve:
    """ROC over verdict thresholds; a pair is flagged when p < threshold."""
    points = []
    for t in thresholds:
        counts = [confusion(o.p_values < t, o.positive) for o in outcomes]
        tpr, fpr = pooled_rates(counts, average)
        points.append((t, tpr, fpr))
    return roc(points)


def stat_roc(datasets: Iterable[LabeledTraceSet], window: float = DEFAULT_SCAN_WINDOW,
             thresholds: Sequence[float] = DEFAULT_THRESHOLDS, average: str = "micro",
             combine_iat: bool = False) -> RocCurve:
    outcomes = [scan_outcome(tr, labs, window, combine_iat)
                for data in datasets for tr, labs in _labels_by_trace(data)]
    return stat_sweep(outcomes, thresholds, average)


def burst_roc(points: Sequence[BurstSweepPoint], event_level: bool = False) -> RocCurve:
    return roc((p.n, p.event_tpr if event_level else p.tpr, p.event_fpr if event_level else p.fpr)
               for p in points)


def frequency_pvalues(model: DeviceModel, intervals: Sequence[float] = FREQUENCY_INTERVALS,
                      duration: float = 6 * 3600.0, seed: int = 0, word: Optional[str] = None) -> list[float]:
    """p-value of each invocation-interval run against an idle run of the same length.

    Packet sizes of the whole idle run fix the binning; each interval's run is
    histogrammed on the same edges.
    """
    idle = simulate(Scenario(duration, (model,), (), seed)).traces[model.address]
    _, idle_sizes = idle.select(*idle.span)
    edges = auto_bins(idle_sizes)
    ref = histogram(idle_sizes, edges)
    out = []
    for iv in intervals:
        sc = controlled_scenario(model, iv, 10**9, seed + int(iv), word=word, duration=duration)
        tr = simulate(sc).traces[model.address]
        _, sizes = tr.select(*tr.span)
        out.append(welch_t_test(ref, histogram(sizes, edges)).p_value)
    return out


def probing_pvalues(model: DeviceModel, pairs: int = 100, window_d: float = 60.0, repeat_every: float = 10.0,
                    seed: int = 0, word: Optional[str] = None,
                    utterance: float = 1.0) -> tuple[list[float], list[float]]:
    """Alternating idle/probe windows with the word every `repeat_every` seconds.

    Returns (probe p-values, idle p-values). Each probe window is compared with
    the idle window before it; each idle window is compared with the previous
    idle window, so the idle series shows what a quiet window looks like.
    """
    if word is None:
        word = sorted(model.wake_words)[0]
    per = int(np.ceil(window_d / repeat_every - 1e-9))
    events = []
    for i in range(pairs):
        p0 = (2 * i + 1) * window_d
        events += [Event(p0 + k * repeat_every, EventKind.WAKE_WORD, word, utterance) for k in range(per)]
    tr = simulate(Scenario(2 * pairs * window_d, (model,), tuple(events), seed)).traces[model.address]
    probe, idle = [], []
    for i in range(pairs):
        i0 = 2 * i * window_d
        probe.append(compare_windows(tr, (i0, i0 + window_d), (i0 + window_d, i0 + 2 * window_d)).p_value)
        if i:
            prev = i0 - 2 * window_d
            idle.append(compare_windows(tr, (prev, prev + window_d), (i0, i0 + window_d)).p_value)
    return probe, idle


def idle_pvalues(model: DeviceModel, trials: int = 500, window_d: float = 60.0, seed: int = 0) -> list[float]:
    """Adjacent idle-window comparisons from one long quiet run."""
    tr = simulate(Scenario(2 * trials * window_d, (model,), (), seed)).traces[model.address]
    out = []
    for i in range(trials):
        a = 2 * i * window_d
        out.append(compare_windows(tr, (a, a + window_d), (a + window_d, a + 2 * window_d)).p_value)
    return out
