"""Detect a change in a device's traffic distribution after an audio probe.

The idle window's packet sizes fix the binning; the probe window is binned on
the same edges and the two per-bin count vectors are compared with a
two-sample t-test. A low p-value means the device behaved differently while
being probed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import US_PER_S, DeviceTrace, Direction, ParameterError
from .stats import Feature, auto_bins, fisher_combine, histogram, welch_t_test

DEFAULT_THRESHOLD = 0.42
DEFAULT_DURATION = 60.0
DEFAULT_SCAN_WINDOW = 30.0


class InsufficientData(Exception):
    """The reference window holds too few packets to build a distribution."""


@dataclass(frozen=True)
class ProbeComparison:
    p_size: float
    t_score: float
    df: float
    verdict_threshold: float
    p_iat: Optional[float] = None
    p_combined: Optional[float] = None
    idle_packets: int = 0
    probe_packets: int = 0
    bins: int = 0

    @property
    def p_value(self) -> float:
        return self.p_size if self.p_combined is None else self.p_combined

    @property
    def reactive(self) -> bool:
        return self.p_value < self.verdict_threshold


def _ensure_two_bins(edges: tuple[float, ...]) -> tuple[float, ...]:
    # the t-test needs k >= 2; split a degenerate or single bin in half
    if len(edges) > 2:
        return edges
    lo, hi = edges[0], edges[-1]
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return (lo, (lo + hi) / 2.0, hi)


def _compare_feature(ref: np.ndarray, other: np.ndarray, feature: Feature, pooled: bool):
    edges = _ensure_two_bins(auto_bins(ref))
    return welch_t_test(histogram(ref, edges, feature), histogram(other, edges, feature), pooled=pooled), len(edges) - 1


def _iat(t_us: np.ndarray) -> np.ndarray:
    return np.diff(t_us) / US_PER_S


def compare_samples(idle_t: np.ndarray, idle_s: np.ndarray, probe_t: np.ndarray, probe_s: np.ndarray,
                    threshold: float = DEFAULT_THRESHOLD, combine_iat: bool = False,
                    pooled: bool = False) -> ProbeComparison:
    if len(idle_s) < 2:
        raise InsufficientData(f"reference window has {len(idle_s)} packet(s); need at least 2")
    size_res, k = _compare_feature(idle_s, probe_s, Feature.PACKET_SIZE, pooled)
    p_iat = p_comb = None
    if combine_iat:
        ia, ib = _iat(idle_t), _iat(probe_t)
        if len(ia) >= 2:
            iat_res, _ = _compare_feature(ia, ib, Feature.INTER_ARRIVAL, pooled)
            p_iat = iat_res.p_value
            p_comb = fisher_combine(size_res.p_value, p_iat)
        else:
            p_comb = size_res.p_value
    return ProbeComparison(size_res.p_value, size_res.t_score, size_res.df, threshold, p_iat, p_comb,
                           len(idle_s), len(probe_s), k)


def compare_windows(trace: DeviceTrace, idle: tuple[float, float], probe: tuple[float, float],
                    threshold: float = DEFAULT_THRESHOLD, combine_iat: bool = False, *,
                    direction: Optional[Direction] = Direction.OUTBOUND,
                    pooled: bool = False) -> ProbeComparison:
    """Compare the probe window of `trace` against its idle window.

    Windows are half-open [start, end) in seconds and must not overlap.
    Raises InsufficientData when the idle window has fewer than two packets.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ParameterError("threshold must lie in [0, 1]")
    if idle[1] <= idle[0] or probe[1] <= probe[0]:
        raise ParameterError("windows must have positive duration")
    if idle[0] < probe[1] and probe[0] < idle[1]:
        raise ParameterError("idle and probe windows overlap")
    it, isz = trace.select(idle[0], idle[1], direction)
    pt, psz = trace.select(probe[0], probe[1], direction)
    return compare_samples(it, isz, pt, psz, threshold, combine_iat, pooled)


@dataclass(frozen=True)
class ScanRecord:
    t_start: float
    t_mid: float
    t_end: float
    p_size: float
    p_iat: Optional[float]
    p_combined: Optional[float]
    reactive: bool

    @property
    def p_value(self) -> float:
        return self.p_size if self.p_combined is None else self.p_combined


def sliding_scan(trace: DeviceTrace, window: float = DEFAULT_SCAN_WINDOW, threshold: float = DEFAULT_THRESHOLD,
                 combine_iat: bool = False, *, direction: Optional[Direction] = Direction.OUTBOUND,
                 pooled: bool = False) -> list[ScanRecord]:
    """Compare each pair of adjacent windows, advancing one window at a time.

    The earlier window supplies the binning; if it holds fewer than two
    packets the later one does. Pairs where neither window has two packets
    carry no evidence and get p = 1.
    """
    if not window > 0:
        raise ParameterError("scan window must be positive")
    count = int(math.floor(trace.duration / window + 1e-9))
    t0 = trace.start_us / US_PER_S
    out = []
    for i in range(count - 1):
        a0, a1, b1 = t0 + i * window, t0 + (i + 1) * window, t0 + (i + 2) * window
        at, asz = trace.select(a0, a1, direction)
        bt, bsz = trace.select(a1, b1, direction)
        if len(asz) >= 2:
            cmp = compare_samples(at, asz, bt, bsz, threshold, combine_iat, pooled)
        elif len(bsz) >= 2:
            cmp = compare_samples(bt, bsz, at, asz, threshold, combine_iat, pooled)
        else:
            out.append(ScanRecord(a0, a1, b1, 1.0, None, 1.0 if combine_iat else None, 1.0 < threshold))
            continue
        out.append(ScanRecord(a0, a1, b1, cmp.p_size, cmp.p_iat, cmp.p_combined, cmp.reactive))
    return out
