"""Shared domain types: device addresses, packets, per-device traces and windows.

Timestamps are kept as integer microseconds relative to the capture epoch so
that multi-hour traces do not accumulate float error. Seconds are exposed via
properties for convenience.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

US_PER_S = 1_000_000


class ParameterError(ValueError):
    """Raised when an operation receives an invalid parameter."""


class Direction(enum.Enum):
    OUTBOUND = "out"
    INBOUND = "in"


def seconds_to_us(t: float) -> int:
    return int(round(t * US_PER_S))


@dataclass(frozen=True)
class DeviceAddress:
    """MAC-level device identity. The IP address is advisory only."""

    hardware_id: bytes
    network_id: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.hardware_id, (bytes, bytearray)) or len(self.hardware_id) != 6:
            raise ParameterError(f"hardware_id must be 6 bytes, got {self.hardware_id!r}")
        object.__setattr__(self, "hardware_id", bytes(self.hardware_id))

    @classmethod
    def parse(cls, mac: str, network_id: Optional[str] = None) -> "DeviceAddress":
        parts = mac.replace("-", ":").split(":")
        if len(parts) != 6:
            raise ParameterError(f"not a MAC address: {mac!r}")
        try:
            raw = bytes(int(p, 16) for p in parts)
        except ValueError as exc:
            raise ParameterError(f"not a MAC address: {mac!r}") from exc
        return cls(raw, network_id)

    @property
    def mac(self) -> str:
        return ":".join(f"{b:02x}" for b in self.hardware_id)

    def __str__(self) -> str:
        return self.mac


@dataclass(frozen=True)
class PacketRecord:
    t_us: int
    payload_size: int
    device: DeviceAddress
    direction: Direction

    def __post_init__(self):
        if self.payload_size < 0:
            raise ParameterError("payload_size must be non-negative")

    @property
    def timestamp(self) -> float:
        return self.t_us / US_PER_S


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64, copy=True)
    a.setflags(write=False)
    return a


class DeviceTrace:
    """Time-ordered packets observed for a single device over a capture span.

    Packets are stored column-wise (timestamps, sizes, direction flags) in
    read-only numpy arrays. The span may extend past the first and last
    packet; silence at either end is part of the observation.
    """

    __slots__ = ("device", "t_us", "sizes", "outbound", "start_us", "end_us")

    def __init__(self, device: DeviceAddress, t_us, sizes, outbound, start_us: int, end_us: int,
                 *, presorted: bool = False):
        t = np.asarray(t_us, dtype=np.int64)
        s = np.asarray(sizes, dtype=np.int64)
        o = np.asarray(outbound, dtype=bool)
        if not (t.shape == s.shape == o.shape) or t.ndim != 1:
            raise ParameterError("timestamp, size and direction columns must have equal length")
        if len(s) and s.min() < 0:
            raise ParameterError("payload sizes must be non-negative")
        if not presorted and len(t) > 1 and np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, s, o = t[order], s[order], o[order]
        if len(t):
            start_us = min(int(start_us), int(t[0]))
            end_us = max(int(end_us), int(t[-1]))
        if end_us < start_us:
            raise ParameterError("span end precedes span start")
        self.device = device
        self.t_us = _frozen(t)
        self.sizes = _frozen(s)
        o = np.array(o, dtype=bool, copy=True)
        o.setflags(write=False)
        self.outbound = o
        self.start_us = int(start_us)
        self.end_us = int(end_us)

    @classmethod
    def from_packets(cls, device: DeviceAddress, packets: Iterable[PacketRecord],
                     span: Optional[tuple[int, int]] = None) -> "DeviceTrace":
        packets = list(packets)
        for p in packets:
            if p.device != device:
                raise ParameterError(f"packet for {p.device} in trace of {device}")
        t = [p.t_us for p in packets]
        s = [p.payload_size for p in packets]
        o = [p.direction is Direction.OUTBOUND for p in packets]
        if span is None:
            span = (min(t), max(t)) if t else (0, 0)
        return cls(device, t, s, o, span[0], span[1])

    @classmethod
    def empty(cls, device: DeviceAddress, start_us: int = 0, end_us: int = 0) -> "DeviceTrace":
        return cls(device, [], [], [], start_us, end_us)

    def __len__(self) -> int:
        return len(self.t_us)

    def __repr__(self) -> str:
        return f"DeviceTrace({self.device}, {len(self)} packets, span={self.span})"

    @property
    def span(self) -> tuple[float, float]:
        return self.start_us / US_PER_S, self.end_us / US_PER_S

    @property
    def duration(self) -> float:
        return (self.end_us - self.start_us) / US_PER_S

    @property
    def packets(self) -> Iterator[PacketRecord]:
        for t, s, o in zip(self.t_us.tolist(), self.sizes.tolist(), self.outbound.tolist()):
            yield PacketRecord(t, s, self.device, Direction.OUTBOUND if o else Direction.INBOUND)

    def direction_mask(self, direction: Optional[Direction]) -> np.ndarray:
        if direction is None:
            return np.ones(len(self), dtype=bool)
        if direction is Direction.OUTBOUND:
            return self.outbound
        return ~self.outbound

    def select(self, start: float, end: float, direction: Optional[Direction] = Direction.OUTBOUND):
        """Timestamps (us) and sizes of packets in [start, end) seconds."""
        lo = np.searchsorted(self.t_us, seconds_to_us(start), side="left")
        hi = np.searchsorted(self.t_us, seconds_to_us(end), side="left")
        mask = self.direction_mask(direction)[lo:hi]
        return self.t_us[lo:hi][mask], self.sizes[lo:hi][mask]

    def slice(self, start: float, end: float) -> "DeviceTrace":
        lo = np.searchsorted(self.t_us, seconds_to_us(start), side="left")
        hi = np.searchsorted(self.t_us, seconds_to_us(end), side="left")
        return DeviceTrace(self.device, self.t_us[lo:hi], self.sizes[lo:hi], self.outbound[lo:hi],
                           seconds_to_us(start), seconds_to_us(end), presorted=True)


@dataclass(frozen=True)
class TimeWindow:
    index: int
    start: float
    duration: float
    byte_total: int

    @property
    def rate(self) -> float:
        """Average rate in bits per second."""
        return self.byte_total * 8 / self.duration

    @property
    def end(self) -> float:
        return self.start + self.duration


def window_byte_totals(trace: DeviceTrace, s_w: float,
                       direction: Optional[Direction] = Direction.OUTBOUND) -> np.ndarray:
    """Per-window byte sums over half-open windows [k*s_w, (k+1)*s_w) from span start.

    A packet exactly at the span end, when the span is a whole number of
    windows, is counted in the last window.
    """
    if not s_w > 0:
        raise ParameterError(f"window size must be positive, got {s_w}")
    w_us = seconds_to_us(s_w)
    if w_us <= 0:
        raise ParameterError(f"window size below timestamp resolution: {s_w}")
    span_us = trace.end_us - trace.start_us
    count = -(-span_us // w_us)
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    mask = trace.direction_mask(direction)
    idx = (trace.t_us[mask] - trace.start_us) // w_us
    np.minimum(idx, count - 1, out=idx)
    return np.bincount(idx, weights=trace.sizes[mask], minlength=count).astype(np.int64)


def window_rates(trace: DeviceTrace, s_w: float,
                 direction: Optional[Direction] = Direction.OUTBOUND) -> np.ndarray:
    return window_byte_totals(trace, s_w, direction) * 8.0 / s_w


def split_windows(trace: DeviceTrace, s_w: float,
                  direction: Optional[Direction] = Direction.OUTBOUND) -> list[TimeWindow]:
    totals = window_byte_totals(trace, s_w, direction)
    t0 = trace.start_us / US_PER_S
    return [TimeWindow(i, t0 + i * s_w, s_w, int(b)) for i, b in enumerate(totals)]


def window_count(duration: float, s_w: float) -> int:
    return math.ceil(seconds_to_us(duration) / seconds_to_us(s_w))


def overlaps(a_start: float, a_end: float, b_start: float, b_end: float) -> bool:
    """True when half-open intervals [a_start, a_end) and [b_start, b_end) intersect."""
    return a_start < b_end and b_start < a_end


def intervals_mask(starts: Sequence[float], ends: Sequence[float],
                   win_start: np.ndarray, win_end: np.ndarray) -> np.ndarray:
    """Boolean mask of windows overlapping any of the given intervals."""
    hit = np.zeros(len(win_start), dtype=bool)
    for a, b in zip(starts, ends):
        lo = np.searchsorted(win_end, a, side="right")
        hi = np.searchsorted(win_start, b, side="left")
        hit[lo:hi] = True
    return hit
