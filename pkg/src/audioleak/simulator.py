"""Synthetic per-device traffic with ground-truth audio labels.

Device models reproduce the coarse behavior seen on real voice assistants:
periodic idle bursts at a few characteristic periods, and an outbound audio
stream at a fixed bitrate whenever the device is activated by a wake-word or
sound. Output is fully determined by the scenario seed.
"""

from __future__ import annotations

import enum
import math
import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import US_PER_S, DeviceAddress, DeviceTrace, ParameterError, seconds_to_us
from .pcap import global_header, record_header

MTU_PAYLOAD = 1460
MIN_PAYLOAD = 40
AUDIO_TRAILER = 1.5


def normalize_word(text: str) -> str:
    return re.sub(r"[^a-z0-9 ]+", "", text.lower()).strip()


@dataclass(frozen=True)
class SizeMix:
    """Packet-size mixture: (weight, mean, sd) components, clamped to [lo, hi]."""

    components: tuple[tuple[float, float, float], ...]
    lo: int = MIN_PAYLOAD
    hi: int = MTU_PAYLOAD

    @classmethod
    def normal(cls, mean: float, sd: float, lo: int = MIN_PAYLOAD, hi: int = MTU_PAYLOAD) -> "SizeMix":
        return cls(((1.0, mean, sd),), lo, hi)

    @property
    def mean(self) -> float:
        total = sum(w for w, _, _ in self.components)
        return sum(w * m for w, m, _ in self.components) / total

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        w = np.array([c[0] for c in self.components], dtype=float)
        pick = rng.choice(len(w), size=n, p=w / w.sum())
        means = np.array([c[1] for c in self.components])[pick]
        sds = np.array([c[2] for c in self.components])[pick]
        sizes = rng.normal(means, sds)
        return np.clip(np.rint(sizes), self.lo, self.hi).astype(np.int64)


@dataclass(frozen=True)
class IdleBurst:
    """A periodic background burst: `bytes_mean` +/- `bytes_sd` outbound over `duration` seconds."""

    period: float
    jitter: float
    bytes_mean: float
    bytes_sd: float
    duration: float
    sizes: SizeMix = SizeMix.normal(400, 150)
    inbound_ratio: float = 0.5

    def __post_init__(self):
        if self.period <= 0:
            raise ParameterError("idle burst period must be positive")


@dataclass(frozen=True)
class Trickle:
    """Steady keep-alive traffic at `rate` packets per second."""

    rate: float
    sizes: SizeMix = SizeMix.normal(120, 20)


@dataclass(frozen=True)
class AudioStream:
    bitrate: float = 256_000.0
    sizes: SizeMix = SizeMix.normal(1200, 150, lo=100)
    pre_roll: float = 0.3
    response_bitrate: float = 64_000.0
    response_duration: float = 2.0

    def __post_init__(self):
        if self.bitrate <= 0:
            raise ParameterError("audio bitrate must be positive")


@dataclass(frozen=True)
class DeviceModel:
    name: str
    mac: str
    ip: str
    idle_bursts: tuple[IdleBurst, ...] = ()
    audio_stream: AudioStream = AudioStream()
    wake_words: frozenset[str] = frozenset()
    activation_model: Mapping[str, float] = field(default_factory=dict)
    trickle: Optional[Trickle] = None

    def __post_init__(self):
        for w, p in self.activation_model.items():
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"activation probability for {w!r} outside [0, 1]")

    @property
    def address(self) -> DeviceAddress:
        return DeviceAddress.parse(self.mac, self.ip)

    def activation_probability(self, word: str) -> float:
        w = normalize_word(word)
        if w in self.activation_model:
            return self.activation_model[w]
        return 1.0 if w in self.wake_words else 0.0


class EventKind(enum.Enum):
    WAKE_WORD = "wake_word"
    NOISE = "noise"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    word: str
    utterance: float = 1.0


@dataclass(frozen=True)
class Scenario:
    duration: float
    devices: tuple[DeviceModel, ...]
    events: tuple[Event, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.duration < 0:
            raise ParameterError("scenario duration must be non-negative")
        for e in self.events:
            if not 0 <= e.time <= self.duration:
                raise ParameterError(f"event at {e.time} outside [0, {self.duration}]")


@dataclass(frozen=True)
class Label:
    device: DeviceAddress
    start: float
    end: float
    cause: str = ""


@dataclass
class LabeledTraceSet:
    traces: dict[DeviceAddress, DeviceTrace]
    labels: list[Label]

    def labels_for(self, device: DeviceAddress) -> list[Label]:
        return [l for l in self.labels if l.device == device]


class _Columns:
    def __init__(self):
        self.t: list[np.ndarray] = []
        self.s: list[np.ndarray] = []
        self.o: list[np.ndarray] = []

    def add(self, t: np.ndarray, sizes: np.ndarray, outbound: bool) -> None:
        self.t.append(np.asarray(t, dtype=np.int64))
        self.s.append(np.asarray(sizes, dtype=np.int64))
        self.o.append(np.full(len(t), outbound, dtype=bool))

    def trace(self, device: DeviceAddress, duration_us: int) -> DeviceTrace:
        if not self.t:
            return DeviceTrace.empty(device, 0, duration_us)
        t = np.concatenate(self.t)
        s = np.concatenate(self.s)
        o = np.concatenate(self.o)
        keep = (t >= 0) & (t <= duration_us)
        t, s, o = t[keep], s[keep], o[keep]
        order = np.lexsort((~o, s, t))
        return DeviceTrace(device, t[order], s[order], o[order], 0, duration_us, presorted=True)


def _uniform_times(rng, start: float, length: float, n: int) -> np.ndarray:
    return np.sort(np.rint((start + rng.uniform(0.0, length, n)) * US_PER_S)).astype(np.int64)


def _emit_bytes(cols: _Columns, rng, sizes: SizeMix, start: float, length: float, total: float,
                outbound: bool) -> None:
    n = max(1, int(round(total / sizes.mean)))
    cols.add(_uniform_times(rng, start, length, n), sizes.sample(rng, n), outbound)


def _idle(cols: _Columns, rng, model: DeviceModel, duration: float) -> None:
    for burst in model.idle_bursts:
        phase = rng.uniform(0.0, burst.period)
        count = int(math.ceil((duration - phase) / burst.period)) + 1 if duration > phase else 0
        for k in range(count):
            t = phase + k * burst.period + rng.uniform(-burst.jitter, burst.jitter) * burst.period
            total = max(burst.sizes.mean, rng.normal(burst.bytes_mean, burst.bytes_sd))
            _emit_bytes(cols, rng, burst.sizes, t, burst.duration, total, True)
            if burst.inbound_ratio > 0:
                _emit_bytes(cols, rng, burst.sizes, t + 0.05, burst.duration, total * burst.inbound_ratio, False)
    if model.trickle is not None and duration > 0:
        n = rng.poisson(model.trickle.rate * duration)
        cols.add(_uniform_times(rng, 0.0, duration, n), model.trickle.sizes.sample(rng, n), True)


def _audio(cols: _Columns, rng, stream: AudioStream, start: float, length: float) -> None:
    gap = stream.sizes.mean * 8.0 / stream.bitrate
    n = max(1, int(round(length / gap)))
    offsets = (np.arange(n) + rng.uniform(-0.3, 0.3, n)) * gap
    t = np.sort(np.rint((start + np.clip(offsets, 0.0, length)) * US_PER_S)).astype(np.int64)
    cols.add(t, stream.sizes.sample(rng, n), True)
    # cloud acknowledgements during upload, spoken response afterwards
    acks = t[::4] + 20_000
    cols.add(acks, np.zeros(len(acks), dtype=np.int64), False)
    if stream.response_duration > 0:
        _emit_bytes(cols, rng, stream.sizes, start + length + 0.2, stream.response_duration,
                    stream.response_bitrate * stream.response_duration / 8.0, False)


def simulate(scenario: Scenario) -> LabeledTraceSet:
    """Generate every device's trace and the audio-transmission labels."""
    duration_us = seconds_to_us(scenario.duration)
    traces: dict[DeviceAddress, DeviceTrace] = {}
    labels: list[Label] = []
    for idx, model in enumerate(scenario.devices):
        addr = model.address
        if addr in traces:
            raise ParameterError(f"duplicate device address {addr}")
        idle_rng = np.random.default_rng([scenario.seed, idx, 0])
        act_rng = np.random.default_rng([scenario.seed, idx, 1])
        audio_rng = np.random.default_rng([scenario.seed, idx, 2])
        cols = _Columns()
        _idle(cols, idle_rng, model, scenario.duration)
        for ev in sorted(scenario.events, key=lambda e: e.time):
            p = model.activation_probability(ev.word)
            # always draw so activation decisions do not depend on earlier outcomes
            if act_rng.random() >= p:
                continue
            start = ev.time + model.audio_stream.pre_roll
            length = ev.utterance + AUDIO_TRAILER
            if start >= scenario.duration:
                continue
            length = min(length, scenario.duration - start)
            _audio(cols, audio_rng, model.audio_stream, start, length)
            labels.append(Label(addr, start, start + length, normalize_word(ev.word)))
        traces[addr] = cols.trace(addr, duration_us)
    return LabeledTraceSet(traces, labels)


def controlled_scenario(device: DeviceModel, interval: float, count: int, seed: int = 0, *,
                        word: Optional[str] = None, duration: Optional[float] = None,
                        utterance: tuple[float, float] = (3.5, 7.0),
                        extra_devices: Sequence[DeviceModel] = ()) -> Scenario:
    """Inject the device's wake-word `count` times, `interval` seconds apart.

    Events sit at the middle of each interval. Utterance lengths are drawn
    uniformly from `utterance` using the seed. If `duration` is given the
    count is capped to fit.
    """
    if interval <= 0:
        raise ParameterError("interval must be positive")
    if word is None:
        word = sorted(device.wake_words)[0] if device.wake_words else ""
    if duration is None:
        duration = count * interval if count > 0 else interval
    else:
        count = min(count, int(duration // interval))
    rng = np.random.default_rng([seed, 0xC0FFEE])
    lengths = rng.uniform(utterance[0], utterance[1], count)
    events = tuple(Event((i + 0.5) * interval, EventKind.WAKE_WORD, word, float(lengths[i]))
                   for i in range(count))
    return Scenario(float(duration), (device, *extra_devices), events, seed)


GATEWAY_MAC = bytes.fromhex("02000000fe01")
REMOTE_IP = bytes([52, 94, 236, 248])


def _ipv4_bytes(ip: Optional[str], mac: bytes) -> bytes:
    if ip:
        return bytes(int(x) for x in ip.split("."))
    return bytes([192, 168, mac[4], mac[5] or 1])


def write_pcap(data: LabeledTraceSet | Mapping[DeviceAddress, DeviceTrace], path, snaplen: int = 54,
               epoch_us: int = 0) -> int:
    """Write all traces as Ethernet/IPv4/TCP frames to a classic pcap file.

    Payload bytes are zero and each record is cut at `snaplen` bytes; the IP
    total-length field carries the real payload size. Returns bytes written.
    """
    traces = data.traces if isinstance(data, LabeledTraceSet) else data
    cols_t, cols_s, cols_o, cols_d = [], [], [], []
    devices = list(traces)
    for i, dev in enumerate(devices):
        tr = traces[dev]
        cols_t.append(tr.t_us)
        cols_s.append(tr.sizes)
        cols_o.append(tr.outbound)
        cols_d.append(np.full(len(tr), i, dtype=np.int64))
    if cols_t:
        t = np.concatenate(cols_t)
        s = np.concatenate(cols_s)
        o = np.concatenate(cols_o)
        d = np.concatenate(cols_d)
        order = np.argsort(t, kind="stable")
        t, s, o, d = t[order], s[order], o[order], d[order]
    else:
        t = s = d = np.zeros(0, dtype=np.int64)
        o = np.zeros(0, dtype=bool)

    # per-device precomputed frame prefixes: (outbound, inbound)
    heads = []
    for dev in devices:
        mac = dev.hardware_id
        ip = _ipv4_bytes(dev.network_id, mac)
        heads.append((
            (GATEWAY_MAC + mac + b"\x08\x00", ip + REMOTE_IP),
            (mac + GATEWAY_MAC + b"\x08\x00", REMOTE_IP + ip),
        ))
    tcp = struct.pack("!HHIIBBHHH", 443, 443, 0, 0, 5 << 4, 0x18, 65535, 0, 0)
    ip_fixed = struct.Struct("!BBHHHBBH")
    written = 0
    with open(path, "wb") as fp:
        hdr = global_header(snaplen)
        fp.write(hdr)
        written += len(hdr)
        buf = []
        for ti, si, oi, di in zip(t.tolist(), s.tolist(), o.tolist(), d.tolist()):
            eth, addrs = heads[di][0 if oi else 1]
            total = 40 + si
            frame = eth + ip_fixed.pack(0x45, 0, total, 0, 0, 64, 6, 0) + addrs + tcp
            orig = 14 + total
            if len(frame) > snaplen:
                frame = frame[:snaplen]
            elif len(frame) < min(snaplen, orig):
                frame = frame + bytes(min(snaplen, orig) - len(frame))
            rec = record_header(ti + epoch_us, len(frame), orig)
            buf.append(rec)
            buf.append(frame)
            written += len(rec) + len(frame)
            if len(buf) >= 8192:
                fp.write(b"".join(buf))
                buf.clear()
        fp.write(b"".join(buf))
    return written
