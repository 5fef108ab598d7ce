"""Probing campaigns: alternate idle and probe windows, then judge each device.

A session runs one control loop. For every word and repetition it records an
idle window of ``window_d`` seconds, then a probe window of the same length in
which the word is played every ``repeat_every`` seconds. Emission times are
measured on the session clock, which the capture shares, so traces and the
timeline line up without post-hoc alignment.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from .burst import BurstEvent, BurstParams, detect_bursts
from .ingest import CaptureSource, LiveCapture, ingest
from .model import US_PER_S, DeviceAddress, DeviceTrace, ParameterError
from .simulator import DeviceModel, Event, EventKind, Scenario, simulate
from .statprobe import DEFAULT_THRESHOLD, InsufficientData, ProbeComparison, compare_windows

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

# analysis windows start this long before the first emission of a probe window
GUARD = 0.5


@dataclass(frozen=True)
class ProbeWord:
    text: str
    audio: Optional[str] = None
    # playback length used by sinks that cannot measure it (simulator loopback)
    utterance: float = 1.0


@dataclass(frozen=True)
class ProbePlan:
    words: tuple[ProbeWord, ...]
    window_d: float = 60.0
    repeat_every: float = 10.0
    repetitions: int = 3
    devices: Optional[frozenset[str]] = None
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not self.words:
            raise ParameterError("a probe plan needs at least one word")
        if not self.window_d > self.repeat_every > 0:
            raise ParameterError("need window_d > repeat_every > 0")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ParameterError("threshold must lie in [0, 1]")

    @property
    def emissions_per_window(self) -> int:
        return int(math.ceil(self.window_d / self.repeat_every - 1e-9))

    def allows(self, device: DeviceAddress) -> bool:
        return self.devices is None or device.mac in self.devices or str(device.network_id) in self.devices

    def to_dict(self) -> dict:
        return {
            "words": [{"text": w.text, "audio": w.audio, "utterance": w.utterance} for w in self.words],
            "window_d": self.window_d,
            "repeat_every": self.repeat_every,
            "repetitions": self.repetitions,
            "devices": sorted(self.devices) if self.devices is not None else None,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProbePlan":
        words = []
        for w in d.get("words", ()):
            if isinstance(w, str):
                words.append(ProbeWord(w))
            else:
                words.append(ProbeWord(w["text"], w.get("audio"), float(w.get("utterance", 1.0))))
        devices = d.get("devices")
        return cls(
            words=tuple(words),
            window_d=float(d.get("window_d", 60.0)),
            repeat_every=float(d.get("repeat_every", 10.0)),
            repetitions=int(d.get("repetitions", 3)),
            devices=frozenset(x.lower() for x in devices) if devices is not None else None,
            threshold=float(d.get("threshold", DEFAULT_THRESHOLD)),
        )


def load_plan(path) -> ProbePlan:
    """Read a TOML plan file.

    Keys: window_d, repeat_every, repetitions, threshold, optional devices
    (MAC or IP strings) and a ``[[words]]`` array with text and audio.
    """
    with open(path, "rb") as fp:
        return ProbePlan.from_dict(tomllib.load(fp))


# clocks


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep_until(self, t: float) -> None: ...


class MonotonicClock:
    """Session seconds since construction, driven by ``time.monotonic``.

    ``epoch_us`` is the Unix time of session zero, for aligning live captures
    whose frames carry wall-clock timestamps.
    """

    def __init__(self):
        self._t0 = time.monotonic()
        self.epoch_us = int(time.time() * US_PER_S)

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep_until(self, t: float) -> None:
        delay = t - self.now()
        if delay > 0:
            time.sleep(delay)


class WallClock:
    """Unix seconds; matches timestamps written by external loggers."""

    def now(self) -> float:
        return time.time()

    def sleep_until(self, t: float) -> None:
        delay = t - self.now()
        if delay > 0:
            time.sleep(delay)


class VirtualClock:
    """Clock that jumps instead of sleeping; used with simulated captures."""

    epoch_us = 0

    def __init__(self, start: float = 0.0):
        self.t = start

    def now(self) -> float:
        return self.t

    def sleep_until(self, t: float) -> None:
        self.t = max(self.t, t)

    def advance(self, dt: float) -> None:
        self.t += dt


# sinks


class SinkError(RuntimeError):
    pass


class AudioSink(Protocol):
    def play(self, word: ProbeWord) -> tuple[float, float]:
        """Play `word`, blocking until done; return measured (start, stop)."""
        ...


class CommandSink:
    """Plays audio through an external player, e.g. ``aplay {audio}``."""

    def __init__(self, command: str | Sequence[str], clock: Clock, timeout: float = 30.0):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.clock = clock
        self.timeout = timeout

    def play(self, word: ProbeWord) -> tuple[float, float]:
        if not word.audio:
            raise SinkError(f"no audio file for probe word {word.text!r}")
        argv = [a.replace("{audio}", word.audio).replace("{text}", word.text) for a in self.argv]
        if argv == self.argv:
            argv.append(word.audio)
        start = self.clock.now()
        try:
            res = subprocess.run(argv, capture_output=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SinkError(f"player failed: {exc}") from exc
        stop = self.clock.now()
        if res.returncode != 0:
            raise SinkError(f"player exited with {res.returncode}: {res.stderr.decode(errors='replace').strip()}")
        return start, stop


# captures


class Capture(Protocol):
    def start(self) -> None: ...

    def stop(self) -> dict[DeviceAddress, DeviceTrace]: ...


class SimulatedCapture:
    """Records loopback emissions and synthesizes the fleet's traffic on stop."""

    def __init__(self, devices: Sequence[DeviceModel], clock: VirtualClock, seed: int = 0):
        self.devices = tuple(devices)
        self.clock = clock
        self.seed = seed
        self.events: list[Event] = []

    def inject(self, time_s: float, word: str, utterance: float) -> None:
        self.events.append(Event(time_s, EventKind.WAKE_WORD, word, utterance))

    def start(self) -> None:
        self.events.clear()

    def stop(self) -> dict[DeviceAddress, DeviceTrace]:
        scenario = Scenario(self.clock.now(), self.devices, tuple(self.events), self.seed)
        return simulate(scenario).traces


class LoopbackSink:
    """Injects the word into a simulated capture and advances the virtual clock."""

    def __init__(self, capture: SimulatedCapture, clock: VirtualClock):
        self.capture = capture
        self.clock = clock

    def play(self, word: ProbeWord) -> tuple[float, float]:
        start = self.clock.now()
        self.capture.inject(start, word.text, word.utterance)
        self.clock.advance(word.utterance)
        return start, self.clock.now()


class AdapterCapture:
    """Runs ingestion of a live adapter on a background thread.

    The adapter should stop iterating when its ``stop()`` method is called
    (as :class:`~audioleak.ingest.TailingPcapAdapter` does).
    """

    def __init__(self, source: CaptureSource, clock: MonotonicClock):
        if not isinstance(source.kind, LiveCapture):
            raise ParameterError("AdapterCapture needs a live capture source")
        self.source = source
        self.clock = clock
        self._thread: Optional[threading.Thread] = None
        self._result = None
        self._error: Optional[BaseException] = None

    def _run(self) -> None:
        try:
            self._result = ingest(self.source, epoch_us=self.clock.epoch_us)
        except BaseException as exc:  # surfaced from stop()
            self._error = exc

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="audioleak-capture", daemon=True)
        self._thread.start()

    def stop(self) -> dict[DeviceAddress, DeviceTrace]:
        stop = getattr(self.source.kind.handle, "stop", None)
        if stop is not None:
            stop()
        if self._thread is not None:
            self._thread.join()
        if self._error is not None:
            raise self._error
        return self._result[0] if self._result else {}


# sessions


class WindowKind(enum.Enum):
    IDLE = "idle"
    PROBE = "probe"


@dataclass(frozen=True)
class TimelineWindow:
    kind: WindowKind
    word: str
    repetition: int
    start: float
    end: float
    emissions: tuple[tuple[float, float], ...] = ()
    complete: bool = True


@dataclass
class ProbeSession:
    plan: ProbePlan
    timeline: list[TimelineWindow]
    capture: dict[DeviceAddress, DeviceTrace]
    partial: bool = False
    error: Optional[str] = None

    def pairs(self, word: str) -> list[tuple[TimelineWindow, TimelineWindow]]:
        """Complete (idle, probe) pairs for `word` in repetition order."""
        out = []
        for a, b in zip(self.timeline, self.timeline[1:]):
            if (a.kind is WindowKind.IDLE and b.kind is WindowKind.PROBE and a.word == word == b.word
                    and a.repetition == b.repetition and a.complete and b.complete and b.emissions):
                out.append((a, b))
        return out

    @property
    def completed_words(self) -> list[str]:
        """Words whose every repetition finished."""
        return [w.text for w in self.plan.words if len(self.pairs(w.text)) == self.plan.repetitions]


def run_session(plan: ProbePlan, sink: AudioSink, capture: Capture, clock: Clock) -> ProbeSession:
    """Run the plan. A sink failure ends the session early and marks it partial."""
    timeline: list[TimelineWindow] = []
    partial, error = False, None
    capture.start()
    t = clock.now()
    try:
        for word in plan.words:
            for rep in range(plan.repetitions):
                clock.sleep_until(t + plan.window_d)
                timeline.append(TimelineWindow(WindowKind.IDLE, word.text, rep, t, t + plan.window_d))
                p0 = t + plan.window_d
                p1 = p0 + plan.window_d
                emissions = []
                try:
                    for k in range(plan.emissions_per_window):
                        clock.sleep_until(p0 + k * plan.repeat_every)
                        if clock.now() >= p1:
                            break
                        emissions.append(sink.play(word))
                except SinkError as exc:
                    log.error("sink failed on %r repetition %d: %s", word.text, rep, exc)
                    partial, error = True, str(exc)
                    timeline.append(TimelineWindow(WindowKind.PROBE, word.text, rep, p0, max(clock.now(), p0),
                                                   tuple(emissions), complete=False))
                    break
                clock.sleep_until(p1)
                timeline.append(TimelineWindow(WindowKind.PROBE, word.text, rep, p0, p1, tuple(emissions)))
                t = p1
            if partial:
                break
    finally:
        traces = capture.stop()
    return ProbeSession(plan, timeline, traces, partial, error)


# verdicts


class VerdictStatus(enum.Enum):
    REACTIVE = "reactive"
    NOT_REACTIVE = "not_reactive"
    SILENT = "silent"
    INSUFFICIENT_DATA = "insufficient_data"


@dataclass(frozen=True)
class DetectionVerdict:
    device: DeviceAddress
    word: str
    status: VerdictStatus
    p_values: tuple[Optional[float], ...]
    threshold: float
    comparisons: tuple[Optional[ProbeComparison], ...] = ()
    bursts: tuple[BurstEvent, ...] = ()

    @property
    def reactive(self) -> bool:
        return self.status is VerdictStatus.REACTIVE


def analysis_windows(idle: TimelineWindow, probe: TimelineWindow, d: float,
                     guard: float = GUARD) -> tuple[tuple[float, float], tuple[float, float]]:
    """Idle and probe analysis windows of length d meeting at the first emission minus the guard.

    Anchoring on the measured emission instead of the scheduled window start
    keeps sink latency from pushing the first reaction out of the probe window.
    """
    anchor = probe.emissions[0][0] - guard
    return (anchor - d, anchor), (anchor, anchor + d)


def judge(session: ProbeSession, threshold: Optional[float] = None, *, combine_iat: bool = False,
          burst_params: BurstParams = BurstParams()) -> list[DetectionVerdict]:
    """Per device and word: majority vote of the repetitions' comparisons."""
    thr = session.plan.threshold if threshold is None else threshold
    d = session.plan.window_d
    out = []
    for word in dict.fromkeys(w.text for w in session.plan.words):
        pairs = session.pairs(word)
        if not pairs:
            continue
        needed = len(pairs) // 2 + 1
        for dev in sorted(session.capture, key=lambda a: a.hardware_id):
            if not session.plan.allows(dev):
                continue
            trace = session.capture[dev]
            windows = [analysis_windows(i, p, d) for i, p in pairs]
            seen = sum(len(trace.select(w[0], w[1], None)[0]) for pair in windows for w in pair)
            if seen == 0:
                out.append(DetectionVerdict(dev, word, VerdictStatus.SILENT, (None,) * len(pairs), thr,
                                            (None,) * len(pairs)))
                continue
            comps: list[Optional[ProbeComparison]] = []
            for idle_w, probe_w in windows:
                try:
                    comps.append(compare_windows(trace, idle_w, probe_w, thr, combine_iat))
                except InsufficientData:
                    comps.append(None)
            bursts = tuple(e for _, (a, b) in windows for e in detect_bursts(trace.slice(a, b), burst_params))
            valid = [c for c in comps if c is not None]
            if not valid:
                status = VerdictStatus.INSUFFICIENT_DATA
            elif sum(c.reactive for c in valid) >= needed:
                status = VerdictStatus.REACTIVE
            else:
                status = VerdictStatus.NOT_REACTIVE
            pvals = tuple(c.p_value if c is not None else None for c in comps)
            out.append(DetectionVerdict(dev, word, status, pvals, thr, tuple(comps), bursts))
    return out


def _num(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    return float(v)


def verdict_to_dict(v: DetectionVerdict) -> dict:
    return {
        "device": v.device.mac,
        "ip": v.device.network_id,
        "word": v.word,
        "status": v.status.value,
        "reactive": v.reactive,
        "threshold": v.threshold,
        "p_values": [_num(p) for p in v.p_values],
        "evidence": {
            "comparisons": [
                None if c is None else {
                    "p_size": _num(c.p_size), "p_iat": _num(c.p_iat), "p_combined": _num(c.p_combined),
                    "t_score": _num(c.t_score), "df": _num(c.df), "bins": c.bins,
                    "idle_packets": c.idle_packets, "probe_packets": c.probe_packets,
                }
                for c in v.comparisons
            ],
            "bursts": [{"start": e.start, "end": e.end, "peak_rate": e.peak_rate, "window_count": e.window_count}
                       for e in v.bursts],
        },
    }


def verdict_from_dict(d: Mapping) -> DetectionVerdict:
    ev = d.get("evidence", {})
    dev = DeviceAddress.parse(d["device"], d.get("ip"))
    comps = tuple(
        None if c is None else ProbeComparison(
            p_size=c["p_size"], t_score=c["t_score"], df=c["df"], verdict_threshold=d["threshold"],
            p_iat=c["p_iat"], p_combined=c["p_combined"], idle_packets=c["idle_packets"],
            probe_packets=c["probe_packets"], bins=c["bins"])
        for c in ev.get("comparisons", ()))
    bursts = tuple(BurstEvent(dev, b["start"], b["end"], b["peak_rate"], b["window_count"])
                   for b in ev.get("bursts", ()))
    return DetectionVerdict(dev, d["word"], VerdictStatus(d["status"]), tuple(d["p_values"]), d["threshold"],
                            comps, bursts)


def report(verdicts: Iterable[DetectionVerdict], format: str = "json") -> str:
    """Serialize verdicts; "text" gives a summary table."""
    verdicts = list(verdicts)
    if format == "json":
        return json.dumps({"verdicts": [verdict_to_dict(v) for v in verdicts]}, indent=2) + "\n"
    if format != "text":
        raise ParameterError(f"unknown report format {format!r}")
    header = f"{'device':<17}  {'ip':<15}  {'word':<16}  {'status':<17}  p-values"
    lines = [header, "-" * len(header)]
    for v in verdicts:
        ps = " ".join("   -  " if p is None else f"{p:6.4f}" for p in v.p_values)
        lines.append(f"{v.device.mac:<17}  {v.device.network_id or '-':<15}  {v.word:<16}  "
                     f"{v.status.value:<17}  {ps}".rstrip())
    if not verdicts:
        lines.append("(no verdicts)")
    return "\n".join(lines) + "\n"


def session_to_dict(session: ProbeSession) -> dict:
    from .serialize import traces_to_json

    return {
        "plan": session.plan.to_dict(),
        "partial": session.partial,
        "error": session.error,
        "timeline": [
            {"kind": w.kind.value, "word": w.word, "repetition": w.repetition, "start": w.start, "end": w.end,
             "emissions": [list(e) for e in w.emissions], "complete": w.complete}
            for w in session.timeline
        ],
        "traces": traces_to_json(session.capture.values()),
    }


def session_from_dict(d: Mapping) -> ProbeSession:
    from .serialize import traces_from_json

    timeline = [TimelineWindow(WindowKind(w["kind"]), w["word"], w["repetition"], w["start"], w["end"],
                               tuple(tuple(e) for e in w["emissions"]), w.get("complete", True))
                for w in d["timeline"]]
    return ProbeSession(ProbePlan.from_dict(d["plan"]), timeline, traces_from_json(d["traces"]),
                        d.get("partial", False), d.get("error"))


def simulated_session(plan: ProbePlan, devices: Sequence[DeviceModel], seed: int = 0) -> ProbeSession:
    """Run `plan` against simulated devices on a virtual clock."""
    clock = VirtualClock()
    capture = SimulatedCapture(devices, clock, seed)
    return run_session(plan, LoopbackSink(capture, clock), capture, clock)
