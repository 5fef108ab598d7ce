"""Device model library for the simulator.

Idle signatures are artifact choices: only the Echo's burst periods (20 s,
300 s, 10 h) are based on measurements; byte volumes and packet-size
mixtures for every model are tunable parameters.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping

from .model import ParameterError
from .simulator import (AudioStream, DeviceModel, Event, EventKind, IdleBurst, Scenario, SizeMix, Trickle,
                        controlled_scenario, normalize_word)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# many small control packets with an occasional near-MTU record
HEARTBEAT = SizeMix(((0.55, 110, 40), (0.30, 420, 120), (0.15, 1250, 200)))
SYNC = SizeMix(((0.40, 150, 60), (0.60, 1250, 180)))
KEEPALIVE = SizeMix.normal(90, 20)


def echo_dot(activation_model=None) -> DeviceModel:
    return DeviceModel(
        name="EchoDot",
        mac="44:00:49:0a:00:01",
        ip="192.168.1.11",
        idle_bursts=(
            IdleBurst(20.0, 0.05, 3000, 900, 1.5, HEARTBEAT),
            IdleBurst(300.0, 0.05, 12000, 2400, 4.0, SYNC),
            IdleBurst(36000.0, 0.02, 900000, 100000, 30.0, SYNC),
        ),
        trickle=Trickle(1.0, KEEPALIVE),
        audio_stream=AudioStream(bitrate=256_000.0),
        wake_words=frozenset({"alexa"}),
        activation_model=dict(activation_model or {}),
    )


def google_home() -> DeviceModel:
    return DeviceModel(
        name="GoogleHome",
        mac="f4:f5:d8:0b:00:02",
        ip="192.168.1.12",
        idle_bursts=(
            IdleBurst(15.0, 0.10, 2500, 700, 1.0, HEARTBEAT),
            IdleBurst(240.0, 0.05, 10000, 2000, 3.0, SYNC),
        ),
        trickle=Trickle(1.2, KEEPALIVE),
        audio_stream=AudioStream(bitrate=180_000.0, sizes=SizeMix.normal(1100, 180, lo=100)),
        wake_words=frozenset({"hey google", "ok google"}),
    )


def home_pod() -> DeviceModel:
    return DeviceModel(
        name="HomePod",
        mac="f0:b3:ec:0c:00:03",
        ip="192.168.1.13",
        idle_bursts=(
            IdleBurst(25.0, 0.08, 3500, 1000, 2.0, HEARTBEAT),
            IdleBurst(420.0, 0.05, 12000, 2400, 3.5, SYNC),
        ),
        trickle=Trickle(0.8, KEEPALIVE),
        audio_stream=AudioStream(bitrate=200_000.0, sizes=SizeMix.normal(1150, 160, lo=100)),
        wake_words=frozenset({"hey siri"}),
    )


def hive_hub_360() -> DeviceModel:
    return DeviceModel(
        name="HiveHub360",
        mac="00:1e:5e:0d:00:04",
        ip="192.168.1.14",
        idle_bursts=(
            IdleBurst(12.0, 0.10, 1800, 500, 1.0, HEARTBEAT),
            IdleBurst(600.0, 0.05, 9000, 1800, 3.0, SYNC),
        ),
        trickle=Trickle(1.0, KEEPALIVE),
        audio_stream=AudioStream(bitrate=128_000.0, sizes=SizeMix.normal(1000, 200, lo=100)),
        wake_words=frozenset({"dog bark", "glass break"}),
    )


def netatmo_welcome() -> DeviceModel:
    return DeviceModel(
        name="NetatmoWelcome",
        mac="70:ee:50:0e:00:05",
        ip="192.168.1.15",
        idle_bursts=(IdleBurst(10.0, 0.10, 1500, 400, 0.8, HEARTBEAT),),
        trickle=Trickle(2.0, KEEPALIVE),
        audio_stream=AudioStream(bitrate=96_000.0),
        wake_words=frozenset({"smoke alarm"}),
    )


def netatmo_presence() -> DeviceModel:
    return DeviceModel(
        name="NetatmoPresence",
        mac="70:ee:50:0f:00:06",
        ip="192.168.1.16",
        idle_bursts=(
            IdleBurst(30.0, 0.10, 4000, 1000, 2.0, HEARTBEAT),
            IdleBurst(900.0, 0.05, 15000, 3000, 5.0, SYNC),
        ),
        trickle=Trickle(1.5, KEEPALIVE),
        audio_stream=AudioStream(bitrate=96_000.0),
        wake_words=frozenset({"car alarm"}),
    )


def nest_protect() -> DeviceModel:
    # wakes its radio only for alarms or scheduled self-tests; no audio uploads
    return DeviceModel(
        name="NestProtect",
        mac="18:b4:30:10:00:07",
        ip="192.168.1.17",
        idle_bursts=(),
    )


def hive_view() -> DeviceModel:
    return DeviceModel(
        name="HiveView",
        mac="00:1e:5e:11:00:08",
        ip="192.168.1.18",
        idle_bursts=(
            IdleBurst(20.0, 0.10, 2500, 700, 1.0, HEARTBEAT),
            IdleBurst(480.0, 0.05, 10000, 2000, 3.0, SYNC),
        ),
        trickle=Trickle(1.0, KEEPALIVE),
        audio_stream=AudioStream(bitrate=96_000.0),
        wake_words=frozenset({"glass break", "dog bark"}),
    )


LIBRARY = {
    "EchoDot": echo_dot,
    "GoogleHome": google_home,
    "HomePod": home_pod,
    "HiveHub360": hive_hub_360,
    "NetatmoWelcome": netatmo_welcome,
    "NetatmoPresence": netatmo_presence,
    "NestProtect": nest_protect,
    "HiveView": hive_view,
}

# the four models used for the controlled burst and statistical datasets
CONTROLLED = ("EchoDot", "GoogleHome", "HomePod", "HiveHub360")


def device(name: str) -> DeviceModel:
    try:
        return LIBRARY[name]()
    except KeyError:
        raise KeyError(f"unknown device model {name!r}; known: {', '.join(LIBRARY)}") from None


def fleet() -> tuple[DeviceModel, ...]:
    return tuple(factory() for factory in LIBRARY.values())


def load_scenario(path, seed: int | None = None) -> Scenario:
    """Read a scenario TOML file.

    Schema::

        duration = 3600.0            # seconds; optional when [controlled] is given
        seed = 42                    # optional; the `seed` argument wins
        devices = ["EchoDot", "GoogleHome"]   # library names

        [activation.EchoDot]         # optional per-device word -> probability
        "computer" = 0.3

        [[events]]
        time = 30.0
        word = "alexa"
        kind = "wake_word"           # or "noise"
        utterance = 1.0

        [controlled]                 # optional periodic wake-word injection
        device = "EchoDot"
        interval = 300.0
        count = 100
        word = "alexa"               # default: the device's first wake-word
    """
    with open(path, "rb") as fp:
        doc = tomllib.load(fp)
    return scenario_from_dict(doc, seed)


def scenario_from_dict(doc: Mapping, seed: int | None = None) -> Scenario:
    seed = int(doc.get("seed", 0)) if seed is None else seed
    overrides = doc.get("activation", {})
    models = []
    for name in doc.get("devices", ()):
        m = device(name)
        if name in overrides:
            m = replace(m, activation_model={**m.activation_model,
                                             **{normalize_word(k): float(v) for k, v in overrides[name].items()}})
        models.append(m)
    events = [Event(float(e["time"]), EventKind(e.get("kind", "wake_word")), e.get("word", ""),
                    float(e.get("utterance", 1.0))) for e in doc.get("events", ())]
    duration = doc.get("duration")
    ctl = doc.get("controlled")
    if ctl is not None:
        target = next((m for m in models if m.name == ctl["device"]), None) or device(ctl["device"])
        base = controlled_scenario(target, float(ctl["interval"]), int(ctl.get("count", 100)), seed,
                                   word=ctl.get("word"),
                                   duration=float(duration) if duration is not None else None)
        events += base.events
        duration = base.duration if duration is None else duration
        if target not in models:
            models.insert(0, target)
    if duration is None:
        raise ParameterError("scenario needs a duration or a [controlled] section")
    if not models:
        raise ParameterError("scenario lists no devices")
    return Scenario(float(duration), tuple(models), tuple(sorted(events, key=lambda e: e.time)), seed)
