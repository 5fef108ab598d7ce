"""JSON/CSV file formats.

traces.json
    ``[{"device": "aa:bb:..", "ip": "192.168.1.11" | null, "span": [start_us, end_us],
    "packets": [{"t_us": int, "size": int, "dir": "out" | "in"}, ...]}, ...]``
labels.json
    ``[{"device": "aa:bb:..", "start": s, "end": s, "cause": str}, ...]``
bursts.json
    ``[{"device", "start", "end", "peak_rate", "window_count"}, ...]``
pvalues.csv
    columns device, t_start, t_end, p_size, p_iat, p_combined, reactive
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .burst import BurstEvent
from .model import DeviceAddress, DeviceTrace
from .simulator import Label

PVALUE_COLUMNS = ("device", "t_start", "t_end", "p_size", "p_iat", "p_combined", "reactive")


def trace_to_dict(trace: DeviceTrace) -> dict:
    return {
        "device": trace.device.mac,
        "ip": trace.device.network_id,
        "span": [trace.start_us, trace.end_us],
        "packets": [
            {"t_us": t, "size": s, "dir": "out" if o else "in"}
            for t, s, o in zip(trace.t_us.tolist(), trace.sizes.tolist(), trace.outbound.tolist())
        ],
    }


def trace_from_dict(d: Mapping) -> DeviceTrace:
    dev = DeviceAddress.parse(d["device"], d.get("ip"))
    pk = d["packets"]
    t = np.fromiter((p["t_us"] for p in pk), dtype=np.int64, count=len(pk))
    s = np.fromiter((p["size"] for p in pk), dtype=np.int64, count=len(pk))
    o = np.fromiter((p["dir"] == "out" for p in pk), dtype=bool, count=len(pk))
    return DeviceTrace(dev, t, s, o, d["span"][0], d["span"][1])


def traces_to_json(traces: Iterable[DeviceTrace]) -> list[dict]:
    return [trace_to_dict(t) for t in sorted(traces, key=lambda t: t.device.hardware_id)]


def traces_from_json(doc: Sequence[Mapping]) -> dict[DeviceAddress, DeviceTrace]:
    out = {}
    for d in doc:
        tr = trace_from_dict(d)
        out[tr.device] = tr
    return out


def save_traces(traces: Mapping[DeviceAddress, DeviceTrace] | Iterable[DeviceTrace], path) -> None:
    items = traces.values() if isinstance(traces, Mapping) else traces
    with open(path, "w") as fp:
        json.dump(traces_to_json(items), fp)


def load_traces(path) -> dict[DeviceAddress, DeviceTrace]:
    with open(path) as fp:
        doc = json.load(fp)
    if isinstance(doc, dict):
        # a probe session file embeds its capture under "traces"
        doc = doc["traces"]
    return traces_from_json(doc)


def labels_to_json(labels: Iterable[Label]) -> list[dict]:
    return [{"device": l.device.mac, "start": l.start, "end": l.end, "cause": l.cause} for l in labels]


def labels_from_json(doc: Sequence[Mapping]) -> list[Label]:
    return [Label(DeviceAddress.parse(d["device"]), float(d["start"]), float(d["end"]), d.get("cause", ""))
            for d in doc]


def save_labels(labels: Iterable[Label], path) -> None:
    with open(path, "w") as fp:
        json.dump(labels_to_json(labels), fp, indent=1)


def load_labels(path) -> list[Label]:
    with open(path) as fp:
        return labels_from_json(json.load(fp))


def bursts_to_json(events: Iterable[BurstEvent]) -> list[dict]:
    return [{"device": e.device.mac, "start": e.start, "end": e.end, "peak_rate": e.peak_rate,
             "window_count": e.window_count} for e in events]


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_pvalues(rows: Iterable[tuple[DeviceAddress, object]], path) -> None:
    """Write (device, ScanRecord) pairs as pvalues.csv."""
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(PVALUE_COLUMNS)
        for dev, r in rows:
            w.writerow([dev.mac, _fmt(r.t_start), _fmt(r.t_end), _fmt(r.p_size), _fmt(r.p_iat),
                        _fmt(r.p_combined), int(r.reactive)])
