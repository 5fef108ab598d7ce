"""Turn captured frames into per-device traces.

Frames come either from a classic pcap file or from a live adapter (any
iterator of :class:`~audioleak.pcap.Frame` with monotone timestamps). Each
IPv4/IPv6-over-Ethernet frame is attributed to the MAC address on the LAN
side; the direction is outbound when the source IP lies in the local network.
"""

from __future__ import annotations

import ipaddress
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Protocol, Sequence, Union

import numpy as np

from .model import US_PER_S, DeviceAddress, DeviceTrace, ParameterError
from .pcap import (
    GLOBAL_HEADER_LEN,
    LINKTYPE_ETHERNET,
    RECORD_HEADER_LEN,
    Frame,
    PcapFormatError,
    TruncatedRecord,
    iter_frames,
    parse_global_header,
)

log = logging.getLogger(__name__)

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = (0x8100, 0x88A8)
IPV6_EXT = {0, 43, 60}
IPPROTO_TCP = 6
IPPROTO_UDP = 17

Network = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]


class LiveAdapter(Protocol):
    """Pull-based source of raw Ethernet frames with monotone timestamps."""

    def __iter__(self) -> Iterator[Frame]: ...


@dataclass(frozen=True)
class PcapFile:
    path: Union[str, os.PathLike]


@dataclass(frozen=True)
class LiveCapture:
    handle: LiveAdapter


@dataclass(frozen=True)
class CaptureSource:
    kind: Union[PcapFile, LiveCapture]
    local_network: tuple[Network, ...] = ()

    @classmethod
    def pcap(cls, path, local_network: Iterable[str] = ("192.168.0.0/16",)) -> "CaptureSource":
        return cls(PcapFile(path), parse_networks(local_network))

    @classmethod
    def live(cls, handle: LiveAdapter, local_network: Iterable[str] = ("192.168.0.0/16",)) -> "CaptureSource":
        return cls(LiveCapture(handle), parse_networks(local_network))


def parse_networks(prefixes: Iterable[str]) -> tuple[Network, ...]:
    return tuple(ipaddress.ip_network(p, strict=False) for p in prefixes)


@dataclass
class IngestReport:
    device_count: int = 0
    packet_count: int = 0
    dropped: int = 0
    span: tuple[float, float] = (0.0, 0.0)
    truncated: bool = False


@dataclass
class _Decoded:
    src_mac: bytes
    dst_mac: bytes
    src_ip: bytes
    dst_ip: bytes
    payload: int


def decode_frame(data: bytes, orig_len: int) -> Optional[_Decoded]:
    """Extract MACs, IPs and transport payload length from an Ethernet frame.

    The payload length comes from the IP header's length field, so it is
    correct even when the capture was snapped short of the full frame.
    Returns None for non-IP or unparseable frames.
    """
    if len(data) < 14:
        return None
    dst_mac, src_mac = data[0:6], data[6:12]
    (etype,) = struct.unpack_from("!H", data, 12)
    off = 14
    while etype in ETH_VLAN:
        if len(data) < off + 4:
            return None
        (etype,) = struct.unpack_from("!H", data, off + 2)
        off += 4
    if etype == ETH_IPV4:
        if len(data) < off + 20:
            return None
        vihl = data[off]
        if vihl >> 4 != 4:
            return None
        ihl = (vihl & 0x0F) * 4
        total, = struct.unpack_from("!H", data, off + 2)
        frag, = struct.unpack_from("!H", data, off + 6)
        proto = data[off + 9]
        src_ip, dst_ip = data[off + 12:off + 16], data[off + 16:off + 20]
        remaining = total - ihl
        off += ihl
        if frag & 0x1FFF:
            return _Decoded(src_mac, dst_mac, src_ip, dst_ip, max(remaining, 0))
    elif etype == ETH_IPV6:
        if len(data) < off + 40:
            return None
        plen, = struct.unpack_from("!H", data, off + 4)
        proto = data[off + 6]
        src_ip, dst_ip = data[off + 8:off + 24], data[off + 24:off + 40]
        remaining = plen
        off += 40
        while proto in IPV6_EXT or proto == 44:
            if len(data) < off + 8:
                return None
            nxt = data[off]
            hlen = 8 if proto == 44 else (data[off + 1] + 1) * 8
            remaining -= hlen
            off += hlen
            proto = nxt
    else:
        return None
    if proto == IPPROTO_TCP:
        if len(data) < off + 13:
            return None
        remaining -= (data[off + 12] >> 4) * 4
    elif proto == IPPROTO_UDP:
        remaining -= 8
    return _Decoded(src_mac, dst_mac, src_ip, dst_ip, max(remaining, 0))


class _Collector:
    """Accumulates attributed packets per device."""

    def __init__(self, local_network: Sequence[Network], epoch_us: int):
        if not local_network:
            raise ParameterError("local_network must be non-empty for direction inference")
        self.local_network = tuple(local_network)
        self.epoch_us = epoch_us
        self._is_local: dict[bytes, bool] = {}
        self._devices: dict[bytes, DeviceAddress] = {}
        self._cols: dict[bytes, tuple[list, list, list]] = {}
        self.report = IngestReport()
        self._first: Optional[int] = None
        self._last: Optional[int] = None

    def _local(self, ip: bytes) -> bool:
        hit = self._is_local.get(ip)
        if hit is None:
            addr = ipaddress.ip_address(ip)
            hit = any(addr in net for net in self.local_network)
            self._is_local[ip] = hit
        return hit

    def add(self, frame: Frame) -> None:
        self.report.packet_count += 1
        d = decode_frame(frame.data, frame.orig_len)
        if d is None:
            self.report.dropped += 1
            return
        if self._local(d.src_ip):
            mac, ip, out = d.src_mac, d.src_ip, True
        elif self._local(d.dst_ip):
            mac, ip, out = d.dst_mac, d.dst_ip, False
        else:
            self.report.dropped += 1
            return
        if mac not in self._devices:
            self._devices[mac] = DeviceAddress(mac, str(ipaddress.ip_address(ip)))
            self._cols[mac] = ([], [], [])
        t = frame.t_us - self.epoch_us
        cols = self._cols[mac]
        cols[0].append(t)
        cols[1].append(d.payload)
        cols[2].append(out)
        if self._first is None or t < self._first:
            self._first = t
        if self._last is None or t > self._last:
            self._last = t

    def finish(self) -> tuple[dict[DeviceAddress, DeviceTrace], IngestReport]:
        start = self._first if self._first is not None else 0
        end = self._last if self._last is not None else 0
        traces = {}
        for mac, dev in self._devices.items():
            t, s, o = self._cols[mac]
            traces[dev] = DeviceTrace(dev, t, s, o, start, end)
        self.report.device_count = len(traces)
        self.report.span = (start / US_PER_S, end / US_PER_S)
        return traces, self.report


def ingest(source: CaptureSource, epoch_us: int = 0) -> tuple[dict[DeviceAddress, DeviceTrace], IngestReport]:
    """Read every frame from `source` and group attributed packets by device.

    `epoch_us` is subtracted from frame timestamps (pcap stores Unix time).
    """
    col = _Collector(source.local_network, epoch_us)
    kind = source.kind
    if isinstance(kind, PcapFile):
        with open(kind.path, "rb") as fp:
            header = parse_global_header(fp.read(GLOBAL_HEADER_LEN))
            if header.linktype != LINKTYPE_ETHERNET:
                raise PcapFormatError(f"unsupported link type {header.linktype}")
            try:
                for frame in iter_frames(fp, header):
                    col.add(frame)
            except TruncatedRecord:
                log.warning("truncated pcap record in %s; keeping partial result", kind.path)
                col.report.packet_count += 1
                col.report.dropped += 1
                col.report.truncated = True
    elif isinstance(kind, LiveCapture):
        last = None
        for frame in kind.handle:
            if last is not None and frame.t_us < last:
                col.report.packet_count += 1
                col.report.dropped += 1
                continue
            last = frame.t_us
            col.add(frame)
    else:
        raise ParameterError(f"unknown capture kind {kind!r}")
    return col.finish()


def merge_traces(a: DeviceTrace, b: DeviceTrace) -> DeviceTrace:
    """Time-sorted union of two traces of the same device; span is the hull."""
    if a.device != b.device:
        raise ParameterError(f"cannot merge traces of {a.device} and {b.device}")
    t = np.concatenate([a.t_us, b.t_us])
    s = np.concatenate([a.sizes, b.sizes])
    o = np.concatenate([a.outbound, b.outbound])
    # lexsort keeps the result independent of argument order for equal timestamps
    order = np.lexsort((o, s, t))
    # an empty, zero-length trace is the identity element
    spans = [(x.start_us, x.end_us) for x in (a, b) if len(x) or x.end_us > x.start_us]
    if not spans:
        spans = [(a.start_us, a.end_us)]
    start, end = min(s0 for s0, _ in spans), max(e0 for _, e0 in spans)
    return DeviceTrace(a.device, t[order], s[order], o[order], start, end, presorted=True)


class TailingPcapAdapter:
    """Live adapter that follows a pcap file while another process appends to it.

    Iteration stops after `idle_timeout` seconds without new data or when
    :meth:`stop` is called.
    """

    def __init__(self, path, poll: float = 0.05, idle_timeout: float = 1.0):
        self.path = path
        self.poll = poll
        self.idle_timeout = idle_timeout
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def _read_exact(self, fp, n: int) -> Optional[bytes]:
        buf = b""
        idle_since = time.monotonic()
        while len(buf) < n:
            chunk = fp.read(n - len(buf))
            if chunk:
                buf += chunk
                idle_since = time.monotonic()
                continue
            if self._stop.is_set() or time.monotonic() - idle_since > self.idle_timeout:
                return None
            time.sleep(self.poll)
        return buf

    def __iter__(self) -> Iterator[Frame]:
        with open(self.path, "rb") as fp:
            raw = self._read_exact(fp, GLOBAL_HEADER_LEN)
            if raw is None:
                return
            header = parse_global_header(raw)
            rec = struct.Struct(header.endian + "IIII")
            div = 1000 if header.nanosecond else 1
            while True:
                hdr = self._read_exact(fp, RECORD_HEADER_LEN)
                if hdr is None:
                    return
                sec, frac, incl, orig = rec.unpack(hdr)
                data = self._read_exact(fp, incl)
                if data is None:
                    return
                yield Frame(sec * 1_000_000 + frac // div, data, orig)
