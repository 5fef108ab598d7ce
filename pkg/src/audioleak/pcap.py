"""Classic libpcap file reading and writing.

Only the classic format is handled (no pcapng), in either byte order and with
microsecond or nanosecond timestamps.

https://wiki.wireshark.org/Development/LibpcapFileFormat
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

MAGIC_US = 0xA1B2C3D4
MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


class PcapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PcapHeader:
    endian: str
    nanosecond: bool
    version: tuple[int, int]
    snaplen: int
    linktype: int


@dataclass(frozen=True)
class Frame:
    t_us: int
    data: bytes
    orig_len: int


def parse_global_header(raw: bytes) -> PcapHeader:
    if len(raw) < GLOBAL_HEADER_LEN:
        raise PcapFormatError("file shorter than the pcap global header")
    for endian in ("<", ">"):
        (magic,) = struct.unpack(endian + "I", raw[:4])
        if magic in (MAGIC_US, MAGIC_NS):
            break
    else:
        raise PcapFormatError(f"bad pcap magic {raw[:4].hex()}")
    _, vmaj, vmin, _zone, _sigfigs, snaplen, linktype = struct.unpack(endian + "IHHiIII", raw[:24])
    return PcapHeader(endian, magic == MAGIC_NS, (vmaj, vmin), snaplen, linktype)


class TruncatedRecord(Exception):
    """A record header or body ended before its stated length."""


def iter_frames(fp: BinaryIO, header: PcapHeader) -> Iterator[Frame]:
    """Yield frames until EOF; raise TruncatedRecord on a short read."""
    rec = struct.Struct(header.endian + "IIII")
    div = 1000 if header.nanosecond else 1
    read = fp.read
    while True:
        hdr = read(RECORD_HEADER_LEN)
        if not hdr:
            return
        if len(hdr) < RECORD_HEADER_LEN:
            raise TruncatedRecord("record header")
        sec, frac, incl, orig = rec.unpack(hdr)
        data = read(incl)
        if len(data) < incl:
            raise TruncatedRecord("record body")
        yield Frame(sec * 1_000_000 + frac // div, data, orig)


def global_header(snaplen: int = 65535, linktype: int = LINKTYPE_ETHERNET, nanosecond: bool = False,
                  endian: str = "<") -> bytes:
    magic = MAGIC_NS if nanosecond else MAGIC_US
    return struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, snaplen, linktype)


def record_header(t_us: int, incl_len: int, orig_len: int, nanosecond: bool = False,
                  endian: str = "<") -> bytes:
    sec, us = divmod(t_us, 1_000_000)
    frac = us * 1000 if nanosecond else us
    return struct.pack(endian + "IIII", sec, frac, incl_len, orig_len)
