"""Decoding of archived BGP data into a uniform stream of :class:`BgpRecord`.

Two input encodings are supported:

* a subset of binary MRT (RFC 6396): TABLE_DUMP_V2 peer index tables and
  IPv4/IPv6 unicast RIBs, plus BGP4MP / BGP4MP_ET UPDATE messages;
* a line oriented text format, one ``KEY: value`` line per attribute and a
  blank line between records (the layout printed by ``bgpdump -m``-style
  tools for a single RIB entry).

Everything else in an MRT stream is skipped and counted.  Only broken
framing (a truncated header or a length field running past the end of the
stream) is fatal.
"""

from __future__ import annotations

import datetime as dt
import gzip
import io
import ipaddress
import logging
import os
import re
import struct
from dataclasses import dataclass, field, fields
from enum import Enum, IntEnum
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, NamedTuple, Sequence, Union

from .errors import DataError, MrtDecodeError, TextRecordError

log = logging.getLogger(__name__)

IPNetwork = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]

# MRT types / subtypes (RFC 6396)
TABLE_DUMP_V2 = 13
BGP4MP = 16
BGP4MP_ET = 17

PEER_INDEX_TABLE = 1
RIB_IPV4_UNICAST = 2
RIB_IPV6_UNICAST = 4

BGP4MP_MESSAGE = 1
BGP4MP_MESSAGE_AS4 = 4

# BGP path attribute type codes
ATTR_AS_PATH = 2
ATTR_COMMUNITIES = 8
ATTR_MP_REACH_NLRI = 14

AFI_IPV4 = 1
AFI_IPV6 = 2

BGP_UPDATE = 2

NO_EXPORT = 0xFFFFFF01
NO_ADVERTISE = 0xFFFFFF02

WELL_KNOWN_NAMES = {
    "no-export": NO_EXPORT,
    "no-advertise": NO_ADVERTISE,
}
_WELL_KNOWN_BY_VALUE = {v: k for k, v in WELL_KNOWN_NAMES.items()}

_HEADER = struct.Struct("!IHHI")


class RecordKind(str, Enum):
    RIB = "RIB"
    UPDATE = "UPDATE"
    ROUTE_SERVER = "ROUTE_SERVER"


class SegmentType(IntEnum):
    SET = 1
    SEQUENCE = 2


class Segment(NamedTuple):
    kind: SegmentType
    asns: tuple[int, ...]


Community = tuple[int, int]


def community_from_u32(value: int) -> Community:
    return (value >> 16) & 0xFFFF, value & 0xFFFF


def community_to_u32(c: Community) -> int:
    return ((c[0] & 0xFFFF) << 16) | (c[1] & 0xFFFF)


def is_well_known(c: Community) -> bool:
    return c[0] == 0xFFFF


@dataclass(frozen=True)
class BgpRecord:
    """One announced route as seen by one monitor."""

    timestamp: int
    monitor_id: str
    peer_asn: int
    prefix: IPNetwork
    raw_as_path: tuple[Segment, ...]
    communities: tuple[Community, ...] = ()
    locprf: int | None = None
    record_kind: RecordKind = RecordKind.RIB

    def __post_init__(self) -> None:
        if self.record_kind is not RecordKind.ROUTE_SERVER and self.locprf is not None:
            raise ValueError("locprf is only carried by route-server records")
        if self.locprf is not None and self.locprf < 0:
            raise ValueError("locprf must be non-negative")
        if self.record_kind is not RecordKind.ROUTE_SERVER and not self.raw_as_path:
            raise ValueError("RIB and UPDATE records need a non-empty AS path")

    @property
    def ip_version(self) -> int:
        return self.prefix.version

    @property
    def message_id(self) -> tuple[str, int, str]:
        # MRT has no global message id; this triple stands in for one
        return (self.monitor_id, self.timestamp, str(self.prefix))

    @property
    def day(self) -> dt.date:
        return dt.datetime.fromtimestamp(self.timestamp, dt.timezone.utc).date()

    def flat_path(self) -> list[int]:
        return [asn for seg in self.raw_as_path for asn in seg.asns]


@dataclass
class DecodeStats:
    """Counters collected while decoding; additive across files."""

    files: int = 0
    records: int = 0
    mrt_records: int = 0
    skipped_unsupported: int = 0
    skipped_malformed: int = 0
    skipped_empty_path: int = 0
    withdrawals: int = 0
    rejected_text: int = 0
    errors: int = 0
    unreadable_files: list[str] = field(default_factory=list)
    per_file: dict[str, int] = field(default_factory=dict)

    def merge(self, other: "DecodeStats") -> "DecodeStats":
        for f in fields(self):
            mine, theirs = getattr(self, f.name), getattr(other, f.name)
            if isinstance(mine, int):
                setattr(self, f.name, mine + theirs)
        self.unreadable_files.extend(other.unreadable_files)
        self.per_file.update(other.per_file)
        return self

    @property
    def skipped(self) -> int:
        return self.skipped_unsupported + self.skipped_malformed + self.skipped_empty_path


class _Malformed(Exception):
    pass


class _Reader:
    """Bounds-checked cursor over one MRT record body."""

    __slots__ = ("buf", "pos", "end")

    def __init__(self, buf: bytes, pos: int = 0, end: int | None = None):
        self.buf = buf
        self.pos = pos
        self.end = len(buf) if end is None else end

    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise _Malformed(f"need {n} bytes, {self.remaining()} left")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def sub(self, n: int) -> "_Reader":
        if n < 0 or self.pos + n > self.end:
            raise _Malformed(f"need {n} bytes, {self.remaining()} left")
        r = _Reader(self.buf, self.pos, self.pos + n)
        self.pos += n
        return r


def _read_prefix(r: _Reader, version: int) -> IPNetwork:
    plen = r.u8()
    width = 32 if version == 4 else 128
    if plen > width:
        raise _Malformed(f"prefix length {plen} exceeds {width}")
    raw = r.take((plen + 7) // 8).ljust(width // 8, b"\x00")
    addr = ipaddress.ip_address(raw)
    return ipaddress.ip_network((addr, plen), strict=False)


def _read_ip(r: _Reader, version: int) -> str:
    return str(ipaddress.ip_address(r.take(4 if version == 4 else 16)))


@dataclass
class _Attrs:
    segments: list[Segment] = field(default_factory=list)
    communities: list[Community] = field(default_factory=list)
    mp_prefixes: list[IPNetwork] = field(default_factory=list)


def _parse_attrs(r: _Reader, asn_size: int, rib_entry: bool) -> _Attrs:
    out = _Attrs()
    while r.remaining():
        flags = r.u8()
        code = r.u8()
        length = r.u16() if flags & 0x10 else r.u8()
        body = r.sub(length)
        if code == ATTR_AS_PATH:
            while body.remaining():
                seg_type = body.u8()
                count = body.u8()
                raw = body.take(count * asn_size)
                asns = tuple(int.from_bytes(raw[i:i + asn_size], "big")
                             for i in range(0, len(raw), asn_size))
                if seg_type in (SegmentType.SET, SegmentType.SEQUENCE):
                    out.segments.append(Segment(SegmentType(seg_type), asns))
                elif seg_type not in (3, 4):  # confederation segments are dropped
                    raise _Malformed(f"bad AS_PATH segment type {seg_type}")
        elif code == ATTR_COMMUNITIES:
            if length % 4:
                raise _Malformed("COMMUNITIES length not a multiple of 4")
            while body.remaining():
                out.communities.append((body.u16(), body.u16()))
        elif code == ATTR_MP_REACH_NLRI and not rib_entry:
            afi = body.u16()
            body.u8()  # SAFI
            body.take(body.u8())  # next hop
            body.u8()  # reserved
            if afi not in (AFI_IPV4, AFI_IPV6):
                continue
            version = 4 if afi == AFI_IPV4 else 6
            while body.remaining():
                out.mp_prefixes.append(_read_prefix(body, version))
    return out


@dataclass
class _Peer:
    ip: str
    asn: int


class MrtDecoder:
    """Stateful MRT decoder: the peer index table persists across records."""

    def __init__(self, stats: DecodeStats | None = None, monitor_prefix: str = ""):
        self.stats = stats if stats is not None else DecodeStats()
        self.monitor_prefix = monitor_prefix
        self.peers: list[_Peer] | None = None

    def _monitor(self, ip: str) -> str:
        return f"{self.monitor_prefix}/{ip}" if self.monitor_prefix else ip

    def decode(self, source: bytes | bytearray | BinaryIO) -> Iterator[BgpRecord]:
        stream = io.BytesIO(bytes(source)) if isinstance(source, (bytes, bytearray, memoryview)) else source
        offset = 0
        while True:
            header = stream.read(_HEADER.size)
            if not header:
                return
            if len(header) < _HEADER.size:
                raise MrtDecodeError("truncated MRT header", offset)
            ts, mtype, subtype, length = _HEADER.unpack(header)
            body = stream.read(length)
            if len(body) < length:
                raise MrtDecodeError(
                    f"record length {length} exceeds remaining {len(body)} bytes", offset)
            self.stats.mrt_records += 1
            try:
                records = self._dispatch(ts, mtype, subtype, body)
            except _Malformed as exc:
                self.stats.skipped_malformed += 1
                log.debug("malformed MRT record at offset %d: %s", offset, exc)
                records = []
            except ValueError as exc:
                self.stats.skipped_malformed += 1
                log.debug("invalid MRT record at offset %d: %s", offset, exc)
                records = []
            for rec in records:
                self.stats.records += 1
                yield rec
            offset += _HEADER.size + length

    def _dispatch(self, ts: int, mtype: int, subtype: int, body: bytes) -> list[BgpRecord]:
        if mtype == TABLE_DUMP_V2:
            if subtype == PEER_INDEX_TABLE:
                self._peer_index(_Reader(body))
                return []
            if subtype in (RIB_IPV4_UNICAST, RIB_IPV6_UNICAST):
                return self._rib(ts, 4 if subtype == RIB_IPV4_UNICAST else 6, _Reader(body))
        elif mtype in (BGP4MP, BGP4MP_ET) and subtype in (BGP4MP_MESSAGE, BGP4MP_MESSAGE_AS4):
            r = _Reader(body)
            if mtype == BGP4MP_ET:
                r.u32()  # microsecond timestamp
            return self._bgp4mp(ts, 4 if subtype == BGP4MP_MESSAGE_AS4 else 2, r)
        self.stats.skipped_unsupported += 1
        return []

    def _peer_index(self, r: _Reader) -> None:
        r.u32()  # collector BGP id
        r.take(r.u16())  # view name
        peers = []
        for _ in range(r.u16()):
            ptype = r.u8()
            r.u32()  # peer BGP id
            ip = _read_ip(r, 6 if ptype & 0x01 else 4)
            asn = r.u32() if ptype & 0x02 else r.u16()
            peers.append(_Peer(ip, asn))
        self.peers = peers

    def _rib(self, ts: int, version: int, r: _Reader) -> list[BgpRecord]:
        if self.peers is None:
            raise _Malformed("RIB entry before PEER_INDEX_TABLE")
        r.u32()  # sequence number
        prefix = _read_prefix(r, version)
        out = []
        for _ in range(r.u16()):
            idx = r.u16()
            r.u32()  # originated time
            attrs = _parse_attrs(r.sub(r.u16()), asn_size=4, rib_entry=True)
            if idx >= len(self.peers):
                raise _Malformed(f"peer index {idx} out of range")
            if not attrs.segments:
                self.stats.skipped_empty_path += 1
                continue
            peer = self.peers[idx]
            out.append(BgpRecord(ts, self._monitor(peer.ip), peer.asn, prefix,
                                 tuple(attrs.segments), tuple(attrs.communities),
                                 None, RecordKind.RIB))
        return out

    def _bgp4mp(self, ts: int, asn_size: int, r: _Reader) -> list[BgpRecord]:
        peer_asn = int.from_bytes(r.take(asn_size), "big")
        r.take(asn_size)  # local AS
        r.u16()  # interface index
        afi = r.u16()
        if afi not in (AFI_IPV4, AFI_IPV6):
            raise _Malformed(f"unknown AFI {afi}")
        version = 4 if afi == AFI_IPV4 else 6
        peer_ip = _read_ip(r, version)
        _read_ip(r, version)  # local ip
        r.take(16)  # marker
        msg_len = r.u16()
        msg_type = r.u8()
        if msg_type != BGP_UPDATE:
            self.stats.skipped_unsupported += 1
            return []
        if msg_len < 19:
            raise _Malformed(f"BGP message length {msg_len} too small")
        msg = r.sub(msg_len - 19)
        msg.take(msg.u16())  # withdrawn routes
        attrs = _parse_attrs(msg.sub(msg.u16()), asn_size=asn_size, rib_entry=False)
        announced = []
        while msg.remaining():
            announced.append(_read_prefix(msg, 4))
        announced.extend(attrs.mp_prefixes)
        if not announced:
            self.stats.withdrawals += 1
            return []
        if not attrs.segments:
            self.stats.skipped_empty_path += 1
            return []
        monitor = self._monitor(peer_ip)
        path, comms = tuple(attrs.segments), tuple(attrs.communities)
        return [BgpRecord(ts, monitor, peer_asn, p, path, comms, None, RecordKind.UPDATE)
                for p in announced]


def decode_mrt(source: bytes | BinaryIO, stats: DecodeStats | None = None,
               monitor_prefix: str = "") -> Iterator[BgpRecord]:
    """Lazily decode an MRT stream.

    Raises :class:`MrtDecodeError` on broken framing; unsupported or
    malformed records are counted in ``stats`` and skipped.
    """
    return MrtDecoder(stats, monitor_prefix).decode(source)


# ---------------------------------------------------------------- text format

_TYPE_TO_KIND = {
    "TABLE_DUMP_V2": RecordKind.RIB,
    "TABLE_DUMP": RecordKind.RIB,
    "BGP4MP": RecordKind.UPDATE,
    "BGP4MP_ET": RecordKind.UPDATE,
    "ROUTE_SERVER": RecordKind.ROUTE_SERVER,
}
_PATH_TOKEN = re.compile(r"\{[^}]*\}|[^\s{}]+")
_FROM = re.compile(r"^(?P<ip>\S+)(?:\s+AS(?P<asn>\d+))?$")


def _parse_asn(token: str, line: int) -> int:
    if not token.isdigit():
        raise TextRecordError(f"bad ASN {token!r}", line)
    asn = int(token)
    if asn > 0xFFFFFFFF:
        raise TextRecordError(f"ASN {asn} exceeds 32 bits", line)
    return asn


def parse_as_path(text: str, line: int = 0) -> tuple[Segment, ...]:
    segments: list[Segment] = []
    run: list[int] = []
    for tok in _PATH_TOKEN.findall(text):
        if tok.startswith("{"):
            if run:
                segments.append(Segment(SegmentType.SEQUENCE, tuple(run)))
                run = []
            members = [t for t in re.split(r"[,\s]+", tok[1:-1]) if t]
            if not members:
                raise TextRecordError("empty AS_SET", line)
            segments.append(Segment(SegmentType.SET, tuple(_parse_asn(t, line) for t in members)))
        else:
            run.append(_parse_asn(tok, line))
    if run:
        segments.append(Segment(SegmentType.SEQUENCE, tuple(run)))
    return tuple(segments)


def format_as_path(segments: Iterable[Segment]) -> str:
    out = []
    for seg in segments:
        if seg.kind is SegmentType.SET:
            out.append("{" + ",".join(map(str, seg.asns)) + "}")
        else:
            out.extend(map(str, seg.asns))
    return " ".join(out)


def parse_community(token: str, line: int = 0) -> Community:
    named = WELL_KNOWN_NAMES.get(token.lower())
    if named is not None:
        return community_from_u32(named)
    parts = token.split(":")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise TextRecordError(f"malformed community {token!r}", line)
    hi, lo = int(parts[0]), int(parts[1])
    if hi > 0xFFFF or lo > 0xFFFF:
        raise TextRecordError(f"community {token!r} out of range", line)
    return hi, lo


def format_community(c: Community) -> str:
    name = _WELL_KNOWN_BY_VALUE.get(community_to_u32(c))
    return name if name else f"{c[0]}:{c[1]}"


def _parse_time(value: str, line: int) -> int:
    if value.isdigit():
        return int(value)
    try:
        parsed = dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise TextRecordError(f"bad TIME {value!r}", line) from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=dt.timezone.utc)
    return int(parsed.timestamp())


def parse_text_record(block: str | Sequence[str], first_line: int = 1,
                      collector: str | None = None,
                      default_timestamp: int = 0) -> BgpRecord:
    """Parse one ``KEY: value`` block into a record.

    ``first_line`` is the line number of the block inside its file and is
    used in error messages only.
    """
    lines = block.splitlines() if isinstance(block, str) else list(block)
    values: dict[str, tuple[str, int]] = {}
    head = next((ln.strip() for ln in lines if ln.strip()), "")
    for i, raw in enumerate(lines):
        text = raw.strip()
        if not text:
            continue
        key, sep, value = text.partition(":")
        if not sep:
            raise TextRecordError(f"expected 'KEY: value', got {text!r}", first_line + i)
        values[key.strip()] = (value.strip(), first_line + i)

    for required in ("PREFIX", "ASPATH"):
        if required not in values:
            raise TextRecordError(f"missing {required} in record starting {head!r}", first_line)

    kind = RecordKind.RIB
    if "TYPE" in values:
        tname = values["TYPE"][0].split("/")[0].strip().upper()
        if tname not in _TYPE_TO_KIND:
            raise TextRecordError(f"unknown TYPE {values['TYPE'][0]!r}", values["TYPE"][1])
        kind = _TYPE_TO_KIND[tname]
    elif "LOCPRF" in values:
        kind = RecordKind.ROUTE_SERVER

    text, line = values["PREFIX"]
    try:
        prefix = ipaddress.ip_network(text, strict=False)
    except ValueError:
        raise TextRecordError(f"bad PREFIX {text!r}", line) from None

    path_text, line = values["ASPATH"]
    path = parse_as_path(path_text, line)
    if not path and kind is not RecordKind.ROUTE_SERVER:
        raise TextRecordError(f"empty ASPATH in record starting {head!r}", line)

    peer_ip, peer_asn = "", None
    if "FROM" in values:
        text, line = values["FROM"]
        m = _FROM.match(text)
        if not m:
            raise TextRecordError(f"bad FROM {text!r}", line)
        peer_ip = m.group("ip")
        if m.group("asn"):
            peer_asn = _parse_asn(m.group("asn"), line)
    if peer_asn is None:
        flat = [a for seg in path for a in seg.asns]
        peer_asn = flat[0] if flat else 0

    communities: tuple[Community, ...] = ()
    if "COMMUNITY" in values:
        text, line = values["COMMUNITY"]
        communities = tuple(parse_community(t, line) for t in text.split())

    locprf = None
    if "LOCPRF" in values and kind is RecordKind.ROUTE_SERVER:
        text, line = values["LOCPRF"]
        if not text.isdigit():
            raise TextRecordError(f"bad LOCPRF {text!r}", line)
        locprf = int(text)

    timestamp = default_timestamp
    if "TIME" in values:
        timestamp = _parse_time(*values["TIME"])

    monitor = f"{collector}/{peer_ip}" if collector else peer_ip
    return BgpRecord(timestamp, monitor, peer_asn, prefix, path, communities, locprf, kind)


def format_text_record(rec: BgpRecord) -> str:
    """Inverse of :func:`parse_text_record` for the supported field set."""
    if rec.record_kind is RecordKind.RIB:
        rtype = f"TABLE_DUMP_V2/IPV{rec.ip_version}_UNICAST"
    elif rec.record_kind is RecordKind.UPDATE:
        rtype = "BGP4MP/MESSAGE_AS4"
    else:
        rtype = "ROUTE_SERVER"
    peer_ip = rec.monitor_id.split("/", 1)[-1]
    lines = [
        f"TYPE: {rtype}",
        f"TIME: {rec.timestamp}",
        f"PREFIX: {rec.prefix}",
        f"FROM: {peer_ip} AS{rec.peer_asn}",
        f"ASPATH: {format_as_path(rec.raw_as_path)}",
    ]
    if rec.communities:
        lines.append("COMMUNITY: " + " ".join(format_community(c) for c in rec.communities))
    if rec.locprf is not None:
        lines.append(f"LOCPRF: {rec.locprf}")
    return "\n".join(lines) + "\n"


def iter_text_records(lines: Iterable[str], collector: str | None = None,
                      default_timestamp: int = 0, stats: DecodeStats | None = None,
                      strict: bool = False) -> Iterator[BgpRecord]:
    """Split a text stream on blank lines and parse each block.

    Rejected blocks are counted in ``stats`` (or raised when ``strict``).
    """
    stats = stats if stats is not None else DecodeStats()
    block: list[str] = []
    start = 1

    def flush() -> Iterator[BgpRecord]:
        if not block or all(ln.lstrip().startswith("#") for ln in block):
            return
        body = [ln for ln in block if not ln.lstrip().startswith("#")]
        try:
            rec = parse_text_record(body, start, collector, default_timestamp)
        except (TextRecordError, ValueError) as exc:
            if strict:
                raise
            stats.rejected_text += 1
            stats.errors += 1
            log.warning("rejected text record: %s", exc)
            return
        stats.records += 1
        yield rec

    lineno = 0
    for lineno, raw in enumerate(lines, 1):
        if raw.strip():
            if not block:
                start = lineno
            block.append(raw.rstrip("\n"))
        else:
            yield from flush()
            block = []
    yield from flush()


# ---------------------------------------------------------------- corpus scan

_CORPUS_NAME = re.compile(
    r"^(?P<collector>[^.]+)\.(?P<date>\d{8})(?:\.(?P<time>\d{4}))?\.(?P<ext>mrt|mrt\.gz|txt|txt\.gz)$")
_CORPUS_EXT = re.compile(r"\.(mrt|mrt\.gz|txt|txt\.gz)$")


@dataclass(frozen=True, order=True)
class CorpusFile:
    relpath: str
    path: Path
    collector: str
    date: dt.date
    start_timestamp: int

    @property
    def is_mrt(self) -> bool:
        return ".mrt" in self.path.name

    @property
    def gzipped(self) -> bool:
        return self.path.name.endswith(".gz")


def classify_corpus_file(root: Path, path: Path) -> CorpusFile | None:
    name = path.name
    if not _CORPUS_EXT.search(name):
        return None
    rel = path.relative_to(root).as_posix()
    m = _CORPUS_NAME.match(name)
    if m:
        try:
            day = dt.datetime.strptime(m.group("date"), "%Y%m%d").date()
            hhmm = m.group("time") or "0000"
            start = dt.datetime.combine(day, dt.time(int(hhmm[:2]), int(hhmm[2:])),
                                        dt.timezone.utc)
        except ValueError:
            m = None
    if m:
        return CorpusFile(rel, path, m.group("collector"), day, int(start.timestamp()))
    mtime = dt.datetime.fromtimestamp(os.stat(path).st_mtime, dt.timezone.utc)
    return CorpusFile(rel, path, name, mtime.date(), int(mtime.timestamp()))


def discover_corpus(root: str | Path,
                    date_range: tuple[dt.date | None, dt.date | None] | None = None
                    ) -> list[CorpusFile]:
    """List corpus files under ``root`` in filename order, optionally date-filtered."""
    root = Path(root)
    found = []
    for path in root.rglob("*"):
        if not path.is_file():
            continue
        cf = classify_corpus_file(root, path)
        if cf is None:
            continue
        if date_range is not None:
            lo, hi = date_range
            if (lo is not None and cf.date < lo) or (hi is not None and cf.date > hi):
                continue
        found.append(cf)
    return sorted(found)


def read_corpus_file(cf: CorpusFile, stats: DecodeStats | None = None) -> Iterator[BgpRecord]:
    """Decode one corpus file.  Errors are counted, never raised."""
    stats = stats if stats is not None else DecodeStats()
    stats.files += 1
    before = stats.records
    try:
        if cf.is_mrt:
            opener = gzip.open if cf.gzipped else open
            with opener(cf.path, "rb") as fh:
                yield from decode_mrt(fh, stats, monitor_prefix=cf.collector)
        else:
            opener = gzip.open if cf.gzipped else open
            with opener(cf.path, "rt", encoding="utf-8") as fh:
                yield from iter_text_records(fh, cf.collector, cf.start_timestamp, stats)
    except MrtDecodeError as exc:
        stats.errors += 1
        log.warning("%s: %s", cf.relpath, exc)
    except (OSError, EOFError, UnicodeDecodeError, DataError) as exc:
        stats.errors += 1
        stats.unreadable_files.append(cf.relpath)
        log.warning("%s: unreadable: %s", cf.relpath, exc)
    finally:
        stats.per_file[cf.relpath] = stats.records - before


class CorpusScan:
    """Iterable over every record of a corpus tree; ``stats`` fills as it runs."""

    def __init__(self, root: str | Path,
                 date_range: tuple[dt.date | None, dt.date | None] | None = None):
        self.root = Path(root)
        self.files = discover_corpus(self.root, date_range)
        self.stats = DecodeStats()

    def __iter__(self) -> Iterator[BgpRecord]:
        for cf in self.files:
            yield from read_corpus_file(cf, self.stats)

    @property
    def days(self) -> set[dt.date]:
        return {cf.date for cf in self.files}


def scan_corpus(root: str | Path,
                date_range: tuple[dt.date | None, dt.date | None] | None = None) -> CorpusScan:
    return CorpusScan(root, date_range)
