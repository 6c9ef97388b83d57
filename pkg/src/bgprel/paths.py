"""AS path cleaning and adjacency extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

from .ingest import BgpRecord, Segment, SegmentType


class Link(NamedTuple):
    """An undirected AS adjacency, stored with ``left < right``."""

    left: int
    right: int

    @classmethod
    def of(cls, a: int, b: int) -> "Link":
        if a == b:
            raise ValueError(f"self link {a}-{b}")
        return cls(a, b) if a < b else cls(b, a)

    def other(self, asn: int) -> int:
        if asn == self.left:
            return self.right
        if asn == self.right:
            return self.left
        raise ValueError(f"AS{asn} is not an endpoint of {self}")

    def __str__(self) -> str:
        return f"{self.left}-{self.right}"


class AsnFilter:
    """A set of single ASNs and inclusive ranges, e.g. ``"23456,56320-65535"``."""

    def __init__(self, ranges: Iterable[tuple[int, int]]):
        self.ranges = tuple(sorted((lo, hi) for lo, hi in ranges))
        for lo, hi in self.ranges:
            if lo > hi:
                raise ValueError(f"empty ASN range {lo}-{hi}")

    @classmethod
    def parse(cls, text: str) -> "AsnFilter":
        ranges = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            lo, _, hi = item.partition("-")
            ranges.append((int(lo), int(hi or lo)))
        return cls(ranges)

    def __contains__(self, asn: int) -> bool:
        return any(lo <= asn <= hi for lo, hi in self.ranges)

    def __str__(self) -> str:
        return ",".join(str(lo) if lo == hi else f"{lo}-{hi}" for lo, hi in self.ranges)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AsnFilter) and self.ranges == other.ranges

    def __hash__(self) -> int:
        return hash(self.ranges)


# AS_TRANS plus the private range as filtered for the 2010/2011 corpora
DEFAULT_REJECTED = AsnFilter([(23456, 23456), (56320, 65535)])


class RejectReason(str, Enum):
    RESERVED_ASN = "RESERVED_ASN"
    CYCLE = "CYCLE"
    AS_SET = "AS_SET"
    EMPTY = "EMPTY"


class PathRejected(Exception):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason


@dataclass(frozen=True)
class CleanPath:
    hops: tuple[int, ...]
    prepend_counts: tuple[int, ...]
    source_record: BgpRecord | None = field(default=None, compare=False, repr=False)

    @property
    def origin_asn(self) -> int:
        return self.hops[-1]

    @property
    def observer_asn(self) -> int:
        return self.hops[0]


def sanitize(raw_as_path: Sequence[Segment] | Sequence[int],
             rejected: AsnFilter = DEFAULT_REJECTED,
             source_record: BgpRecord | None = None) -> CleanPath:
    """Collapse prepending and validate a path.

    Accepts either MRT-style segments or a plain sequence of ASNs.  Raises
    :class:`PathRejected` for reserved ASNs, loops, AS_SETs and empty paths.
    """
    asns: list[int] = []
    for item in raw_as_path:
        if isinstance(item, Segment):
            if item.kind is SegmentType.SET:
                raise PathRejected(RejectReason.AS_SET, str(set(item.asns)))
            asns.extend(item.asns)
        else:
            asns.append(int(item))
    if not asns:
        raise PathRejected(RejectReason.EMPTY)

    hops: list[int] = []
    counts: list[int] = []
    for asn in asns:
        if asn in rejected:
            raise PathRejected(RejectReason.RESERVED_ASN, str(asn))
        if hops and hops[-1] == asn:
            counts[-1] += 1
        else:
            hops.append(asn)
            counts.append(1)
    if len(set(hops)) != len(hops):
        raise PathRejected(RejectReason.CYCLE, " ".join(map(str, hops)))
    return CleanPath(tuple(hops), tuple(counts), source_record)


def sanitize_record(rec: BgpRecord, rejected: AsnFilter = DEFAULT_REJECTED) -> CleanPath:
    return sanitize(rec.raw_as_path, rejected, rec)


def extract_links(path: CleanPath) -> list[tuple[Link, int]]:
    """Links in path order, each with the endpoint nearer the observer."""
    hops = path.hops
    return [(Link.of(hops[i], hops[i + 1]), hops[i]) for i in range(len(hops) - 1)]


def prepend_signature(path: CleanPath) -> dict[int, int]:
    sig: dict[int, int] = {}
    for asn, n in zip(path.hops, path.prepend_counts):
        if n > 1 and n > sig.get(asn, 0):
            sig[asn] = n
    return sig
