import datetime as dt
import ipaddress
import itertools

import pytest

from bgprel.dictionary import load_dictionary
from bgprel.ingest import BgpRecord, RecordKind, Segment, SegmentType

FIG1_RECORD = """\
TYPE: TABLE_DUMP_V2/IPV4_UNICAST
PREFIX: 1.22.73.0/24
FROM: 206.223.115.10 AS4589
ORIGIN: IGP
ASPATH: 4589 15412 18101 45528
NEXT_HOP: 206.223.115.10
COMMUNITY: 4589:2 4589:410 4589:612 4589:14413 15412:604 15412:614 15412:621 15412:705 15412:1431 18101:1344 18101:50120 18101:50420
"""

FIG1_DICTIONARY = (
    "# owner\tpattern\tcategory\tsettable_by\tscope_note\tsource\n"
    "4589\t4589:612\tREL_PEER\tOWNER\tRoute received from a LINX peer\tIRR\n"
    "15412\t15412:705\tREL_CUSTOMER\tOWNER\tRoute received from customer\tIRR\n"
)

DAY0 = int(dt.datetime(2010, 8, 1, tzinfo=dt.timezone.utc).timestamp())
_prefixes = itertools.count(1)


def make_record(path, communities=(), monitor="rrc00/192.0.2.1", day=0, ts=None, prefix=None,
                peer_asn=None, version=4):
    """A RIB record with a fresh prefix unless one is given."""
    if prefix is None:
        n = next(_prefixes)
        prefix = (f"2001:db8:{n:x}::/48" if version == 6
                  else f"{10 + (n >> 16) % 100}.{(n >> 8) & 255}.{n & 255}.0/24")
    segments = []
    for item in path:
        if isinstance(item, set):
            segments.append(Segment(SegmentType.SET, tuple(sorted(item))))
        elif segments and segments[-1].kind is SegmentType.SEQUENCE:
            segments[-1] = Segment(SegmentType.SEQUENCE, segments[-1].asns + (item,))
        else:
            segments.append(Segment(SegmentType.SEQUENCE, (item,)))
    return BgpRecord(
        timestamp=ts if ts is not None else DAY0 + day * 86400,
        monitor_id=monitor,
        peer_asn=peer_asn if peer_asn is not None else path[0],
        prefix=ipaddress.ip_network(prefix),
        raw_as_path=tuple(segments),
        communities=tuple(communities),
        record_kind=RecordKind.RIB,
    )


@pytest.fixture
def fig1_dictionary():
    return load_dictionary(FIG1_DICTIONARY)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
