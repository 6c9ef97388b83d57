import gzip
import os
import tempfile

import mrtparse
import pytest
from hypothesis import given, settings, strategies as st

import mrtbuild
from conftest import FIG1_RECORD
from bgprel.errors import MrtDecodeError, TextRecordError
from bgprel.ingest import (
    NO_EXPORT, BgpRecord, DecodeStats, RecordKind, Segment, SegmentType, community_from_u32,
    decode_mrt, discover_corpus, format_text_record, iter_text_records, parse_as_path,
    parse_community, parse_text_record, scan_corpus,
)


def _reference(blob):
    """(peer_asn, prefix, flat path, communities) per route, decoded by mrtparse."""
    with tempfile.NamedTemporaryFile(delete=False) as fh:
        fh.write(blob)
    out = []
    peers = []
    try:
        for entry in mrtparse.Reader(fh.name):
            d = entry.data
            subtype = next(iter(d["subtype"]))
            mtype = next(iter(d["type"]))
            if mtype == 13 and subtype == 1:
                peers = [int(p["peer_as"]) for p in d["peer_entries"]]
            elif mtype == 13:
                prefix = f"{d['prefix']}/{d['length']}"
                for e in d["rib_entries"]:
                    path, comms = _ref_attrs(e["path_attributes"])
                    out.append((peers[e["peer_index"]], prefix, path, comms))
            else:
                msg = d["bgp_message"]
                path, comms = _ref_attrs(msg["path_attributes"])
                prefixes = [f"{n['prefix']}/{n['length']}" for n in msg["nlri"]]
                for a in msg["path_attributes"]:
                    if next(iter(a["type"])) == 14:
                        prefixes += [f"{n['prefix']}/{n['length']}" for n in a["value"]["nlri"]]
                if path:
                    out += [(int(d["peer_as"]), p, path, comms) for p in prefixes]
    finally:
        os.unlink(fh.name)
    return out


def _ref_attrs(attrs):
    path, comms = [], []
    for a in attrs:
        code = next(iter(a["type"]))
        if code == 2:
            for seg in a["value"]:
                path += [int(x) for x in seg["value"]]
        elif code == 8:
            comms = [tuple(int(x) for x in c.split(":")) for c in a["value"]]
    return path, comms


def _ours(blob):
    return [(r.peer_asn, str(r.prefix), r.flat_path(), list(r.communities))
            for r in decode_mrt(blob)]


class TestMrtDecode:
    def test_rib_matches_reference_decoder(self):
        blob = mrtbuild.sample_rib_file()
        assert _ours(blob) == _reference(blob)

    def test_updates_match_reference_decoder(self):
        blob = mrtbuild.sample_update_file()
        assert _ours(blob) == _reference(blob)

    def test_rib_fields(self):
        recs = list(decode_mrt(mrtbuild.sample_rib_file(), monitor_prefix="rrc00"))
        assert len(recs) == 4
        first = recs[0]
        assert first.record_kind is RecordKind.RIB
        assert first.monitor_id == "rrc00/192.0.2.1"
        assert first.message_id == ("rrc00/192.0.2.1", 1280620800, "1.22.73.0/24")
        assert recs[-1].ip_version == 6

    def test_update_stats(self):
        stats = DecodeStats()
        recs = list(decode_mrt(mrtbuild.sample_update_file(), stats))
        assert [r.record_kind for r in recs] == [RecordKind.UPDATE] * 4
        assert stats.withdrawals == 1
        assert stats.records == 4
        assert stats.mrt_records == 4

    def test_two_byte_asn_message(self):
        recs = list(decode_mrt(mrtbuild.sample_update_file()))
        assert recs[2].flat_path() == [1273, 2000]

    def test_unsupported_type_is_counted(self):
        blob = mrtbuild.mrt(0, 12, 1, b"\x00" * 8) + mrtbuild.sample_rib_file()
        stats = DecodeStats()
        assert len(list(decode_mrt(blob, stats))) == 4
        assert stats.skipped_unsupported == 1

    def test_rib_before_peer_index_is_malformed(self):
        a = mrtbuild.as_path([(2, [1, 2])])
        stats = DecodeStats()
        assert list(decode_mrt(mrtbuild.rib_entry(0, "10.0.0.0/8", [(0, a)]), stats)) == []
        assert stats.skipped_malformed == 1

    def test_truncated_header_raises_with_offset(self):
        blob = mrtbuild.sample_rib_file()
        with pytest.raises(MrtDecodeError) as err:
            list(decode_mrt(blob + blob[:5]))
        assert err.value.offset == len(blob)

    def test_length_past_end_raises(self):
        blob = mrtbuild.sample_rib_file()
        with pytest.raises(MrtDecodeError):
            list(decode_mrt(blob[:-3]))

    def test_bad_inner_length_is_skipped(self):
        body = mrtbuild.sample_update_file()
        first_len = int.from_bytes(body[8:12], "big")
        rec = bytearray(body[:12 + first_len])
        # BGP message length field sits after peer/local AS, ifindex, afi, two v4 addresses, marker
        pos = 12 + 4 + 4 + 2 + 2 + 4 + 4 + 16
        rec[pos:pos + 2] = (0xFFFF).to_bytes(2, "big")
        stats = DecodeStats()
        assert list(decode_mrt(bytes(rec), stats)) == []
        assert stats.skipped_malformed == 1

    def test_as_set_is_kept_as_segment(self):
        a = mrtbuild.as_path([(2, [1, 2]), (1, [3, 4])])
        blob = mrtbuild.peer_index([("192.0.2.1", 1)]) + mrtbuild.rib_entry(0, "10.0.0.0/8", [(0, a)])
        rec, = decode_mrt(blob)
        assert rec.raw_as_path[1] == Segment(SegmentType.SET, (3, 4))

    @settings(max_examples=200, deadline=None)
    @given(st.binary(max_size=300))
    def test_random_bytes_never_crash(self, data):
        stats = DecodeStats()
        try:
            for rec in decode_mrt(data, stats):
                assert isinstance(rec, BgpRecord)
        except MrtDecodeError:
            pass


class TestTextRecords:
    def test_fig1_record(self):
        rec = parse_text_record(FIG1_RECORD, collector="route-views2")
        assert rec.flat_path() == [4589, 15412, 18101, 45528]
        assert rec.peer_asn == 4589
        assert rec.monitor_id == "route-views2/206.223.115.10"
        assert (4589, 612) in rec.communities and len(rec.communities) == 12
        assert rec.record_kind is RecordKind.RIB

    def test_missing_aspath_names_head_line(self):
        with pytest.raises(TextRecordError, match="TYPE: TABLE_DUMP_V2") as err:
            parse_text_record("TYPE: TABLE_DUMP_V2/IPV4_UNICAST\nPREFIX: 1.0.0.0/8\n", first_line=7)
        assert err.value.line == 7

    def test_bad_community(self):
        with pytest.raises(TextRecordError):
            parse_text_record("PREFIX: 1.0.0.0/8\nASPATH: 1 2\nCOMMUNITY: 1:70000\n")

    def test_locprf_only_on_route_server_records(self):
        rs = parse_text_record("PREFIX: 1.0.0.0/8\nASPATH: 1 2\nLOCPRF: 120\n")
        assert rs.record_kind is RecordKind.ROUTE_SERVER and rs.locprf == 120
        rib = parse_text_record("TYPE: TABLE_DUMP_V2\nPREFIX: 1.0.0.0/8\nASPATH: 1 2\nLOCPRF: 120\n")
        assert rib.locprf is None

    def test_well_known_names(self):
        assert parse_community("no-export") == community_from_u32(NO_EXPORT)
        assert parse_community("65535:65281") == community_from_u32(NO_EXPORT)

    def test_as_set_syntax(self):
        assert parse_as_path("1 2 {3,4}") == (
            Segment(SegmentType.SEQUENCE, (1, 2)), Segment(SegmentType.SET, (3, 4)))

    def test_round_trip(self):
        rec = parse_text_record(FIG1_RECORD, collector="c")
        again = parse_text_record(format_text_record(rec), collector="c")
        assert again == rec

    def test_stream_counts_rejects(self):
        text = FIG1_RECORD + "\n# comment\n\nPREFIX: 1.0.0.0/8\n\n" + FIG1_RECORD
        stats = DecodeStats()
        recs = list(iter_text_records(text.splitlines(), "c", 0, stats))
        assert len(recs) == 2
        assert stats.rejected_text == 1


class TestCorpus:
    def test_discovery_and_scan(self, tmp_path):
        (tmp_path / "rrc00.20100801.mrt").write_bytes(mrtbuild.sample_rib_file())
        with gzip.open(tmp_path / "route-views2.20100802.txt.gz", "wt") as fh:
            fh.write(FIG1_RECORD)
        (tmp_path / "notes.md").write_text("ignored")
        files = discover_corpus(tmp_path)
        assert [f.collector for f in files] == ["route-views2", "rrc00"]
        scan = scan_corpus(tmp_path)
        recs = list(scan)
        assert len(recs) == 5
        assert scan.stats.per_file == {"route-views2.20100802.txt.gz": 1, "rrc00.20100801.mrt": 4}
        assert {d.day for d in scan.days} == {1, 2}
        text_rec = next(r for r in recs if r.monitor_id.startswith("route-views2/"))
        assert text_rec.day.isoformat() == "2010-08-02"

    def test_broken_file_is_counted_not_raised(self, tmp_path):
        (tmp_path / "rrc00.20100801.mrt").write_bytes(mrtbuild.sample_rib_file()[:-2])
        scan = scan_corpus(tmp_path)
        assert len(list(scan)) == 3
        assert scan.stats.errors == 1
