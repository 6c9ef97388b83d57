import pytest
from hypothesis import given, strategies as st

from bgprel.ingest import Segment, SegmentType
from bgprel.paths import (
    DEFAULT_REJECTED, AsnFilter, Link, PathRejected, RejectReason, extract_links,
    prepend_signature, sanitize,
)


def test_link_is_canonical():
    assert Link.of(5, 3) == Link.of(3, 5) == Link(3, 5)
    assert Link.of(3, 5).other(3) == 5
    with pytest.raises(ValueError):
        Link.of(4, 4)
    with pytest.raises(ValueError):
        Link.of(3, 5).other(7)


def test_filter_parse_and_membership():
    f = AsnFilter.parse("23456, 64512-65534")
    assert 23456 in f and 64512 in f and 65534 in f
    assert 65535 not in f and 3356 not in f
    assert str(f) == "23456,64512-65534"
    assert 56320 in DEFAULT_REJECTED and 23456 in DEFAULT_REJECTED and 56319 not in DEFAULT_REJECTED


def test_prepending_is_collapsed_and_counted():
    p = sanitize([1273, 1273, 1273, 2000, 3000, 3000])
    assert p.hops == (1273, 2000, 3000)
    assert p.prepend_counts == (3, 1, 2)
    assert prepend_signature(p) == {1273: 3, 3000: 2}
    assert p.observer_asn == 1273 and p.origin_asn == 3000


@pytest.mark.parametrize("path,reason", [
    ([1, 23456, 3], RejectReason.RESERVED_ASN),
    ([1, 64600], RejectReason.RESERVED_ASN),
    ([1, 2, 3, 2], RejectReason.CYCLE),
    ([], RejectReason.EMPTY),
    ([Segment(SegmentType.SEQUENCE, (1, 2)), Segment(SegmentType.SET, (3, 4))], RejectReason.AS_SET),
])
def test_rejections(path, reason):
    with pytest.raises(PathRejected) as err:
        sanitize(path)
    assert err.value.reason is reason


def test_custom_filter():
    assert sanitize([1, 64600], rejected=AsnFilter([])).hops == (1, 64600)


def test_extract_links_in_path_order():
    assert extract_links(sanitize([4589, 15412, 18101])) == [
        (Link(4589, 15412), 4589), (Link(15412, 18101), 15412)]


@given(st.lists(st.integers(1, 30), min_size=1, max_size=12))
def test_sanitize_invariants(asns):
    try:
        p = sanitize(asns, rejected=AsnFilter([]))
    except PathRejected as exc:
        assert exc.reason is RejectReason.CYCLE
        return
    assert sum(p.prepend_counts) == len(asns)
    assert all(a != b for a, b in zip(p.hops, p.hops[1:]))
    expanded = [a for a, n in zip(p.hops, p.prepend_counts) for _ in range(n)]
    assert expanded == asns
