import pytest
from hypothesis import given, strategies as st

from bgprel.dictionary import (
    Category, CommunityMeaning, SettableBy, classify_message_tags, load_dictionary,
)
from bgprel.errors import DictionaryError
from bgprel.paths import Link, sanitize


def tsv(*rows):
    return "".join("\t".join(map(str, r)) + "\n" for r in rows)


def test_fixture_dictionary(fig1_dictionary):
    assert len(fig1_dictionary) == 2
    assert fig1_dictionary.owners == {4589, 15412}
    m, = fig1_dictionary.resolve(4589, (4589, 612))
    assert m.category is Category.REL_PEER and m.settable_by is SettableBy.OWNER
    assert fig1_dictionary.resolve(4589, (4589, 2)) == []


def test_fixed_width_wildcard():
    d = load_dictionary(tsv((3549, "3549:2***", "REL_CUSTOMER")))
    assert d.resolve(3549, (3549, 2771))
    assert not d.resolve(3549, (3549, 271))
    assert not d.resolve(3549, (3549, 27710))
    assert not d.resolve(3549, (3549, 3771))


def test_variable_width_wildcard():
    d = load_dictionary(tsv((3549, "3549:3%", "REL_PEER")))
    for v in (3, 30, 31208, 3999):
        assert d.resolve(3549, (3549, v))
    assert not d.resolve(3549, (3549, 4354))


def test_exact_beats_wildcard_in_order():
    d = load_dictionary(tsv((1, "1:2***", "REL_CUSTOMER"), (1, "1:2500", "TAG_LOCATION", "OWNER", "paris")))
    hits = d.resolve(1, (1, 2500))
    assert [h.category for h in hits] == [Category.TAG_LOCATION, Category.REL_CUSTOMER]


def test_dual_meaning_owner_is_reported():
    d = load_dictionary(tsv((1273, "1273:3***", "REL_PROVIDER"),
                            (1273, "1273:3***", "ACTION_PREPEND", "CUSTOMER")))
    assert 1273 in d.dual_meaning_asns
    assert 1 not in load_dictionary(tsv((1, "1:1", "REL_PEER"))).dual_meaning_asns


def test_all_problems_reported_together():
    bad = tsv((1, "1:5", "REL_PEER"), (1, "1:5", "REL_CUSTOMER"), ("x", "1:1", "REL_PEER"),
              (2, "3:1", "REL_PEER"), (2, "2:1", "NOPE"), (2, "2:99999", "REL_PEER"))
    with pytest.raises(DictionaryError) as err:
        load_dictionary(bad)
    assert [row for row, _ in err.value.problems] == [3, 4, 5, 6, 2]


def test_duplicate_same_category_is_tolerated():
    d = load_dictionary(tsv((1, "1:5", "REL_PEER"), (1, "1:05", "REL_PEER")))
    assert len(d) == 1


def test_location_needs_note():
    with pytest.raises(DictionaryError):
        load_dictionary(tsv((1, "1:5", "TAG_LOCATION")))


def test_large_communities_are_ignored():
    assert len(load_dictionary(tsv((1, "1:2:3", "REL_PEER"), (1, "1:1", "REL_PEER")))) == 1


def test_round_trip_dump():
    d = load_dictionary(tsv((1, "1:2***", "REL_CUSTOMER", "OWNER", "", "NOC"),
                            (2, "2:3%", "TAG_LOCATION", "OWNER", "usa", "IRR")))
    again = load_dictionary(d.dumps())
    assert again.entries == d.entries


def test_without_owner():
    d = load_dictionary(tsv((1, "1:1", "REL_PEER"), (2, "2:1", "REL_PEER")))
    assert d.without([1]).owners == {2}


class TestAttribution:
    def test_fig1_tags_land_on_origin_side_link(self, fig1_dictionary):
        path = sanitize([4589, 15412, 18101, 45528])
        comms = [(4589, 612), (15412, 705), (18101, 1344), (45528, 1)]
        tags = classify_message_tags(path, comms, fig1_dictionary)
        assert [m.category for m in tags[Link(4589, 15412)]] == [Category.REL_PEER]
        assert [m.category for m in tags[Link(15412, 18101)]] == [Category.REL_CUSTOMER]
        assert tags[Link(18101, 45528)] == []
        # 18101:1344 is unknown, the origin tag has no link
        assert tags.unresolved == 2
        assert [h.community for h in tags.path_level] == [(45528, 1)]

    def test_stripped_observer(self, fig1_dictionary):
        path = sanitize([15412, 18101])
        tags = classify_message_tags(path, [(4589, 612)], fig1_dictionary, peer_asn=4589)
        assert tags.observer_link == Link(4589, 15412)
        assert [m.category for m in tags[Link(4589, 15412)]] == [Category.REL_PEER]

    def test_off_path_tagger_is_path_level(self, fig1_dictionary):
        tags = classify_message_tags(sanitize([1, 2]), [(4589, 612)], fig1_dictionary, peer_asn=1)
        assert len(tags.path_level) == 1

    def test_well_known_separated(self, fig1_dictionary):
        tags = classify_message_tags(sanitize([1, 2]), [(65535, 65281)], fig1_dictionary)
        assert tags.well_known == [(65535, 65281)]


def _brute_matches(pattern_value, value):
    text = str(value)
    if pattern_value.isdigit():
        return value == int(pattern_value)
    if pattern_value.endswith("%"):
        return text.startswith(pattern_value[:-1])
    return len(text) == len(pattern_value) and all(
        p == "*" or p == c for p, c in zip(pattern_value, text))


@given(st.text("0123456789", min_size=0, max_size=3), st.integers(1, 3), st.booleans(),
       st.integers(0, 65535))
def test_wildcard_matches_character_oracle(prefix, stars, variable, value):
    pattern = prefix + ("%" if variable else "*" * stars)
    if variable and not prefix:
        return
    m = CommunityMeaning(1, f"1:{pattern}", Category.OTHER)
    assert m.matches(value) == _brute_matches(pattern, value)
