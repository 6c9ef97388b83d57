import dataclasses
from collections import Counter

import pytest

from bgprel.dictionary import load_dictionary
from bgprel.engine import Flag, HybridKind, RelInference, Relationship, RelKind
from bgprel.errors import InfeasibleQuota
from bgprel.fusion import RelationshipDb, check_valley_free, step_between
from bgprel.ingest import iter_text_records
from bgprel.locprf import parse_rs_dump
from bgprel.paths import Link
from bgprel.synth import GroundTruth, SynthParams, emit_corpus, generate, score


@pytest.fixture(scope="module")
def truth():
    return generate(SynthParams(seed=5))


@pytest.fixture(scope="module")
def corpus(truth):
    return emit_corpus(truth)


def truth_db(truth):
    links = {l: RelInference(l, t.base, frozenset(t.flags), frozenset(t.partners),
                             hybrid_kind=t.hybrid_kind) for l, t in truth.links.items()}
    return RelationshipDb(links, pairs=list(truth.pairs))


def test_quotas(truth):
    p = truth.params
    kinds = Counter(t.hybrid_kind for t in truth.links.values())
    flags = Counter(f for t in truth.links.values() for f in t.flags)
    assert kinds[HybridKind.IP_VERSION] == p.hybrid_ip
    assert kinds[HybridKind.LOCATION] == p.hybrid_location
    assert flags[Flag.PARTIAL_TRANSIT] == p.partial_transit
    assert flags[Flag.BACKUP_PREPEND] == p.backup_prepend
    assert flags[Flag.BACKUP_NOEXPORT] == p.backup_noexport
    assert len(truth.pairs) == p.indirect_pairs
    assert sum(t.base.kind is RelKind.S2S for t in truth.links.values()) == p.siblings
    assert len(truth.ases) == 200
    assert 500 <= len(truth.links) <= 700


def test_deterministic():
    assert generate(seed=9).to_json() == generate(seed=9).to_json()
    assert generate(seed=9).to_json() != generate(seed=10).to_json()
    a, b = emit_corpus(generate(seed=9)), emit_corpus(generate(seed=9))
    assert a.files == b.files


def test_truth_json_round_trip(truth):
    again = GroundTruth.from_json(truth.to_json())
    assert again.to_json() == truth.to_json()
    assert again.links == truth.links


def test_infeasible_quotas():
    with pytest.raises(InfeasibleQuota):
        generate(n_ases=40)
    with pytest.raises(InfeasibleQuota):
        generate(hybrid_ip=60)


def test_emitted_files_parse(truth, corpus):
    names = sorted(corpus.files)
    assert "dictionary.tsv" in names and "truth.json" in names
    days = {n.rsplit(".", 2)[1] for n in names if n.startswith("corpus/")}
    assert len(days) == truth.params.days
    d = load_dictionary(corpus.files["dictionary.tsv"])
    assert d.owners == set(truth.schemes)
    for name, text in corpus.files.items():
        if name.startswith("corpus/"):
            recs = list(iter_text_records(text.splitlines(), "c"))
            assert recs and all(r.flat_path() for r in recs)
        elif name.startswith("rs/"):
            dump = parse_rs_dump(text)
            assert dump.skipped == 0 and dump.observer_asn in truth.locprf


def _steps(truth, hops):
    route = hops[::-1]
    out = []
    for a, b in zip(route, route[1:]):
        rel = truth.links[Link.of(a, b)].base
        if rel.kind is RelKind.HYBRID:
            rel = rel.transit_component()
        out.append(step_between(rel, a, b))
    return out


def test_valley_paths_really_violate(truth, corpus):
    assert len(corpus.valley_paths) == truth.params.non_valley_free
    for hops in corpus.valley_paths:
        assert check_valley_free(_steps(truth, hops)) is not None


def test_perfect_db_scores_one(truth):
    result = score(truth_db(truth), truth)
    for name, c in result.categories.items():
        assert (c.precision, c.recall) == (1.0, 1.0), name
    assert "mismatch" not in result.summary()


def test_score_penalties(truth):
    db = truth_db(truth)
    p2c_link = next(l for l, t in sorted(truth.links.items())
                    if t.base.kind is RelKind.P2C and not t.special)
    db.links[p2c_link] = RelInference(p2c_link, Relationship.p2p())
    dropped = next(l for l, t in sorted(truth.links.items()) if t.base.kind is RelKind.P2P
                   and not t.special)
    del db.links[dropped]
    result = score(db, truth)
    assert result.categories["p2c"].fn == 1
    assert result.categories["p2p"].fp == 1 and result.categories["p2p"].fn == 1
    assert result.categories["p2c"].precision == 1.0
    assert f"mismatch {p2c_link}" in result.summary()


def test_flag_scores(truth):
    db = truth_db(truth)
    link = next(l for l, t in sorted(truth.links.items()) if Flag.BACKUP_PREPEND in t.flags)
    db.links[link] = dataclasses.replace(db.links[link], flags=frozenset())
    assert score(db, truth).categories["backup-prepend"].recall == 0.5
