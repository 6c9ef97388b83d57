"""Communities-based relationship inference.

Evidence is accumulated per link over every message of a corpus and is a
mergeable value: partial maps built from disjoint record shards combine
with :meth:`Evidence.merge` in any order to the same result.  Inference then
runs read-only over the merged map.
"""

from __future__ import annotations

import datetime as dt
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .dictionary import (
    RELATIONSHIP_CATEGORIES, SCOPE_CATEGORIES, Category, Dictionary, LinkTagging,
    MessageTags, SettableBy, TagHit, classify_message_tags,
)
from .ingest import NO_ADVERTISE, NO_EXPORT, BgpRecord, community_to_u32
from .paths import (
    DEFAULT_REJECTED, AsnFilter, CleanPath, Link, PathRejected, RejectReason, sanitize_record,
)

log = logging.getLogger(__name__)

MessageId = tuple[str, int, str]


class RelKind(str, Enum):
    P2C = "p2c"
    P2P = "p2p"
    S2S = "s2s"
    HYBRID = "hybrid"


@dataclass(frozen=True, order=True)
class Relationship:
    """A link relationship; ``provider`` names the transit provider if any."""

    kind: RelKind
    provider: int | None = None

    def __post_init__(self) -> None:
        needs_provider = self.kind in (RelKind.P2C, RelKind.HYBRID)
        if needs_provider != (self.provider is not None):
            raise ValueError(f"{self.kind.value} relationship with provider={self.provider}")

    @classmethod
    def p2c(cls, provider: int) -> "Relationship":
        return cls(RelKind.P2C, provider)

    @classmethod
    def p2p(cls) -> "Relationship":
        return cls(RelKind.P2P)

    @classmethod
    def s2s(cls) -> "Relationship":
        return cls(RelKind.S2S)

    @classmethod
    def hybrid(cls, provider: int) -> "Relationship":
        return cls(RelKind.HYBRID, provider)

    @property
    def has_transit(self) -> bool:
        return self.kind in (RelKind.P2C, RelKind.HYBRID)

    @property
    def has_peering(self) -> bool:
        return self.kind in (RelKind.P2P, RelKind.HYBRID)

    def transit_component(self) -> "Relationship | None":
        return Relationship.p2c(self.provider) if self.has_transit else None

    def __str__(self) -> str:
        if self.provider is None:
            return self.kind.value
        return f"{self.kind.value}({self.provider})"


@dataclass(frozen=True)
class Undecided:
    reason: str  # NO_VOTES | INSUFFICIENT | CONFLICT

    def __bool__(self) -> bool:
        return False


NO_VOTES = Undecided("NO_VOTES")
INSUFFICIENT = Undecided("INSUFFICIENT")
CONFLICT = Undecided("CONFLICT")


class Ambiguous(Enum):
    AMBIGUOUS = "AMBIGUOUS"


AMBIGUOUS = Ambiguous.AMBIGUOUS


class Flag(str, Enum):
    PARTIAL_TRANSIT = "pt"
    BACKUP_PREPEND = "bk-prep"
    BACKUP_NOEXPORT = "bk-noexp"


class HybridKind(str, Enum):
    IP_VERSION = "ip-version"
    LOCATION = "location"
    BOTH = "both"
    UNEXPLAINED = "unexplained"


class Provenance(str, Enum):
    COMMUNITIES = "COMMUNITIES"
    LOCPRF = "LOCPRF"
    BOTH = "BOTH"


@dataclass(frozen=True)
class Vote:
    message_id: MessageId
    tagger: int
    rel: Relationship
    locations: frozenset[str] = frozenset()
    ip_version: int = 4
    monitor_id: str = ""
    day: dt.date | None = None
    prepended: bool = False


@dataclass(frozen=True)
class ScopeObservation:
    message_id: MessageId
    tagger: int
    category: Category
    scope_note: str
    settable_by: SettableBy
    full_scope: bool


@dataclass
class LinkEvidence:
    link: Link
    votes: dict[tuple[MessageId, int], Vote] = field(default_factory=dict)
    conflicts: set[tuple[MessageId, int]] = field(default_factory=set)
    scope_restrictions: set[ScopeObservation] = field(default_factory=set)
    prepend_max: dict[int, int] = field(default_factory=dict)
    no_export_seen: bool = False
    observation_days: set[dt.date] = field(default_factory=set)
    rs_peering_tags: set[int] = field(default_factory=set)
    ip_versions: set[int] = field(default_factory=set)

    @property
    def dual_meaning_conflicts(self) -> int:
        return len(self.conflicts)

    def prepend_by(self, asn: int) -> int:
        """Largest repetition of ``asn`` seen on the far side of this link."""
        return self.prepend_max.get(asn, 0)

    def merge(self, other: "LinkEvidence") -> "LinkEvidence":
        self.votes.update(other.votes)
        self.conflicts |= other.conflicts
        self.scope_restrictions |= other.scope_restrictions
        for asn, n in other.prepend_max.items():
            if n > self.prepend_max.get(asn, 0):
                self.prepend_max[asn] = n
        self.no_export_seen = self.no_export_seen or other.no_export_seen
        self.observation_days |= other.observation_days
        self.rs_peering_tags |= other.rs_peering_tags
        self.ip_versions |= other.ip_versions
        return self


_ORIENT = {
    Category.REL_CUSTOMER: "customer",
    Category.REL_PROVIDER: "provider",
    Category.REL_PEER: "peer",
    Category.TAG_RS_PEERING: "peer",
    Category.REL_SIBLING: "sibling",
}
_NORMAL = {
    Category.REL_CUSTOMER: Category.REL_CUSTOMER,
    Category.REL_PROVIDER: Category.REL_PROVIDER,
    Category.REL_PEER: Category.REL_PEER,
    Category.TAG_RS_PEERING: Category.REL_PEER,
    Category.REL_SIBLING: Category.REL_SIBLING,
}


def _relationship_categories(hit: TagHit) -> set[Category]:
    return {_NORMAL[m.category] for m in hit.meanings if m.category in RELATIONSHIP_CATEGORIES}


def disambiguate_dual(hits: Sequence[TagHit]) -> Category | Ambiguous | None:
    """Reduce the relationship meanings one tagger attached in one message.

    Returns the single category, ``None`` when no relationship meaning is
    present, or :data:`AMBIGUOUS`.  The only resolvable conflict is a
    customer tag next to a provider-looking value that is also a
    customer-settable prepend request: that is a prepended customer route.
    """
    cats: set[Category] = set()
    for h in hits:
        cats |= _relationship_categories(h)
    if not cats:
        return None
    if len(cats) == 1:
        return next(iter(cats))
    if cats == {Category.REL_CUSTOMER, Category.REL_PROVIDER}:
        provider_looking = [h for h in hits if Category.REL_PROVIDER in _relationship_categories(h)]
        if all(any(m.category is Category.ACTION_PREPEND and m.settable_by is SettableBy.CUSTOMER
                   for m in h.meanings) for h in provider_looking):
            return Category.REL_CUSTOMER
    return AMBIGUOUS


def orient(category: Category, tagger: int, neighbor: int) -> Relationship:
    """Relationship implied by ``tagger`` tagging a route received from ``neighbor``."""
    role = _ORIENT[category]
    if role == "customer":
        return Relationship.p2c(tagger)
    if role == "provider":
        return Relationship.p2c(neighbor)
    if role == "peer":
        return Relationship.p2p()
    return Relationship.s2s()


class Evidence:
    """Corpus-wide evidence: per-link accumulators plus path-level facts."""

    def __init__(self) -> None:
        self.links: dict[Link, LinkEvidence] = {}
        self.paths: set[tuple[int, ...]] = set()
        self.triples: set[tuple[int, int, int]] = set()
        self.days: set[dt.date] = set()
        self.rejections: Counter[RejectReason] = Counter()
        self.unresolved: int = 0
        self.messages: int = 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Evidence):
            return NotImplemented
        return (self.links == other.links and self.paths == other.paths
                and self.triples == other.triples and self.days == other.days)

    def __len__(self) -> int:
        return len(self.links)

    def __getitem__(self, link: Link) -> LinkEvidence:
        return self.links[link]

    def __contains__(self, link: Link) -> bool:
        return link in self.links

    def __iter__(self) -> Iterator[Link]:
        return iter(self.links)

    def _entry(self, link: Link) -> LinkEvidence:
        ev = self.links.get(link)
        if ev is None:
            ev = self.links[link] = LinkEvidence(link)
        return ev

    @property
    def ases(self) -> set[int]:
        out: set[int] = set()
        for link in self.links:
            out.update(link)
        return out

    def add_message(self, path: CleanPath, tags: MessageTags,
                    record: BgpRecord | None = None) -> None:
        rec = record if record is not None else path.source_record
        if rec is None:
            raise ValueError("message evidence needs its source record")
        day, version = rec.day, rec.ip_version
        hops = path.hops
        self.messages += 1
        self.paths.add(hops)
        self.days.add(day)
        for i in range(len(hops) - 2):
            a, r, b = hops[i], hops[i + 1], hops[i + 2]
            self.triples.add((min(a, b), r, max(a, b)))
        for i in range(len(hops) - 1):
            ev = self._entry(Link.of(hops[i], hops[i + 1]))
            ev.observation_days.add(day)
            ev.ip_versions.add(version)
            far, n = hops[i + 1], path.prepend_counts[i + 1]
            if n > 1 and n > ev.prepend_max.get(far, 0):
                ev.prepend_max[far] = n
        self.unresolved += tags.unresolved

        if tags.well_known:
            words = {community_to_u32(c) for c in tags.well_known}
            if words & {NO_EXPORT, NO_ADVERTISE}:
                target = tags.observer_link
                if target is None and len(hops) > 1:
                    target = Link.of(hops[0], hops[1])
                if target is not None:
                    ev = self._entry(target)
                    ev.observation_days.add(day)
                    ev.ip_versions.add(version)
                    ev.no_export_seen = True

        for link, tagging in tags.per_link.items():
            if tagging.hits:
                self._apply(self._entry(link), tagging, rec, day)

    def _apply(self, ev: LinkEvidence, tagging: LinkTagging, rec: BgpRecord, day: dt.date) -> None:
        mid, tagger = rec.message_id, tagging.tagger
        ev.observation_days.add(day)
        ev.ip_versions.add(rec.ip_version)
        locations = []
        for m in tagging.meanings():
            if m.category is Category.TAG_LOCATION:
                locations.append(m.scope_note)
            elif m.category in SCOPE_CATEGORIES:
                ev.scope_restrictions.add(ScopeObservation(
                    mid, tagger, m.category, m.scope_note, m.settable_by, m.full_scope))
            elif m.category is Category.TAG_RS_PEERING:
                ev.rs_peering_tags.add(tagger)
        verdict = disambiguate_dual(tagging.hits)
        key = (mid, tagger)
        if verdict is AMBIGUOUS:
            ev.conflicts.add(key)
        elif verdict is not None:
            cats = set()
            for h in tagging.hits:
                cats |= _relationship_categories(h)
            ev.votes[key] = Vote(
                mid, tagger, orient(verdict, tagger, tagging.neighbor),
                frozenset(locations), rec.ip_version, rec.monitor_id, day,
                prepended=len(cats) > 1)

    def merge(self, other: "Evidence") -> "Evidence":
        for link, ev in other.links.items():
            mine = self.links.get(link)
            if mine is None:
                self.links[link] = LinkEvidence(link).merge(ev)
            else:
                mine.merge(ev)
        self.paths |= other.paths
        self.triples |= other.triples
        self.days |= other.days
        self.rejections.update(other.rejections)
        self.unresolved += other.unresolved
        self.messages += other.messages
        return self


def accumulate(messages: Iterable[tuple[CleanPath, MessageTags]]) -> Evidence:
    """Fold (path, tags) pairs into an :class:`Evidence` map."""
    evidence = Evidence()
    for path, tags in messages:
        evidence.add_message(path, tags)
    return evidence


def accumulate_records(records: Iterable[BgpRecord], dictionary: Dictionary,
                       rejected: AsnFilter = DEFAULT_REJECTED,
                       evidence: Evidence | None = None) -> Evidence:
    """Sanitize, attribute and accumulate a record stream."""
    evidence = evidence if evidence is not None else Evidence()
    for rec in records:
        try:
            path = sanitize_record(rec, rejected)
        except PathRejected as exc:
            evidence.rejections[exc.reason] += 1
            continue
        tags = classify_message_tags(path, rec.communities, dictionary, rec.peer_asn)
        evidence.add_message(path, tags, rec)
    return evidence


# ---------------------------------------------------------------- inference

def _active_votes(ev: LinkEvidence, exclude_taggers: frozenset[int]) -> list[Vote]:
    if not exclude_taggers:
        return list(ev.votes.values())
    return [v for v in ev.votes.values() if v.tagger not in exclude_taggers]


def infer_base(ev: LinkEvidence, min_votes: int = 1,
               exclude_taggers: frozenset[int] = frozenset()) -> Relationship | Undecided:
    votes = _active_votes(ev, exclude_taggers)
    if not votes:
        return NO_VOTES
    if len(votes) < min_votes:
        return INSUFFICIENT
    sibling = [v for v in votes if v.rel.kind is RelKind.S2S]
    peer = [v for v in votes if v.rel.kind is RelKind.P2P]
    transit = [v for v in votes if v.rel.kind is RelKind.P2C]
    if sibling:
        return CONFLICT if (peer or transit) else Relationship.s2s()
    providers = {v.rel.provider for v in transit}
    if len(providers) > 1:
        return CONFLICT
    if transit and peer:
        if any(t.message_id != p.message_id for t in transit for p in peer):
            return Relationship.hybrid(next(iter(providers)))
        return CONFLICT
    if transit:
        return Relationship.p2c(next(iter(providers)))
    return Relationship.p2p()


def detect_hybrid(ev: LinkEvidence,
                  exclude_taggers: frozenset[int] = frozenset()) -> HybridKind | None:
    """Explain a hybrid by IP version and/or location; ``None`` if not hybrid."""
    base = infer_base(ev, exclude_taggers=exclude_taggers)
    if not isinstance(base, Relationship) or base.kind is not RelKind.HYBRID:
        return None
    votes = _active_votes(ev, exclude_taggers)
    transit = [v for v in votes if v.rel.kind is RelKind.P2C]
    peer = [v for v in votes if v.rel.kind is RelKind.P2P]
    ip_dependent = {v.ip_version for v in transit}.isdisjoint({v.ip_version for v in peer})
    loc_t = set().union(*(v.locations for v in transit))
    loc_p = set().union(*(v.locations for v in peer))
    loc_dependent = bool(loc_t) and bool(loc_p) and loc_t.isdisjoint(loc_p)
    if ip_dependent and loc_dependent:
        return HybridKind.BOTH
    if ip_dependent:
        return HybridKind.IP_VERSION
    if loc_dependent:
        return HybridKind.LOCATION
    return HybridKind.UNEXPLAINED


def detect_partial_transit(ev: LinkEvidence, base: Relationship) -> bool:
    if not base.has_transit:
        return False
    for s in ev.scope_restrictions:
        if s.tagger != base.provider:
            continue
        if s.settable_by not in (SettableBy.CUSTOMER, SettableBy.ANY):
            continue
        if s.category is Category.ACTION_SCOPE_RESTRICT:
            return True
        if s.category is Category.ACTION_NO_EXPORT_SCOPE and not s.full_scope:
            return True
    return False


def longest_run(days: Iterable[dt.date]) -> int:
    ordinals = sorted({d.toordinal() for d in days})
    best = run = 0
    prev = None
    for o in ordinals:
        run = run + 1 if prev is not None and o == prev + 1 else 1
        best = max(best, run)
        prev = o
    return best


def detect_backup(ev: LinkEvidence, base: Relationship,
                  calendar: Iterable[dt.date] | None = None,
                  max_run_days: int = 5, prepend_threshold: int = 2) -> set[Flag]:
    if not base.has_transit:
        return set()
    flags: set[Flag] = set()
    customer = ev.link.other(base.provider)
    days = ev.observation_days
    if calendar is not None:
        days = days & set(calendar)
    if ev.prepend_by(customer) >= prepend_threshold and longest_run(days) < max_run_days:
        flags.add(Flag.BACKUP_PREPEND)
    full_no_export = any(s.category is Category.ACTION_NO_EXPORT_SCOPE and s.full_scope
                         and s.tagger == base.provider for s in ev.scope_restrictions)
    if ev.no_export_seen or full_no_export:
        flags.add(Flag.BACKUP_NOEXPORT)
    return flags


IndirectPair = tuple[Link, Link]


def detect_indirect_peering(evidence: Evidence,
                            bases: dict[Link, Relationship]) -> set[IndirectPair]:
    """Pairs of peering links A-R, R-B where A and B both tag R as a route server."""
    pairs: set[IndirectPair] = set()
    p2p = Relationship.p2p()
    for a, r, b in evidence.triples:
        first, second = Link.of(a, r), Link.of(r, b)
        if bases.get(first) != p2p or bases.get(second) != p2p:
            continue
        if a in evidence[first].rs_peering_tags and b in evidence[second].rs_peering_tags:
            pairs.add((min(first, second), max(first, second)))
    return pairs


@dataclass(frozen=True)
class RelInference:
    link: Link
    base: Relationship
    flags: frozenset[Flag] = frozenset()
    partners: frozenset[Link] = frozenset()
    provenance: Provenance = Provenance.COMMUNITIES
    hybrid_kind: HybridKind | None = None
    evidence_counts: dict[str, int] = field(default_factory=dict, compare=False, hash=False)
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.base.provider is not None and self.base.provider not in self.link:
            raise ValueError(f"provider AS{self.base.provider} not on link {self.link}")
        if self.flags and not self.base.has_transit:
            raise ValueError(f"{self.link}: special transit flags on a non-transit link")
        if self.partners and self.base.kind is not RelKind.P2P:
            raise ValueError(f"{self.link}: indirect peering on a non-peering link")
        if self.hybrid_kind is not None and self.base.kind is not RelKind.HYBRID:
            raise ValueError(f"{self.link}: hybrid kind on a non-hybrid link")

    @property
    def indirect(self) -> bool:
        return bool(self.partners)


@dataclass
class CommunitiesResult:
    inferences: dict[Link, RelInference]
    undecided: dict[Link, Undecided]
    pairs: set[IndirectPair]


def _count_votes(ev: LinkEvidence, exclude: frozenset[int]) -> dict[str, int]:
    counts = Counter(v.rel.kind.value for v in _active_votes(ev, exclude))
    if ev.conflicts:
        counts["ambiguous"] = len(ev.conflicts)
    return dict(sorted(counts.items()))


def infer_communities(evidence: Evidence, min_votes: int = 1,
                      max_run_days: int = 5, prepend_threshold: int = 2,
                      exclude_taggers: Iterable[int] = ()) -> CommunitiesResult:
    """Run every Communities rule over accumulated evidence."""
    exclude = frozenset(exclude_taggers)
    bases: dict[Link, Relationship] = {}
    undecided: dict[Link, Undecided] = {}
    for link in sorted(evidence.links):
        verdict = infer_base(evidence[link], min_votes, exclude)
        if isinstance(verdict, Relationship):
            bases[link] = verdict
        elif verdict is not NO_VOTES:
            undecided[link] = verdict
    pairs = detect_indirect_peering(evidence, bases)
    partners: dict[Link, set[Link]] = {}
    for first, second in pairs:
        partners.setdefault(first, set()).add(second)
        partners.setdefault(second, set()).add(first)

    calendar = evidence.days or None
    out: dict[Link, RelInference] = {}
    for link, base in bases.items():
        ev = evidence[link]
        flags: set[Flag] = set()
        if base.has_transit:
            if detect_partial_transit(ev, base):
                flags.add(Flag.PARTIAL_TRANSIT)
            flags |= detect_backup(ev, base, calendar, max_run_days, prepend_threshold)
        out[link] = RelInference(
            link, base, frozenset(flags), frozenset(partners.get(link, ())),
            Provenance.COMMUNITIES, detect_hybrid(ev, exclude), _count_votes(ev, exclude))
    return CommunitiesResult(out, undecided, pairs)
