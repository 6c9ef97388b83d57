"""Fusion of per-source inferences, consistency checks, path validation and export."""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .engine import (
    Evidence, Flag, HybridKind, IndirectPair, Provenance, RelInference, Relationship, RelKind,
)
from .errors import DataError, NoDefaults, UnknownRelationship
from .locprf import (
    LocPrfObservation, build_profile, infer_from_locprf, map_defaults,
    merge_observer_inferences, select_defaults,
)
from .paths import Link

log = logging.getLogger(__name__)


@dataclass
class RelationshipDb:
    links: dict[Link, RelInference] = field(default_factory=dict)
    pairs: list[IndirectPair] = field(default_factory=list)
    sources: dict[str, dict[Link, RelInference]] = field(default_factory=dict)
    excluded: dict[Link, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.links)

    def __contains__(self, link: Link) -> bool:
        return link in self.links

    def __getitem__(self, link: Link) -> RelInference:
        return self.links[link]

    def get(self, link: Link) -> RelInference | None:
        return self.links.get(link)

    def relationship(self, a: int, b: int) -> Relationship | None:
        inf = self.links.get(Link.of(a, b))
        return inf.base if inf else None

    def exclude(self, link: Link, reason: str) -> None:
        self.excluded[link] = reason
        if self.links.pop(link, None) is not None:
            self._prune_partners()

    def _prune_partners(self) -> None:
        self.pairs = [p for p in self.pairs if p[0] in self.links and p[1] in self.links]
        live: dict[Link, set[Link]] = defaultdict(set)
        for first, second in self.pairs:
            live[first].add(second)
            live[second].add(first)
        for link, inf in list(self.links.items()):
            if inf.partners and inf.partners != live.get(link, set()):
                self.links[link] = dataclasses.replace(inf, partners=frozenset(live.get(link, ())))


# ------------------------------------------------------------------- fusion

def _hybrid_partial_match(hybrid: Relationship, single: Relationship) -> bool:
    return single == hybrid.transit_component() or single == Relationship.p2p()


def fuse(communities: Mapping[Link, RelInference], locprf: Mapping[Link, RelInference],
         pairs: Iterable[IndirectPair] = ()) -> RelationshipDb:
    """Merge the two per-source sets under the agreement rule."""
    db = RelationshipDb(sources={"communities": dict(communities), "locprf": dict(locprf)})
    for link in sorted(set(communities) | set(locprf)):
        c, lp = communities.get(link), locprf.get(link)
        if lp is None:
            db.links[link] = dataclasses.replace(c, provenance=Provenance.COMMUNITIES)
        elif c is None:
            # flags and partners are communities-only facts
            db.links[link] = dataclasses.replace(lp, provenance=Provenance.LOCPRF, flags=frozenset(),
                                                 partners=frozenset(), hybrid_kind=None)
        elif c.base == lp.base:
            db.links[link] = dataclasses.replace(c, provenance=Provenance.BOTH)
        elif c.base.kind is RelKind.HYBRID and _hybrid_partial_match(c.base, lp.base):
            note = f"route-server view sees only {lp.base}"
            db.links[link] = dataclasses.replace(c, provenance=Provenance.BOTH,
                                                 notes=c.notes + (note,))
        else:
            reason = f"sources disagree: communities {c.base}, locprf {lp.base}"
            log.info("%s excluded: %s", link, reason)
            db.excluded[link] = reason
    db.pairs = sorted(p for p in set(pairs))
    db._prune_partners()
    return db


# ------------------------------------------------------------ valley-free

class Step(str, Enum):
    C2P = "c2p"
    P2C = "p2c"
    P2P = "p2p"
    S2S = "s2s"


def _as_step(item) -> Step:
    if isinstance(item, Step):
        return item
    try:
        return Step(item)
    except ValueError:
        raise UnknownRelationship(f"unknown relationship step {item!r}") from None


def check_valley_free(seq: Sequence[Step | str]) -> int | None:
    """``None`` if the sequence is valley-free, else the index of the first bad step.

    Steps follow the route from origin to observer.  Sibling steps are
    transparent; at most one peering step may sit at the top.
    """
    steps = [_as_step(s) for s in seq]
    descending = False
    for i, step in enumerate(steps):
        if step is Step.S2S:
            continue
        if descending:
            if step is not Step.P2C:
                return i
        elif step is not Step.C2P:
            descending = True
    return None


def step_between(rel: Relationship, sender: int, receiver: int) -> Step:
    """How a route crosses ``rel`` when ``sender`` announces it to ``receiver``."""
    if rel.kind is RelKind.P2P:
        return Step.P2P
    if rel.kind is RelKind.S2S:
        return Step.S2S
    if rel.kind is RelKind.P2C:
        return Step.C2P if rel.provider == receiver else Step.P2C
    raise UnknownRelationship(f"hybrid link {sender}-{receiver} needs a component choice")


def _choices(rel: Relationship, sender: int, receiver: int) -> list[Step]:
    if rel.kind is RelKind.HYBRID:
        return [step_between(rel.transit_component(), sender, receiver), Step.P2P]
    return [step_between(rel, sender, receiver)]


def collapse_indirect(hops: Sequence[int], pairs: Iterable[IndirectPair]) -> tuple[list[int], set[int]]:
    """Drop route servers sitting between an indirect-peering pair.

    Returns the new hop list and the set of hop indexes (in the new list)
    whose link to the next hop is a virtual peering.
    """
    triples = set()
    for first, second in pairs:
        r = (set(first) & set(second)).pop()
        a, b = first.other(r), second.other(r)
        triples.add((a, r, b))
        triples.add((b, r, a))
    out: list[int] = []
    virtual: set[int] = set()
    i = 0
    while i < len(hops):
        out.append(hops[i])
        if i + 2 < len(hops) and (hops[i], hops[i + 1], hops[i + 2]) in triples:
            virtual.add(len(out) - 1)
            i += 2
        else:
            i += 1
    return out, virtual


@dataclass
class PathCheck:
    hops: tuple[int, ...]
    violation: int | None
    unknown: bool = False

    @property
    def valid(self) -> bool:
        return not self.unknown and self.violation is None


def validate_path(hops: Sequence[int], db: RelationshipDb, max_hybrid_choices: int = 64) -> PathCheck:
    """Valley-free verdict for an observer-first AS path.

    A path containing a link absent from ``db`` is reported as unknown.
    Hybrid links are satisfied by either component.  The violation index
    counts steps from the origin side of the collapsed path.
    """
    collapsed, virtual = collapse_indirect(list(hops), db.pairs)
    route = collapsed[::-1]
    n = len(route)
    virtual_from_origin = {n - 2 - i for i in virtual}
    options: list[list[Step]] = []
    for i in range(n - 1):
        sender, receiver = route[i], route[i + 1]
        if i in virtual_from_origin:
            options.append([Step.P2P])
            continue
        rel = db.relationship(sender, receiver)
        if rel is None:
            return PathCheck(tuple(hops), None, unknown=True)
        options.append(_choices(rel, sender, receiver))
    first_violation = None
    for combo in itertools.islice(itertools.product(*options), max_hybrid_choices):
        bad = check_valley_free(combo)
        if bad is None:
            return PathCheck(tuple(hops), None)
        if first_violation is None or bad > first_violation:
            first_violation = bad
    return PathCheck(tuple(hops), first_violation)


@dataclass
class ValidationReport:
    checked: int = 0
    valid: int = 0
    unknown: int = 0
    violations: list[PathCheck] = field(default_factory=list)


def validate_paths(paths: Iterable[Sequence[int]], db: RelationshipDb) -> ValidationReport:
    report = ValidationReport()
    for hops in sorted(set(tuple(p) for p in paths)):
        check = validate_path(hops, db)
        report.checked += 1
        if check.unknown:
            report.unknown += 1
        elif check.valid:
            report.valid += 1
        else:
            report.violations.append(check)
    return report


# ----------------------------------------------------------- sanity checks

@dataclass
class SanityReport:
    suspicious_owners: dict[int, tuple[int, int]] = field(default_factory=dict)
    two_sided: dict[Link, str] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.suspicious_owners or self.two_sided)

    def lines(self) -> list[str]:
        out = [f"owner AS{asn}: {bad}/{shared} cross-checked links contradict LocPrf"
               for asn, (bad, shared) in sorted(self.suspicious_owners.items())]
        out += [f"link {link}: {why}" for link, why in sorted(self.two_sided.items())]
        return out


def ordering_only_locprf(observations_by_observer: Mapping[int, Sequence[LocPrfObservation]],
                         dominance_ratio: float = 4.0) -> dict[Link, RelInference]:
    """LocPrf verdicts that use value ordering alone, independent of Communities."""
    per_observer = []
    for observer in sorted(observations_by_observer):
        profile = build_profile(observations_by_observer[observer])
        try:
            defaults = select_defaults(profile, dominance_ratio)
        except NoDefaults:
            continue
        mapping = map_defaults(profile, defaults, labels={})
        per_observer.append(infer_from_locprf(profile, mapping.classes))
    merged, _ = merge_observer_inferences(per_observer)
    return merged


def _owner_verdicts(evidence: Evidence) -> dict[int, dict[Link, set[Relationship]]]:
    by_owner: dict[int, dict[Link, set[Relationship]]] = defaultdict(lambda: defaultdict(set))
    for link, ev in evidence.links.items():
        for v in ev.votes.values():
            by_owner[v.tagger][link].add(v.rel)
    return by_owner


def check_owner_consistency(evidence: Evidence, locprf_view: Mapping[Link, RelInference],
                            min_links: int = 10, max_contradiction: float = 0.5
                            ) -> dict[int, tuple[int, int]]:
    """Owners whose tags are contradicted by LocPrf on most of the links both cover."""
    flagged = {}
    for owner, links in sorted(_owner_verdicts(evidence).items()):
        shared = bad = 0
        for link, rels in links.items():
            lp = locprf_view.get(link)
            if lp is None:
                continue
            shared += 1
            if lp.base not in rels:
                bad += 1
        if shared >= min_links and bad > max_contradiction * shared:
            flagged[owner] = (bad, shared)
    return flagged


def check_two_sided(evidence: Evidence, exclude_taggers: Iterable[int] = ()) -> dict[Link, str]:
    """Links tagged from both endpoints where the two sides never agree."""
    exclude = set(exclude_taggers)
    out = {}
    for link in sorted(evidence.links):
        sides: dict[int, set[Relationship]] = {link.left: set(), link.right: set()}
        for v in evidence[link].votes.values():
            if v.tagger in sides and v.tagger not in exclude:
                sides[v.tagger].add(v.rel)
        left, right = sides[link.left], sides[link.right]
        if left and right and left.isdisjoint(right):
            out[link] = (f"AS{link.left} says {','.join(sorted(map(str, left)))}, "
                         f"AS{link.right} says {','.join(sorted(map(str, right)))}")
    return out


def sanity_check(evidence: Evidence, locprf_view: Mapping[Link, RelInference],
                 min_links: int = 10, max_contradiction: float = 0.5) -> SanityReport:
    owners = check_owner_consistency(evidence, locprf_view, min_links, max_contradiction)
    return SanityReport(owners, check_two_sided(evidence, owners))


# ------------------------------------------------------------------- stats

STAT_KEYS = (
    "paths", "links", "ases", "inferred_links", "inferred_ases",
    "transit", "peering", "sibling", "hybrid", "hybrid_ip_version", "hybrid_location",
    "indirect_peering_pairs", "indirect_peering_links", "partial_transit",
    "backup", "backup_prepend", "backup_noexport",
    "from_communities", "from_locprf", "from_both",
    "dual_stack_links", "dual_stack_hybrid",
)


def stats(db: RelationshipDb, evidence: Evidence | None = None) -> dict[str, int]:
    """Summary counts.  Hybrids count as both transit and peering."""
    s = dict.fromkeys(STAT_KEYS, 0)
    if evidence is not None:
        s["paths"] = len(evidence.paths)
        s["links"] = len(evidence.links)
        s["ases"] = len(evidence.ases)
    ases: set[int] = set()
    for link, inf in db.links.items():
        ases.update(link)
        base = inf.base
        s["inferred_links"] += 1
        s["transit"] += base.has_transit
        s["peering"] += base.has_peering
        s["sibling"] += base.kind is RelKind.S2S
        if base.kind is RelKind.HYBRID:
            s["hybrid"] += 1
            if inf.hybrid_kind in (HybridKind.IP_VERSION, HybridKind.BOTH):
                s["hybrid_ip_version"] += 1
            if inf.hybrid_kind in (HybridKind.LOCATION, HybridKind.BOTH):
                s["hybrid_location"] += 1
        s["indirect_peering_links"] += bool(inf.partners)
        s["partial_transit"] += Flag.PARTIAL_TRANSIT in inf.flags
        s["backup_prepend"] += Flag.BACKUP_PREPEND in inf.flags
        s["backup_noexport"] += Flag.BACKUP_NOEXPORT in inf.flags
        s["backup"] += bool(inf.flags & {Flag.BACKUP_PREPEND, Flag.BACKUP_NOEXPORT})
        s["from_" + inf.provenance.value.lower()] += 1
        if evidence is not None and link in evidence and evidence[link].ip_versions >= {4, 6}:
            s["dual_stack_links"] += 1
            s["dual_stack_hybrid"] += base.kind is RelKind.HYBRID
    s["inferred_ases"] = len(ases)
    s["indirect_peering_pairs"] = len(db.pairs)
    return s


# ------------------------------------------------------------------ export

_FLAG_ORDER = (Flag.PARTIAL_TRANSIT, Flag.BACKUP_PREPEND, Flag.BACKUP_NOEXPORT)
INDIRECT_FLAG = "ixp-indirect"


def relationship_code(link: Link, rel: Relationship) -> str:
    if rel.kind is RelKind.P2P:
        return "0"
    if rel.kind is RelKind.S2S:
        return "2"
    if rel.kind is RelKind.P2C:
        return "-1" if rel.provider == link.left else "1"
    return "h:p2c-left" if rel.provider == link.left else "h:c2p-left"


def parse_relationship_code(link: Link, code: str) -> Relationship:
    if code == "0":
        return Relationship.p2p()
    if code == "2":
        return Relationship.s2s()
    if code == "-1":
        return Relationship.p2c(link.left)
    if code == "1":
        return Relationship.p2c(link.right)
    if code == "h:p2c-left":
        return Relationship.hybrid(link.left)
    if code == "h:c2p-left":
        return Relationship.hybrid(link.right)
    raise DataError(f"unknown relationship code {code!r}")


def format_flags(inf: RelInference) -> str:
    items = [f.value for f in _FLAG_ORDER if f in inf.flags]
    items += [f"{INDIRECT_FLAG}:{p}" for p in sorted(inf.partners)]
    return ",".join(items)


def export(db: RelationshipDb, header: Mapping[str, str] | None = None) -> str:
    """Pipe-separated relationship file, rows sorted by link."""
    lines = ["# bgprel relationships"]
    for key, value in sorted((header or {}).items()):
        lines.append(f"# {key}: {value}")
    lines.append("# left|right|code|flags|provenance")
    for link in sorted(db.links):
        inf = db.links[link]
        lines.append(f"{link.left}|{link.right}|{relationship_code(link, inf.base)}|"
                     f"{format_flags(inf)}|{inf.provenance.value}")
    return "\n".join(lines) + "\n"


def _parse_link(text: str) -> Link:
    left, _, right = text.partition("-")
    return Link.of(int(left), int(right))


def parse_export(text: str) -> RelationshipDb:
    db = RelationshipDb()
    pairs = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("|")
        if len(cols) != 5:
            raise DataError(f"line {lineno}: expected 5 columns, got {len(cols)}")
        try:
            link = Link.of(int(cols[0]), int(cols[1]))
            if link != (int(cols[0]), int(cols[1])):
                raise ValueError("left must be the smaller ASN")
            base = parse_relationship_code(link, cols[2])
            flags, partners = set(), set()
            for item in filter(None, cols[3].split(",")):
                if item.startswith(INDIRECT_FLAG + ":"):
                    partner = _parse_link(item.split(":", 1)[1])
                    partners.add(partner)
                    pairs.add((min(link, partner), max(link, partner)))
                else:
                    flags.add(Flag(item))
            inf = RelInference(link, base, frozenset(flags), frozenset(partners),
                               Provenance(cols[4]))
        except (ValueError, DataError) as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        db.links[link] = inf
    db.pairs = sorted(pairs)
    return db


# ------------------------------------------------------ json db round trip

def _inference_to_dict(inf: RelInference) -> dict:
    return {
        "left": inf.link.left, "right": inf.link.right,
        "kind": inf.base.kind.value, "provider": inf.base.provider,
        "flags": [f.value for f in _FLAG_ORDER if f in inf.flags],
        "partners": [str(p) for p in sorted(inf.partners)],
        "provenance": inf.provenance.value,
        "hybrid_kind": inf.hybrid_kind.value if inf.hybrid_kind else None,
        "evidence": inf.evidence_counts,
        "notes": list(inf.notes),
    }


def _inference_from_dict(d: Mapping) -> RelInference:
    link = Link.of(d["left"], d["right"])
    return RelInference(
        link, Relationship(RelKind(d["kind"]), d.get("provider")),
        frozenset(Flag(f) for f in d.get("flags", ())),
        frozenset(_parse_link(p) for p in d.get("partners", ())),
        Provenance(d.get("provenance", "COMMUNITIES")),
        HybridKind(d["hybrid_kind"]) if d.get("hybrid_kind") else None,
        dict(d.get("evidence", {})), tuple(d.get("notes", ())))


def db_to_json(db: RelationshipDb, meta: Mapping[str, object] | None = None) -> str:
    doc = {
        "meta": dict(meta or {}),
        "links": [_inference_to_dict(db.links[k]) for k in sorted(db.links)],
        "pairs": [[str(a), str(b)] for a, b in sorted(db.pairs)],
        "excluded": {str(k): v for k, v in sorted(db.excluded.items())},
        "sources": {name: [_inference_to_dict(src[k]) for k in sorted(src)]
                    for name, src in sorted(db.sources.items())},
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def db_from_json(text: str) -> tuple[RelationshipDb, dict]:
    try:
        doc = json.loads(text)
        db = RelationshipDb()
        for d in doc.get("links", ()):
            inf = _inference_from_dict(d)
            db.links[inf.link] = inf
        db.pairs = sorted((_parse_link(a), _parse_link(b)) for a, b in doc.get("pairs", ()))
        db.excluded = {_parse_link(k): v for k, v in doc.get("excluded", {}).items()}
        for name, rows in doc.get("sources", {}).items():
            infs = (_inference_from_dict(d) for d in rows)
            db.sources[name] = {i.link: i for i in infs}
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"bad relationship db: {exc}") from None
    return db, doc.get("meta", {})
