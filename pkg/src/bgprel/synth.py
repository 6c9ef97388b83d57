"""Seeded synthetic corpora with known relationships, and scoring against them.

The generator builds a small tiered topology, decorates chosen links with
special behaviour (hybrid, partial transit, backup, indirect peering,
siblings), and writes a corpus the pipeline reads natively: text BGP
records per collector and day, a community dictionary, route-server dumps
and ``truth.json``.
"""

from __future__ import annotations

import datetime as dt
import ipaddress
import json
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .dictionary import Category, CommunityMeaning, Dictionary, SettableBy, Source
from .engine import Flag, HybridKind, IndirectPair, Relationship, RelKind
from .errors import InfeasibleQuota
from .ingest import NO_EXPORT, BgpRecord, RecordKind, Segment, SegmentType, community_from_u32, format_text_record
from .locprf import format_rs_dump
from .paths import DEFAULT_REJECTED, Link

TIER1, TIER2, STUB, IXP = "tier1", "tier2", "stub", "ixp"
LOCATIONS = ("europe", "north-america", "asia", "denmark", "usa")
LOCPRF_SCHEMES = ((300, 200, 100), (120, 100, 80), (4000, 3000, 1000), (250, 150, 50))
START_DATE = dt.date(2010, 8, 1)


@dataclass
class SynthParams:
    n_ases: int = 200
    tier_mix: tuple[float, float] = (0.05, 0.25)
    non_tagger_tier2: int = 8
    near_default_observers: int = 2
    hybrid_ip: int = 2
    hybrid_location: int = 2
    partial_transit: int = 2
    backup_prepend: int = 2
    backup_noexport: int = 2
    indirect_pairs: int = 2
    siblings: int = 2
    te_prepend: int = 2
    non_valley_free: int = 5
    days: int = 10
    walks: int = 2000
    hybrid_messages: int = 4
    noise: float = 0.0
    seed: int = 42
    collectors: tuple[str, ...] = ("rrc00", "route-views2")


@dataclass
class AsInfo:
    asn: int
    tier: str
    tagger: bool
    rs_observer: bool = False
    near_default: bool = False


@dataclass
class TruthLink:
    link: Link
    base: Relationship
    flags: set[Flag] = field(default_factory=set)
    hybrid_kind: HybridKind | None = None
    partners: set[Link] = field(default_factory=set)
    te_prepend: bool = False

    @property
    def special(self) -> bool:
        return bool(self.flags or self.hybrid_kind or self.partners or self.te_prepend
                    or self.base.kind is RelKind.S2S)


@dataclass
class CommunityScheme:
    owner: int
    customer: int
    peer: int
    provider: int
    sibling: int
    rs_peering: int
    scope_restrict: int
    locations: dict[str, int]
    prepend_dual: bool = False
    noise: int | None = None

    def meanings(self) -> list[CommunityMeaning]:
        o = self.owner

        def wild(digit: int) -> str:
            return f"{o}:{digit}***"

        rows = [
            CommunityMeaning(o, wild(self.customer), Category.REL_CUSTOMER, SettableBy.OWNER, "", Source.IRR),
            CommunityMeaning(o, wild(self.peer), Category.REL_PEER, SettableBy.OWNER, "", Source.IRR),
            CommunityMeaning(o, wild(self.provider), Category.REL_PROVIDER, SettableBy.OWNER, "", Source.IRR),
        ]
        if self.prepend_dual:
            rows.append(CommunityMeaning(o, wild(self.provider), Category.ACTION_PREPEND,
                                         SettableBy.CUSTOMER, "", Source.NOC))
        rows += [
            CommunityMeaning(o, f"{o}:{self.sibling}", Category.REL_SIBLING, SettableBy.OWNER, "", Source.NOC),
            CommunityMeaning(o, f"{o}:{self.rs_peering}", Category.TAG_RS_PEERING, SettableBy.OWNER,
                             "", Source.NOC),
            CommunityMeaning(o, f"{o}:{self.scope_restrict}", Category.ACTION_SCOPE_RESTRICT,
                             SettableBy.CUSTOMER, "europe", Source.NOC),
        ]
        for name, value in sorted(self.locations.items(), key=lambda kv: kv[1]):
            rows.append(CommunityMeaning(o, f"{o}:{value}", Category.TAG_LOCATION, SettableBy.OWNER,
                                         name, Source.IRR))
        if self.noise is not None:
            for cat in (Category.REL_PEER, Category.REL_PROVIDER):
                rows.append(CommunityMeaning(o, wild(self.noise), cat, SettableBy.UNKNOWN, "",
                                             Source.MANUAL))
        return rows

    def value(self, digit: int, rng: random.Random) -> int:
        return digit * 1000 + rng.randrange(1000)


@dataclass
class LocPrfScheme:
    observer: int
    customer: int
    peer: int
    provider: int
    near_default: int | None = None
    near_neighbor: int | None = None
    declare_default: bool = False


@dataclass
class GroundTruth:
    params: SynthParams
    ases: dict[int, AsInfo]
    links: dict[Link, TruthLink]
    pairs: list[IndirectPair]
    schemes: dict[int, CommunityScheme]
    locprf: dict[int, LocPrfScheme]
    backup_days: dict[Link, list[int]] = field(default_factory=dict)

    def neighbors(self, asn: int) -> list[int]:
        return sorted(l.other(asn) for l in self.links if asn in l)

    def role(self, viewer: int, neighbor: int) -> str:
        """How ``viewer`` sees ``neighbor``: customer, peer, provider or sibling."""
        rel = self.links[Link.of(viewer, neighbor)].base
        if rel.kind is RelKind.P2P:
            return "peer"
        if rel.kind is RelKind.S2S:
            return "sibling"
        return "customer" if rel.provider == viewer else "provider"

    def category(self, link: Link) -> str:
        return _category(self.links[link].base)

    def dictionary(self) -> Dictionary:
        rows = []
        for asn in sorted(self.schemes):
            rows.extend(self.schemes[asn].meanings())
        return Dictionary(rows)

    def to_json(self) -> str:
        doc = {
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.params).items()},
            "ases": [asdict(a) for a in sorted(self.ases.values(), key=lambda a: a.asn)],
            "links": [
                {"left": t.link.left, "right": t.link.right, "kind": t.base.kind.value,
                 "provider": t.base.provider, "flags": sorted(f.value for f in t.flags),
                 "hybrid_kind": t.hybrid_kind.value if t.hybrid_kind else None,
                 "partners": sorted(str(p) for p in t.partners), "te_prepend": t.te_prepend}
                for t in (self.links[k] for k in sorted(self.links))
            ],
            "pairs": [[str(a), str(b)] for a, b in self.pairs],
            "schemes": [asdict(s) for s in (self.schemes[k] for k in sorted(self.schemes))],
            "locprf": [asdict(s) for s in (self.locprf[k] for k in sorted(self.locprf))],
            "backup_days": {str(k): v for k, v in sorted(self.backup_days.items())},
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        doc = json.loads(text)
        p = doc["params"]
        params = SynthParams(**{k: tuple(v) if isinstance(v, list) else v for k, v in p.items()})

        def link_of(s: str) -> Link:
            a, _, b = s.partition("-")
            return Link.of(int(a), int(b))

        links = {}
        for d in doc["links"]:
            link = Link.of(d["left"], d["right"])
            links[link] = TruthLink(
                link, Relationship(RelKind(d["kind"]), d["provider"]),
                {Flag(f) for f in d["flags"]},
                HybridKind(d["hybrid_kind"]) if d["hybrid_kind"] else None,
                {link_of(s) for s in d["partners"]}, d["te_prepend"])
        return cls(
            params,
            {a["asn"]: AsInfo(**a) for a in doc["ases"]},
            links,
            [(link_of(a), link_of(b)) for a, b in doc["pairs"]],
            {s["owner"]: CommunityScheme(**s) for s in doc["schemes"]},
            {s["observer"]: LocPrfScheme(**s) for s in doc["locprf"]},
            {link_of(k): v for k, v in doc.get("backup_days", {}).items()},
        )


def _category(rel: Relationship) -> str:
    return rel.kind.value


# ---------------------------------------------------------------- generate

def _pick_asns(rng: random.Random, n: int) -> list[int]:
    pool = [a for a in range(1000, 50000) if a not in DEFAULT_REJECTED]
    return sorted(rng.sample(pool, n))


def generate(params: SynthParams | None = None, **overrides) -> GroundTruth:
    """Build a ground-truth topology.  Raises :class:`InfeasibleQuota`."""
    params = params or SynthParams()
    if overrides:
        params = SynthParams(**{**asdict(params), **overrides})
    rng = random.Random(params.seed)

    n_ixp = params.indirect_pairs
    n_t1 = max(int(params.n_ases * params.tier_mix[0]), 0)
    n_t2 = max(int(params.n_ases * params.tier_mix[1]), 0)
    n_stub = params.n_ases - n_t1 - n_t2 - n_ixp
    observers = params.non_tagger_tier2 + params.near_default_observers
    hybrids = params.hybrid_ip + params.hybrid_location
    need_t2_taggers = max(2 * params.indirect_pairs, params.siblings, 1)
    if n_t1 < 4 or n_stub < params.siblings + 1:
        raise InfeasibleQuota(f"{params.n_ases} ASes cannot hold the tier mix and quotas")
    if n_t2 < observers + need_t2_taggers + hybrids:
        raise InfeasibleQuota(f"{n_t2} tier-2 ASes cannot host {observers} observers, "
                              f"{hybrids} hybrids and {need_t2_taggers} taggers for siblings "
                              f"and indirect pairs")

    asns = _pick_asns(rng, params.n_ases)
    rng.shuffle(asns)
    t1, t2 = sorted(asns[:n_t1]), sorted(asns[n_t1:n_t1 + n_t2])
    stubs = sorted(asns[n_t1 + n_t2:n_t1 + n_t2 + n_stub])
    ixps = sorted(asns[n_t1 + n_t2 + n_stub:])

    ases: dict[int, AsInfo] = {}
    for a in t1:
        ases[a] = AsInfo(a, TIER1, True)
    shuffled = list(t2)
    rng.shuffle(shuffled)
    plain_obs = set(shuffled[:params.non_tagger_tier2])
    near_obs = set(shuffled[params.non_tagger_tier2:observers])
    for a in t2:
        ases[a] = AsInfo(a, TIER2, a not in plain_obs, a in plain_obs or a in near_obs, a in near_obs)
    for a in stubs:
        ases[a] = AsInfo(a, STUB, False)
    for a in ixps:
        ases[a] = AsInfo(a, IXP, False)

    links: dict[Link, TruthLink] = {}

    def add(a: int, b: int, rel: Relationship) -> TruthLink:
        link = Link.of(a, b)
        t = links[link] = TruthLink(link, rel)
        return t

    def min_class(a: int) -> int:
        return 4 if ases[a].near_default else 3 if ases[a].rs_observer else 1

    for i, a in enumerate(t1):
        for b in t1[i + 1:]:
            add(a, b, Relationship.p2p())
    for a in t2:
        k = max(min_class(a), rng.randint(2, 4))
        for p in rng.sample(t1, min(k, len(t1))):
            add(p, a, Relationship.p2c(p))

    peers: dict[int, set[int]] = defaultdict(set)
    for a in t2:
        want = max(min_class(a), rng.randint(2, 6))
        candidates = [b for b in t2 if b != a and b not in peers[a]]
        rng.shuffle(candidates)
        for b in candidates:
            if len(peers[a]) >= want:
                break
            if len(peers[b]) >= (8 if ases[b].rs_observer else 10):
                continue
            peers[a].add(b)
            peers[b].add(a)
            add(a, b, Relationship.p2p())

    customers: dict[int, set[int]] = defaultdict(set)
    cap = {a: 15 if ases[a].near_default else 11 if ases[a].rs_observer else 40 for a in t2}
    queue = list(stubs)
    rng.shuffle(queue)
    for obs in sorted(plain_obs | near_obs):
        while len(customers[obs]) < min_class(obs) and queue:
            s = queue.pop()
            customers[obs].add(s)
            add(obs, s, Relationship.p2c(obs))
    for s in stubs:
        have = sum(1 for c in customers.values() if s in c)
        n = rng.choice((1, 1, 2, 2, 3)) - have
        options = [a for a in t2 if len(customers[a]) < cap[a] and s not in customers[a]]
        for p in rng.sample(options, min(max(n, 0), len(options))):
            customers[p].add(s)
            add(p, s, Relationship.p2c(p))

    taggers2 = [a for a in t2 if ases[a].tagger and not ases[a].rs_observer]
    plain = [a for a in t1 + t2 if not ases[a].rs_observer]

    def transit_candidates(provider_pool: Iterable[int], customer_tagger: bool) -> list[TruthLink]:
        pool = set(provider_pool)
        out = []
        for t in links.values():
            if t.special or t.base.kind is not RelKind.P2C or t.base.provider not in pool:
                continue
            c = t.link.other(t.base.provider)
            if ases[c].rs_observer or (customer_tagger and not ases[c].tagger):
                continue
            out.append(t)
        out.sort(key=lambda t: t.link)
        rng.shuffle(out)
        return out

    sib_owner = list(taggers2)
    rng.shuffle(sib_owner)
    free_stubs = [s for s in stubs if not any(t2a for t2a in plain_obs | near_obs if s in customers[t2a])]
    rng.shuffle(free_stubs)
    if len(free_stubs) < params.siblings or len(sib_owner) < params.siblings:
        raise InfeasibleQuota("not enough ASes for the sibling quota")
    for a, s in zip(sib_owner[:params.siblings], free_stubs[:params.siblings]):
        link = Link.of(a, s)
        if link in links:
            links[link].base = Relationship.s2s()
        else:
            add(a, s, Relationship.s2s())

    hybrid_pool = transit_candidates(t1, customer_tagger=True)
    if len(hybrid_pool) < hybrids:
        raise InfeasibleQuota(f"only {len(hybrid_pool)} links can host {hybrids} hybrids")
    for i, t in enumerate(hybrid_pool[:hybrids]):
        t.base = Relationship.hybrid(t.base.provider)
        t.hybrid_kind = HybridKind.IP_VERSION if i < params.hybrid_ip else HybridKind.LOCATION

    quotas = [(params.partial_transit, Flag.PARTIAL_TRANSIT), (params.backup_prepend, Flag.BACKUP_PREPEND),
              (params.backup_noexport, Flag.BACKUP_NOEXPORT), (params.te_prepend, None)]
    for n, flag in quotas:
        pool = transit_candidates([a for a in plain if ases[a].tagger], customer_tagger=False)
        if len(pool) < n:
            raise InfeasibleQuota(f"only {len(pool)} transit links left for {flag or 'te-prepend'}")
        for t in pool[:n]:
            if flag is None:
                t.te_prepend = True
            else:
                t.flags.add(flag)

    members = [a for a in taggers2]
    rng.shuffle(members)
    pairs: list[IndirectPair] = []
    for i, r in enumerate(ixps):
        a, b = members[2 * i], members[2 * i + 1]
        first = add(a, r, Relationship.p2p())
        second = add(r, b, Relationship.p2p())
        first.partners.add(second.link)
        second.partners.add(first.link)
        pairs.append((min(first.link, second.link), max(first.link, second.link)))

    schemes: dict[int, CommunityScheme] = {}
    for a in sorted(x for x in ases if ases[x].tagger):
        digits = rng.sample(range(1, 9), 3)
        schemes[a] = CommunityScheme(
            a, customer=digits[0], peer=digits[1], provider=digits[2],
            sibling=rng.randrange(10, 100), rs_peering=rng.randrange(100, 200),
            scope_restrict=rng.randrange(200, 300),
            locations={name: 300 + j for j, name in enumerate(LOCATIONS)},
            prepend_dual=rng.random() < 0.3,
            noise=9 if params.noise > 0 else None)

    locprf: dict[int, LocPrfScheme] = {}
    for obs in sorted(plain_obs | near_obs):
        cust, peer, prov = (300, 200, 100) if ases[obs].near_default else rng.choice(LOCPRF_SCHEMES)
        scheme = LocPrfScheme(obs, cust, peer, prov, declare_default=rng.random() < 0.5)
        if ases[obs].near_default:
            scheme.near_default = peer - 5
            scheme.near_neighbor = sorted(peers[obs])[0]
        locprf[obs] = scheme

    truth = GroundTruth(params, ases, links, sorted(pairs), schemes, locprf)
    for t in links.values():
        if Flag.BACKUP_PREPEND in t.flags:
            run = rng.randint(2, min(4, params.days))
            start = rng.randrange(0, params.days - run + 1)
            truth.backup_days[t.link] = list(range(start, start + run))
    _check_observer_profiles(truth)
    return truth


def _check_observer_profiles(truth: GroundTruth) -> None:
    for obs, scheme in truth.locprf.items():
        counts = defaultdict(int)
        for n in truth.neighbors(obs):
            counts[truth.role(obs, n)] += 1
        ranked = sorted((counts[c] for c in ("customer", "peer", "provider")), reverse=True)
        if ranked[-1] == 0 or ranked[1] >= 4 * ranked[2]:
            raise InfeasibleQuota(f"observer AS{obs} has an unbalanced neighbour mix {dict(counts)}")
        if scheme.near_default is not None and ranked[-1] < 4:
            raise InfeasibleQuota(f"observer AS{obs} too small for a near-default value")


# --------------------------------------------------------------- emission

class _Emitter:
    def __init__(self, truth: GroundTruth, rng: random.Random):
        self.truth = truth
        self.rng = rng
        self.params = truth.params
        self.records: dict[tuple[str, int], list[BgpRecord]] = defaultdict(list)
        self.v4 = 0
        self.v6 = 0

    def prefix(self, version: int = 4) -> str:
        if version == 6:
            self.v6 += 1
            return str(ipaddress.IPv6Network((0x20010DB8 << 96 | self.v6 << 80, 48)))
        self.v4 += 1
        base = (11 << 24) + (self.v4 << 8)
        return str(ipaddress.IPv4Network((base, 24)))

    def tag(self, viewer: int, neighbor: int, extra: Iterable[int] = ()) -> list[tuple[int, int]]:
        scheme = self.truth.schemes[viewer]
        role = self.truth.role(viewer, neighbor)
        if role == "sibling":
            out = [(viewer, scheme.sibling)]
        else:
            digit = {"customer": scheme.customer, "peer": scheme.peer, "provider": scheme.provider}[role]
            out = [(viewer, scheme.value(digit, self.rng))]
            if role == "customer" and scheme.prepend_dual and self.rng.random() < 0.3:
                out.append((viewer, scheme.value(scheme.provider, self.rng)))
        if self.rng.random() < 0.3:
            out.append((viewer, self.rng.choice(sorted(scheme.locations.values()))))
        out.extend((viewer, v) for v in extra)
        return out

    def noisy(self, viewer: int, comms: list[tuple[int, int]]) -> list[tuple[int, int]]:
        scheme = self.truth.schemes[viewer]
        if scheme.noise is not None and self.rng.random() < self.params.noise:
            comms = comms + [(viewer, scheme.value(scheme.noise, self.rng))]
        return comms

    def emit(self, hops: list[int], communities: list[tuple[int, int]], day: int | None = None,
             version: int = 4, prepend: dict[int, int] | None = None) -> None:
        if day is None:
            day = self.rng.randrange(self.params.days)
        collector = self.rng.choice(self.params.collectors)
        peer = hops[0]
        expanded: list[int] = []
        for a in hops:
            expanded.extend([a] * (prepend or {}).get(a, 1))
        ts = int(dt.datetime.combine(START_DATE + dt.timedelta(days=day), dt.time(),
                                     tzinfo=dt.timezone.utc).timestamp())
        bucket = self.records[(collector, day)]
        rec = BgpRecord(
            timestamp=ts + len(bucket), monitor_id=f"{collector}/{_monitor_ip(peer)}",
            peer_asn=peer, prefix=ipaddress.ip_network(self.prefix(version)),
            raw_as_path=(Segment(SegmentType.SEQUENCE, tuple(expanded)),),
            communities=tuple(sorted(set(communities))), record_kind=RecordKind.RIB)
        bucket.append(rec)

    def tagged_path(self, hops: list[int], tag_prob: float = 0.7) -> list[tuple[int, int]]:
        comms = []
        for i in range(len(hops) - 1):
            a = hops[i]
            if self.truth.ases[a].tagger and self.rng.random() < tag_prob:
                comms.extend(self.noisy(a, self.tag(a, hops[i + 1])))
        return comms


def _monitor_ip(asn: int) -> str:
    return str(ipaddress.IPv4Address((192 << 24) | (asn & 0xFFFFFF)))


def _coverage(em: _Emitter) -> None:
    truth = em.truth
    for link in sorted(truth.links):
        t = truth.links[link]
        if t.partners:
            continue
        for receiver, sender in ((link.left, link.right), (link.right, link.left)):
            if not truth.ases[receiver].tagger:
                continue
            if t.hybrid_kind is not None:
                _hybrid_messages(em, t, receiver, sender)
                continue
            extra: list[int] = []
            extra_c: list[tuple[int, int]] = []
            prepend = None
            days: list[int | None] = [None]
            customer_to_provider = t.base.kind is RelKind.P2C and t.base.provider == receiver
            if Flag.PARTIAL_TRANSIT in t.flags and customer_to_provider:
                extra.append(truth.schemes[receiver].scope_restrict)
            if Flag.BACKUP_NOEXPORT in t.flags and customer_to_provider:
                extra_c.append(community_from_u32(NO_EXPORT))
            if Flag.BACKUP_PREPEND in t.flags:
                days = list(truth.backup_days[link])
                if customer_to_provider:
                    prepend = {sender: 3}
            if t.te_prepend:
                days = list(range(em.params.days))
                if customer_to_provider:
                    prepend = {sender: 2}
            for day in days:
                comms = em.noisy(receiver, em.tag(receiver, sender, extra)) + extra_c
                em.emit([receiver, sender], comms, day, prepend=prepend)


def _hybrid_messages(em: _Emitter, t: TruthLink, receiver: int, sender: int) -> None:
    truth, rng = em.truth, em.rng
    scheme = truth.schemes[receiver]
    transit_role = "customer" if t.base.provider == receiver else "provider"
    digit = {"customer": scheme.customer, "provider": scheme.provider}[transit_role]
    for component in ("transit", "peer"):
        for _ in range(em.params.hybrid_messages):
            d = digit if component == "transit" else scheme.peer
            comms = [(receiver, scheme.value(d, rng))]
            version = 4
            if t.hybrid_kind is HybridKind.IP_VERSION:
                version = 4 if component == "transit" else 6
            else:
                loc = "usa" if component == "transit" else "denmark"
                comms.append((receiver, scheme.locations[loc]))
            em.emit([receiver, sender], em.noisy(receiver, comms), version=version)


def _indirect(em: _Emitter) -> None:
    truth = em.truth
    for first, second in truth.pairs:
        r = (set(first) & set(second)).pop()
        a, b = first.other(r), second.other(r)
        for x, y in ((a, b), (b, a)):
            for _ in range(3):
                scheme = truth.schemes[x]
                comms = em.noisy(x, [(x, scheme.rs_peering)])
                em.emit([x, r, y], comms)


def _walk_graph(truth: GroundTruth):
    up: dict[int, list[int]] = defaultdict(list)
    down: dict[int, list[int]] = defaultdict(list)
    side: dict[int, list[int]] = defaultdict(list)
    for link, t in sorted(truth.links.items()):
        if t.special and not t.te_prepend and Flag.PARTIAL_TRANSIT not in t.flags:
            continue
        if t.base.kind is RelKind.P2C:
            p = t.base.provider
            c = link.other(p)
            up[c].append(p)
            down[p].append(c)
        elif t.base.kind is RelKind.P2P:
            side[link.left].append(link.right)
            side[link.right].append(link.left)
    return up, down, side


def _random_walk(rng: random.Random, origin: int, up, down, side) -> list[int]:
    route = [origin]
    while up[route[-1]] and rng.random() < 0.7:
        nxt = [p for p in up[route[-1]] if p not in route]
        if not nxt:
            break
        route.append(rng.choice(nxt))
    if side[route[-1]] and rng.random() < 0.5:
        nxt = [p for p in side[route[-1]] if p not in route]
        if nxt:
            route.append(rng.choice(nxt))
    while down[route[-1]] and rng.random() < 0.6:
        nxt = [c for c in down[route[-1]] if c not in route]
        if not nxt:
            break
        route.append(rng.choice(nxt))
    return route[::-1]


def _walks(em: _Emitter) -> list[list[int]]:
    truth, rng = em.truth, em.rng
    up, down, side = _walk_graph(truth)
    origins = sorted(a for a, info in truth.ases.items() if info.tier != IXP)
    n = 0
    while n < em.params.walks:
        hops = _random_walk(rng, rng.choice(origins), up, down, side)
        if len(hops) < 2:
            continue
        em.emit(hops, em.tagged_path(hops))
        n += 1

    valleys = []
    candidates = sorted(p for p in down if len(up[p]) and any(len(up[c]) > 1 for c in down[p]))
    for _ in range(em.params.non_valley_free):
        if not candidates:
            break
        for _attempt in range(50):
            p = rng.choice(candidates)
            c = rng.choice(down[p])
            others = [q for q in up[c] if q != p]
            if not others:
                continue
            o = rng.choice(up[p])
            if o in (c,) or o in others:
                continue
            route = [o, p, c, rng.choice(others)]
            if len(set(route)) < 4:
                continue
            hops = route[::-1]
            em.emit(hops, em.tagged_path(hops))
            valleys.append(hops)
            break
    return valleys


def _rs_dumps(truth: GroundTruth, rng: random.Random) -> dict[int, str]:
    out = {}
    for obs in sorted(truth.locprf):
        scheme = truth.locprf[obs]
        value = {"customer": scheme.customer, "peer": scheme.peer, "provider": scheme.provider}
        rows = []
        n = 0
        for nb in truth.neighbors(obs):
            t = truth.links[Link.of(obs, nb)]
            role = truth.role(obs, nb)
            tail = [x for x in truth.neighbors(nb) if x != obs and truth.role(nb, x) == "customer"]
            for k in range(rng.randint(1, 3)):
                n += 1
                path = [nb]
                if tail and k:
                    path.append(tail[(k - 1) % len(tail)])
                if rng.random() < 0.3:
                    path = [obs] + path
                lp: int | None = value[role] if role in value else None
                if t.hybrid_kind is not None:
                    lp = value["customer" if t.base.provider == obs else "provider"]
                if scheme.declare_default and lp == scheme.peer:
                    lp = None
                rows.append((f"172.{16 + (n >> 16) % 16}.{(n >> 8) & 255}.{n & 255}/32", lp, path))
            if nb == scheme.near_neighbor:
                n += 1
                rows.append((f"172.{16 + (n >> 16) % 16}.{(n >> 8) & 255}.{n & 255}/32",
                             scheme.near_default, [nb]))
        out[obs] = format_rs_dump(obs, rows, START_DATE,
                                  scheme.peer if scheme.declare_default else None)
    return out


@dataclass
class EmittedCorpus:
    files: dict[str, str]
    valley_paths: list[list[int]]

    def write(self, root: str | Path) -> list[Path]:
        root = Path(root)
        written = []
        for rel in sorted(self.files):
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.files[rel], encoding="utf-8")
            written.append(path)
        return written


def emit_corpus(truth: GroundTruth) -> EmittedCorpus:
    """Render the truth as corpus files keyed by relative path."""
    rng = random.Random(truth.params.seed + 1)
    em = _Emitter(truth, rng)
    _coverage(em)
    _indirect(em)
    valleys = _walks(em)
    files: dict[str, str] = {}
    for (collector, day), recs in sorted(em.records.items()):
        date = START_DATE + dt.timedelta(days=day)
        body = "\n".join(format_text_record(r) for r in sorted(recs, key=lambda r: r.timestamp))
        files[f"corpus/{collector}.{date:%Y%m%d}.txt"] = body
    files["dictionary.tsv"] = truth.dictionary().dumps()
    for obs, text in _rs_dumps(truth, rng).items():
        files[f"rs/AS{obs}.rs"] = text
    files["truth.json"] = truth.to_json()
    return EmittedCorpus(files, valleys)


# ----------------------------------------------------------------- scoring

@dataclass
class CategoryScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0


@dataclass
class Score:
    categories: dict[str, CategoryScore]
    confusion: list[tuple[str, str, str]]

    def summary(self) -> str:
        lines = [f"{'category':<18} {'tp':>5} {'fp':>4} {'fn':>4} {'precision':>9} {'recall':>7}"]
        for name, c in self.categories.items():
            lines.append(f"{name:<18} {c.tp:>5} {c.fp:>4} {c.fn:>4} {c.precision:>9.3f} {c.recall:>7.3f}")
        for link, want, got in self.confusion:
            lines.append(f"mismatch {link}: truth {want}, got {got}")
        return "\n".join(lines)


BASE_CATEGORIES = ("p2c", "p2p", "s2s", "hybrid")
FLAG_CATEGORIES = {"partial-transit": Flag.PARTIAL_TRANSIT, "backup-prepend": Flag.BACKUP_PREPEND,
                   "backup-noexport": Flag.BACKUP_NOEXPORT}


def score(db, truth: GroundTruth) -> Score:
    """Per-category precision and recall of ``db`` (a :class:`RelationshipDb`).

    A truth link missing from the db costs recall only.  A decided link
    counts as a true positive for its category only if the base matches
    exactly, provider included.
    """
    cats = {name: CategoryScore() for name in
            (*BASE_CATEGORIES, "hybrid:ip-version", "hybrid:location", *FLAG_CATEGORIES,
             "indirect-peering")}
    confusion = []
    for link in sorted(set(truth.links) | set(db.links)):
        t = truth.links.get(link)
        got = db.links.get(link)
        want_cat = _category(t.base) if t else None
        if got is None:
            cats[want_cat].fn += 1
            continue
        got_cat = _category(got.base)
        if t is not None and got.base == t.base:
            cats[got_cat].tp += 1
        else:
            cats[got_cat].fp += 1
            if t is not None:
                cats[want_cat].fn += 1
            confusion.append((str(link), str(t.base) if t else "absent", str(got.base)))
        want_kind = t.hybrid_kind if t else None
        for kind in (HybridKind.IP_VERSION, HybridKind.LOCATION):
            c = cats[f"hybrid:{kind.value}"]
            predicted = got.hybrid_kind is kind and got.base == (t.base if t else None)
            if got.hybrid_kind is kind:
                if predicted and want_kind is kind:
                    c.tp += 1
                else:
                    c.fp += 1
            elif want_kind is kind:
                c.fn += 1
    for link, t in truth.links.items():
        if t.hybrid_kind is not None and link not in db.links:
            cats[f"hybrid:{t.hybrid_kind.value}"].fn += 1

    for name, flag in FLAG_CATEGORIES.items():
        want = {l for l, t in truth.links.items() if flag in t.flags}
        got = {l for l, inf in db.links.items() if flag in inf.flags}
        cats[name] = CategoryScore(len(want & got), len(got - want), len(want - got))
    want_pairs, got_pairs = set(truth.pairs), set(db.pairs)
    cats["indirect-peering"] = CategoryScore(len(want_pairs & got_pairs), len(got_pairs - want_pairs),
                                             len(want_pairs - got_pairs))
    return Score(cats, confusion)
