"""LocPrf profiling of route-server table dumps.

A route server exposes the LocPrf its AS assigns to every route.  For each
observer AS the values are tallied over neighbour links and over routes, a
handful of dominant defaults is selected, the defaults are mapped to
relationship classes (Communities labels first, value ordering as the
fallback) and near-default values are folded into the class of the default
they shadow.

Dump format::

    OBSERVER_ASN: 4436
    DEFAULT_LOCPRF: 100        # optional
    DATE: 2010-08-01
    # prefix | locprf | as-path
    1.22.73.0/24 | 100 | 4589 15412 18101 45528
"""

from __future__ import annotations

import datetime as dt
import ipaddress
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .engine import Provenance, RelInference, Relationship, RelKind
from .errors import NoDefaults, RouteServerDumpError, TextRecordError
from .ingest import SegmentType, parse_as_path
from .paths import DEFAULT_REJECTED, AsnFilter, CleanPath, Link, PathRejected, sanitize

log = logging.getLogger(__name__)

MAX_DEFAULTS = 5


class RouteClass(str, Enum):
    """Role of the neighbour a route was learned from, seen by the observer."""

    CUSTOMER = "customer"
    PEER = "peer"
    PROVIDER = "provider"


@dataclass(frozen=True)
class LocPrfObservation:
    observer_asn: int
    neighbor_asn: int
    locprf: int
    path: CleanPath
    prefix: str


@dataclass
class RsDump:
    observer_asn: int
    date: dt.date | None
    default_locprf: int | None
    observations: list[LocPrfObservation] = field(default_factory=list)
    skipped: int = 0

    def __iter__(self):
        return iter(self.observations)

    def __len__(self) -> int:
        return len(self.observations)


def _parse_date(text: str) -> dt.date:
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%Y%m%d"):
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    raise RouteServerDumpError(f"bad DATE {text!r}")


def parse_rs_dump(source: str | Sequence[str] | Path,
                  rejected: AsnFilter = DEFAULT_REJECTED) -> RsDump:
    """Parse a normalized route-server dump; bad rows are skipped and counted."""
    if isinstance(source, Path):
        lines = source.read_text(encoding="utf-8").splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = list(source)

    header: dict[str, str] = {}
    rows: list[tuple[int, str]] = []
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "|" in text:
            rows.append((lineno, text))
            continue
        key, sep, value = text.partition(":")
        if sep and key.strip().upper() in ("OBSERVER_ASN", "DEFAULT_LOCPRF", "DATE"):
            header[key.strip().upper()] = value.strip()
        else:
            rows.append((lineno, text))

    if not rows and "OBSERVER_ASN" not in header:
        return RsDump(0, None, None)
    if "OBSERVER_ASN" not in header or not header["OBSERVER_ASN"].isdigit():
        raise RouteServerDumpError("route-server dump lacks a numeric OBSERVER_ASN header")
    observer = int(header["OBSERVER_ASN"])
    default = header.get("DEFAULT_LOCPRF")
    if default is not None and not default.isdigit():
        raise RouteServerDumpError(f"bad DEFAULT_LOCPRF {default!r}")
    dump = RsDump(observer, _parse_date(header["DATE"]) if "DATE" in header else None,
                  int(default) if default is not None else None)

    for lineno, text in rows:
        cols = [c.strip() for c in text.split("|")]
        if len(cols) != 3:
            dump.skipped += 1
            log.debug("rs dump line %d: expected 3 columns", lineno)
            continue
        prefix_text, locprf_text, path_text = cols
        try:
            prefix = str(ipaddress.ip_network(prefix_text, strict=False))
            if locprf_text:
                if not locprf_text.isdigit():
                    raise ValueError(f"bad locprf {locprf_text!r}")
                locprf = int(locprf_text)
            elif dump.default_locprf is not None:
                locprf = dump.default_locprf
            else:
                raise ValueError("no LocPrf and no declared default")
            segments = parse_as_path(path_text, lineno)
            if any(seg.kind is SegmentType.SET for seg in segments):
                raise ValueError("AS_SET in path")
            flat = [a for seg in segments for a in seg.asns]
            while flat and flat[0] == observer:
                flat.pop(0)
            path = sanitize(flat, rejected)
        except (ValueError, TextRecordError, PathRejected) as exc:
            dump.skipped += 1
            log.debug("rs dump line %d skipped: %s", lineno, exc)
            continue
        dump.observations.append(
            LocPrfObservation(observer, path.hops[0], locprf, path, prefix))
    return dump


def format_rs_dump(observer: int, rows: Iterable[tuple[str, int | None, Sequence[int]]],
                   date: dt.date | None = None, default_locprf: int | None = None) -> str:
    lines = [f"OBSERVER_ASN: {observer}"]
    if default_locprf is not None:
        lines.append(f"DEFAULT_LOCPRF: {default_locprf}")
    if date is not None:
        lines.append(f"DATE: {date.isoformat()}")
    lines.append("# prefix | locprf | as-path")
    for prefix, locprf, path in rows:
        lp = "" if locprf is None else str(locprf)
        lines.append(f"{prefix} | {lp} | {' '.join(map(str, path))}")
    return "\n".join(lines) + "\n"


@dataclass
class LocPrfProfile:
    observer_asn: int
    link_count: dict[int, int] = field(default_factory=dict)
    path_count: dict[int, int] = field(default_factory=dict)
    neighbor_values: dict[int, Counter] = field(default_factory=dict)
    defaults: list[tuple[int, RouteClass]] = field(default_factory=list)
    extended: dict[int, RouteClass] = field(default_factory=dict)
    exceptions: list[tuple[int, str]] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    usable: bool = True

    def values(self) -> list[int]:
        return sorted(self.link_count)

    def neighbors_with(self, value: int) -> set[int]:
        return {n for n, vals in self.neighbor_values.items() if value in vals}

    def mapping(self) -> dict[int, RouteClass]:
        out = dict(self.defaults)
        out.update(self.extended)
        return out


def build_profile(observations: Iterable[LocPrfObservation]) -> LocPrfProfile:
    """Tally distinct neighbour links and routes per LocPrf value."""
    observations = list(observations)
    observers = {o.observer_asn for o in observations}
    if len(observers) > 1:
        raise ValueError(f"observations from several observers: {sorted(observers)}")
    profile = LocPrfProfile(observers.pop() if observers else 0)
    per_neighbor: dict[int, Counter] = defaultdict(Counter)
    paths: Counter = Counter()
    for o in observations:
        per_neighbor[o.neighbor_asn][o.locprf] += 1
        paths[o.locprf] += 1
    links: Counter = Counter()
    for vals in per_neighbor.values():
        links.update(vals.keys())
    profile.link_count = dict(sorted(links.items()))
    profile.path_count = dict(sorted(paths.items()))
    profile.neighbor_values = dict(sorted(per_neighbor.items()))
    return profile


def select_defaults(profile: LocPrfProfile, dominance_ratio: float = 4.0,
                    cap: int = MAX_DEFAULTS) -> list[int]:
    """Pick the dominant LocPrf values, most frequent first.

    Values are ranked by link count (then route count, then value).  The
    cut is the first position k (k >= 2 when two or more values exist,
    k <= cap) where the k-th value's link count is at least
    ``dominance_ratio`` times the next one's.  No such cut raises
    :class:`NoDefaults`.
    """
    ranked = sorted(profile.link_count,
                    key=lambda v: (-profile.link_count[v], -profile.path_count.get(v, 0), -v))
    if not ranked:
        raise NoDefaults(f"AS{profile.observer_asn}: no LocPrf values")
    if len(ranked) == 1:
        return ranked
    counts = [profile.link_count[v] for v in ranked] + [0]
    for k in range(2, min(cap, len(ranked)) + 1):
        if counts[k - 1] >= dominance_ratio * counts[k]:
            return ranked[:k]
    raise NoDefaults(f"AS{profile.observer_asn}: no dominant LocPrf values among {len(ranked)}")


@dataclass
class DefaultMapping:
    classes: dict[int, RouteClass]
    exceptions: list[tuple[int, str]] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)


def _majority(counter: Counter) -> RouteClass | None:
    if not counter:
        return None
    ranked = counter.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    return ranked[0][0]


def _ordering_expectation(defaults: Sequence[int]) -> dict[int, RouteClass]:
    ordered = sorted(defaults, reverse=True)
    if len(ordered) < 2:
        return {}
    expected = {ordered[0]: RouteClass.CUSTOMER, ordered[-1]: RouteClass.PROVIDER}
    if len(ordered) == 3:
        expected[ordered[1]] = RouteClass.PEER
    return expected


def map_defaults(profile: LocPrfProfile, defaults: Sequence[int],
                 labels: Mapping[int, RouteClass]) -> DefaultMapping:
    """Assign a relationship class to each default value.

    ``labels`` maps neighbour ASN to the class already known from
    Communities.  A labeled majority always wins; ordering (largest value =
    customer routes, smallest = provider routes, middle of three = peer) only
    fills in unlabeled values.  Disagreements are recorded as exceptions.
    """
    expected = _ordering_expectation(defaults)
    classes: dict[int, RouteClass] = {}
    from_ordering: set[int] = set()
    out = DefaultMapping(classes)
    for v in defaults:
        tally = Counter(labels[n] for n in profile.neighbors_with(v) if n in labels)
        label = _majority(tally)
        if label is not None:
            classes[v] = label
            if v in expected and expected[v] is not label:
                out.exceptions.append(
                    (v, f"LocPrf {v} carries {label.value} routes, ordering suggests "
                        f"{expected[v].value}"))
        elif tally:
            out.dropped.append(v)
        elif v in expected:
            classes[v] = expected[v]
            from_ordering.add(v)
        else:
            out.dropped.append(v)

    by_class: dict[RouteClass, list[int]] = defaultdict(list)
    for v, cls in classes.items():
        by_class[cls].append(v)
    for cls, values in by_class.items():
        if len(values) > 1 and from_ordering.intersection(values):
            for v in values:
                del classes[v]
                out.dropped.append(v)
    out.dropped.sort()
    return out


def proximity_bound(default: int, absolute: int = 10, relative: float = 0.05) -> float:
    return max(absolute, relative * default)


def extend_near_defaults(profile: LocPrfProfile, defaults: Sequence[int],
                         classes: Mapping[int, RouteClass],
                         labels: Mapping[int, RouteClass] | None = None,
                         absolute: int = 10, relative: float = 0.05) -> dict[int, RouteClass]:
    """Fold rare values into the class of a nearby default used by the same neighbours."""
    labels = labels or {}
    default_set = set(defaults)
    extended: dict[int, RouteClass] = {}
    for v in profile.values():
        if v in default_set:
            continue
        near = [d for d in defaults if abs(v - d) <= proximity_bound(d, absolute, relative)]
        if not near:
            continue
        near_classes = {classes.get(d) for d in near}
        if len(near_classes) != 1 or None in near_classes:
            continue
        users = profile.neighbors_with(v)
        if not users:
            continue
        anchored = any(
            sum(1 for n in users if d in profile.neighbor_values[n]) * 2 > len(users)
            for d in near)
        if not anchored:
            continue
        cls = near_classes.pop()
        if any(labels[n] is not cls for n in users if n in labels):
            log.debug("AS%d: near-default %d discarded, contradicts Communities",
                      profile.observer_asn, v)
            continue
        extended[v] = cls
    return extended


def _relationship(observer: int, neighbor: int, cls: RouteClass) -> Relationship:
    if cls is RouteClass.CUSTOMER:
        return Relationship.p2c(observer)
    if cls is RouteClass.PROVIDER:
        return Relationship.p2c(neighbor)
    return Relationship.p2p()


def infer_from_locprf(observations: Iterable[LocPrfObservation] | LocPrfProfile,
                      mapping: Mapping[int, RouteClass]) -> dict[Link, RelInference]:
    """One inference per neighbour whose every LocPrf value maps to one class."""
    if isinstance(observations, LocPrfProfile):
        profile = observations
    else:
        profile = build_profile(observations)
    out: dict[Link, RelInference] = {}
    observer = profile.observer_asn
    for neighbor, values in profile.neighbor_values.items():
        if neighbor == observer:
            continue
        classes = {mapping.get(v) for v in values}
        if len(classes) != 1 or None in classes:
            continue
        cls = classes.pop()
        link = Link.of(observer, neighbor)
        out[link] = RelInference(link, _relationship(observer, neighbor, cls),
                                 provenance=Provenance.LOCPRF,
                                 evidence_counts={"routes": sum(values.values())})
    return out


def labels_for(observer: int, inferences: Mapping[Link, RelInference]) -> dict[int, RouteClass]:
    """Neighbour classes of ``observer`` implied by decided non-hybrid links."""
    labels: dict[int, RouteClass] = {}
    for link, inf in inferences.items():
        if observer not in link:
            continue
        neighbor = link.other(observer)
        base = inf.base
        if base.kind is RelKind.P2P:
            labels[neighbor] = RouteClass.PEER
        elif base.kind is RelKind.P2C:
            labels[neighbor] = RouteClass.CUSTOMER if base.provider == observer else RouteClass.PROVIDER
    return labels


def profile_observer(observations: Sequence[LocPrfObservation],
                     labels: Mapping[int, RouteClass],
                     dominance_ratio: float = 4.0,
                     absolute: int = 10, relative: float = 0.05
                     ) -> tuple[LocPrfProfile, dict[Link, RelInference]]:
    """Full per-observer pass: counts, defaults, mapping, extension, inference."""
    profile = build_profile(observations)
    try:
        defaults = select_defaults(profile, dominance_ratio)
    except NoDefaults as exc:
        log.info("%s", exc)
        profile.usable = False
        return profile, {}
    mapping = map_defaults(profile, defaults, labels)
    profile.defaults = [(v, mapping.classes[v]) for v in defaults if v in mapping.classes]
    profile.exceptions = mapping.exceptions
    profile.dropped = mapping.dropped
    profile.extended = extend_near_defaults(profile, defaults, mapping.classes, labels,
                                            absolute, relative)
    return profile, infer_from_locprf(profile, profile.mapping())


def merge_observer_inferences(per_observer: Iterable[Mapping[Link, RelInference]]
                              ) -> tuple[dict[Link, RelInference], set[Link]]:
    """Union of per-observer verdicts; links on which observers disagree are dropped."""
    merged: dict[Link, RelInference] = {}
    conflicts: set[Link] = set()
    for infs in per_observer:
        for link, inf in infs.items():
            if link in conflicts:
                continue
            prev = merged.get(link)
            if prev is None:
                merged[link] = inf
            elif prev.base != inf.base:
                del merged[link]
                conflicts.add(link)
    return merged, conflicts
