"""Dictionary of Communities meanings and per-message tag attribution.

The dictionary is a UTF-8 TSV with columns::

    owner_asn  pattern  category  settable_by  scope_note  source

Patterns are ``asn:value`` (exact), ``asn:D***`` (fixed decimal width: the
digits ``D`` followed by one ``*`` per remaining digit, so ``1273:1***``
matches 1000-1999) or ``asn:D%`` (any width starting with ``D``).
"""

from __future__ import annotations

import io
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import DictionaryError
from .ingest import Community, is_well_known
from .paths import CleanPath, Link

log = logging.getLogger(__name__)


class Category(str, Enum):
    REL_CUSTOMER = "REL_CUSTOMER"
    REL_PEER = "REL_PEER"
    REL_PROVIDER = "REL_PROVIDER"
    REL_SIBLING = "REL_SIBLING"
    ACTION_PREPEND = "ACTION_PREPEND"
    ACTION_SCOPE_RESTRICT = "ACTION_SCOPE_RESTRICT"
    ACTION_NO_EXPORT_SCOPE = "ACTION_NO_EXPORT_SCOPE"
    TAG_LOCATION = "TAG_LOCATION"
    TAG_RS_PEERING = "TAG_RS_PEERING"
    OTHER = "OTHER"


RELATIONSHIP_CATEGORIES = frozenset({
    Category.REL_CUSTOMER, Category.REL_PEER, Category.REL_PROVIDER, Category.REL_SIBLING,
    # a route-server peering tag is also a statement that the neighbour is a peer
    Category.TAG_RS_PEERING,
})
SCOPE_CATEGORIES = frozenset({Category.ACTION_SCOPE_RESTRICT, Category.ACTION_NO_EXPORT_SCOPE})


class SettableBy(str, Enum):
    OWNER = "OWNER"
    CUSTOMER = "CUSTOMER"
    ANY = "ANY"
    UNKNOWN = "UNKNOWN"


class Source(str, Enum):
    IRR = "IRR"
    NOC = "NOC"
    MANUAL = "MANUAL"


_EXACT = re.compile(r"^\d+$")
_FIXED = re.compile(r"^(\d*)(\*+)$")
_VARIABLE = re.compile(r"^(\d+)%$")

# scope notes that mean "do not announce anywhere"
FULL_SCOPE_NOTES = frozenset({"", "all", "any", "global", "everywhere"})


@dataclass(frozen=True)
class CommunityMeaning:
    owner_asn: int
    pattern: str
    category: Category
    settable_by: SettableBy = SettableBy.UNKNOWN
    scope_note: str = ""
    source: Source = Source.MANUAL
    row: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        asn_part, sep, value_part = self.pattern.partition(":")
        if not sep or not asn_part.isdigit():
            raise ValueError(f"malformed pattern {self.pattern!r}")
        if int(asn_part) != self.owner_asn:
            raise ValueError(f"pattern {self.pattern!r} is not owned by AS{self.owner_asn}")
        if not (_EXACT.match(value_part) or _FIXED.match(value_part) or _VARIABLE.match(value_part)):
            raise ValueError(f"malformed pattern value {value_part!r}")
        if _EXACT.match(value_part) and int(value_part) > 0xFFFF:
            raise ValueError(f"community value {value_part} exceeds 16 bits")
        if self.category in (Category.TAG_LOCATION, Category.ACTION_SCOPE_RESTRICT) \
                and not self.scope_note:
            raise ValueError(f"{self.category.value} entry needs a scope note")

    @property
    def value_part(self) -> str:
        return self.pattern.partition(":")[2]

    @property
    def is_exact(self) -> bool:
        return self.value_part.isdigit()

    @property
    def digit_prefix(self) -> str:
        return self.value_part.rstrip("*%")

    @property
    def width(self) -> int | None:
        """Decimal width a fixed pattern matches; ``None`` for variable patterns."""
        v = self.value_part
        return None if v.endswith("%") else len(v)

    def matches(self, value: int) -> bool:
        text = str(value)
        if self.is_exact:
            return value == int(self.value_part)
        width = self.width
        if width is not None and len(text) != width:
            return False
        return text.startswith(self.digit_prefix)

    def sort_key(self) -> tuple:
        # exact first, then longer digit prefixes, fixed-width before variable
        return (not self.is_exact, -len(self.digit_prefix), self.width is None, self.row)

    @property
    def full_scope(self) -> bool:
        return self.scope_note.strip().lower() in FULL_SCOPE_NOTES

    def to_row(self) -> str:
        return "\t".join([str(self.owner_asn), self.pattern, self.category.value,
                          self.settable_by.value, self.scope_note, self.source.value])


def _overlaps(a: CommunityMeaning, b: CommunityMeaning) -> bool:
    """Whether two patterns of the same owner can match a common value."""
    if a.is_exact:
        return b.matches(int(a.value_part))
    if b.is_exact:
        return a.matches(int(b.value_part))
    pa, pb = a.digit_prefix, b.digit_prefix
    if not (pa.startswith(pb) or pb.startswith(pa)):
        return False
    longer = max(len(pa), len(pb))
    wa, wb = a.width, b.width
    if wa is not None and wb is not None:
        return wa == wb and longer <= wa
    w = wa if wa is not None else wb
    return w is None or longer <= w


class Dictionary:
    """Immutable, indexed collection of :class:`CommunityMeaning` entries."""

    def __init__(self, entries: Iterable[CommunityMeaning] = ()):
        self._exact: dict[int, dict[int, list[CommunityMeaning]]] = defaultdict(dict)
        self._wild: dict[int, list[CommunityMeaning]] = defaultdict(list)
        self.entries: list[CommunityMeaning] = []
        for e in entries:
            self.entries.append(e)
            if e.is_exact:
                self._exact[e.owner_asn].setdefault(int(e.value_part), []).append(e)
            else:
                self._wild[e.owner_asn].append(e)
        for lst in self._wild.values():
            lst.sort(key=CommunityMeaning.sort_key)
        self._exact = dict(self._exact)
        self._wild = dict(self._wild)
        self.dual_meaning_asns = frozenset(self._find_dual())

    def _find_dual(self) -> set[int]:
        dual = set()
        by_owner: dict[int, list[CommunityMeaning]] = defaultdict(list)
        for e in self.entries:
            by_owner[e.owner_asn].append(e)
        for owner, lst in by_owner.items():
            for i, a in enumerate(lst):
                if any(a.category != b.category and _overlaps(a, b) for b in lst[i + 1:]):
                    dual.add(owner)
                    break
        return dual

    @property
    def owners(self) -> frozenset[int]:
        return frozenset(self._exact) | frozenset(self._wild)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, asn: int) -> bool:
        return asn in self._exact or asn in self._wild

    def resolve(self, asn: int, community: Community) -> list[CommunityMeaning]:
        """All meanings ``asn`` defines for ``community``, in resolution order."""
        owner, value = community
        if owner != asn:
            return []
        out = list(self._exact.get(asn, {}).get(value, ()))
        out.extend(e for e in self._wild.get(asn, ()) if e.matches(value))
        return out

    def without(self, owners: Iterable[int]) -> "Dictionary":
        drop = set(owners)
        return Dictionary(e for e in self.entries if e.owner_asn not in drop)

    def dumps(self) -> str:
        lines = ["# owner_asn\tpattern\tcategory\tsettable_by\tscope_note\tsource"]
        lines.extend(e.to_row() for e in self.entries)
        return "\n".join(lines) + "\n"


def resolve(dictionary: Dictionary, asn: int, community: Community) -> list[CommunityMeaning]:
    return dictionary.resolve(asn, community)


def _parse_enum(enum_cls, token: str, default):
    token = token.strip()
    if not token:
        return default
    return enum_cls(token.upper())


def load_dictionary(source: str | Path | IO[str] | Sequence[str]) -> Dictionary:
    """Load and validate a dictionary TSV; all problems are reported together."""
    if isinstance(source, Path) or (isinstance(source, str) and not ("\t" in source or "\n" in source)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    elif isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = list(source)

    problems: list[tuple[int, str]] = []
    entries: list[CommunityMeaning] = []
    for row, raw in enumerate(lines, 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.rstrip("\r\n").split("\t")
        if len(cols) < 3:
            problems.append((row, f"expected 6 tab-separated columns, got {len(cols)}"))
            continue
        cols += [""] * (6 - len(cols))
        owner, pattern, category, settable, note, src = (c.strip() for c in cols[:6])
        if pattern.count(":") == 2:
            log.warning("dictionary row %d: large community %s ignored", row, pattern)
            continue
        try:
            if not owner.isdigit():
                raise ValueError(f"bad owner ASN {owner!r}")
            entries.append(CommunityMeaning(
                owner_asn=int(owner), pattern=pattern, category=Category(category.upper()),
                settable_by=_parse_enum(SettableBy, settable, SettableBy.UNKNOWN),
                scope_note=note, source=_parse_enum(Source, src, Source.MANUAL), row=row))
        except ValueError as exc:
            problems.append((row, str(exc)))

    seen: dict[tuple[int, str], CommunityMeaning] = {}
    unique: list[CommunityMeaning] = []
    for e in entries:
        key = (e.owner_asn, e.value_part) if e.is_exact else None
        if key is not None:
            key = (e.owner_asn, str(int(e.value_part)))
            prev = seen.get(key)
            if prev is not None:
                if prev.category != e.category:
                    problems.append((e.row, f"{e.pattern} conflicts with row {prev.row} "
                                            f"({prev.category.value} vs {e.category.value})"))
                continue
            seen[key] = e
        unique.append(e)
    if problems:
        raise DictionaryError(problems)
    return Dictionary(unique)


# ---------------------------------------------------------------- attribution

@dataclass(frozen=True)
class TagHit:
    community: Community
    meanings: tuple[CommunityMeaning, ...]


@dataclass
class LinkTagging:
    link: Link
    tagger: int
    neighbor: int
    hits: list[TagHit] = field(default_factory=list)

    def meanings(self) -> list[CommunityMeaning]:
        return [m for h in self.hits for m in h.meanings]


@dataclass
class MessageTags:
    """Communities of one message grouped by the link they describe."""

    per_link: dict[Link, LinkTagging]
    path_level: list[TagHit] = field(default_factory=list)
    well_known: list[Community] = field(default_factory=list)
    observer_link: Link | None = None
    unresolved: int = 0

    def __getitem__(self, link: Link) -> list[CommunityMeaning]:
        return self.per_link[link].meanings()


def classify_message_tags(path: CleanPath, communities: Sequence[Community],
                          dictionary: Dictionary, peer_asn: int | None = None) -> MessageTags:
    """Attribute each community ``A:v`` to the link from ``A`` toward the origin.

    A tagger missing from the path is the observing peer when it stripped
    itself; its tags then describe the link to the first hop.  Tags from the
    origin AS or from ASes not on the path stay path-level.
    """
    hops = path.hops
    per_link: dict[Link, LinkTagging] = {}
    position = {asn: i for i, asn in enumerate(hops)}
    for i in range(len(hops) - 1):
        link = Link.of(hops[i], hops[i + 1])
        per_link[link] = LinkTagging(link, hops[i], hops[i + 1])

    observer_link = None
    if peer_asn is not None and peer_asn not in position and peer_asn != 0:
        observer_link = Link.of(peer_asn, hops[0])

    tags = MessageTags(per_link, observer_link=observer_link)
    for comm in communities:
        if is_well_known(comm):
            tags.well_known.append(comm)
            continue
        tagger = comm[0]
        meanings = tuple(dictionary.resolve(tagger, comm))
        if not meanings:
            tags.unresolved += 1
        hit = TagHit(comm, meanings)
        idx = position.get(tagger)
        if idx is not None and idx < len(hops) - 1:
            per_link[Link.of(hops[idx], hops[idx + 1])].hits.append(hit)
        elif idx is None and observer_link is not None and tagger == peer_asn:
            if observer_link not in per_link:
                per_link[observer_link] = LinkTagging(observer_link, peer_asn, hops[0])
            per_link[observer_link].hits.append(hit)
        else:
            tags.path_level.append(hit)
    return tags
