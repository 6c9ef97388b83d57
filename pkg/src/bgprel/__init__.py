"""AS relationship inference from BGP Communities and route-server LocPrf values."""

__version__ = "0.1.0"

from .dictionary import Category, Dictionary, load_dictionary
from .engine import Evidence, Flag, RelInference, Relationship, RelKind, infer_communities
from .fusion import RelationshipDb, check_valley_free, export, fuse, parse_export, stats
from .ingest import BgpRecord, decode_mrt, parse_text_record
from .paths import Link, sanitize

__all__ = [
    "BgpRecord", "Category", "Dictionary", "Evidence", "Flag", "Link", "RelInference",
    "RelKind", "Relationship", "RelationshipDb", "check_valley_free", "decode_mrt", "export",
    "fuse", "infer_communities", "load_dictionary", "parse_export", "parse_text_record",
    "sanitize", "stats",
]
