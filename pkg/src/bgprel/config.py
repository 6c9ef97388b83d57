"""Run configuration: flat ``key = value`` files with command-line overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .paths import DEFAULT_REJECTED, AsnFilter

CONFIG_ENV = "BGPREL_CONFIG"

# keys that change inference results; these feed the config hash
THRESHOLD_KEYS = (
    "rejected_asns", "min_votes", "backup_max_run_days", "prepend_threshold",
    "dominance_ratio", "proximity_abs", "proximity_rel",
    "sanity_min_links", "sanity_max_contradiction",
)
LIST_KEYS = ("corpus", "rs_dumps")


@dataclass
class RunConfig:
    corpus: list[str] = field(default_factory=list)
    dictionary: str | None = None
    rs_dumps: list[str] = field(default_factory=list)
    output: str | None = None
    rejected_asns: str = str(DEFAULT_REJECTED)
    min_votes: int = 1
    backup_max_run_days: int = 5
    prepend_threshold: int = 2
    dominance_ratio: float = 4.0
    proximity_abs: int = 10
    proximity_rel: float = 0.05
    sanity_min_links: int = 10
    sanity_max_contradiction: float = 0.5
    workers: int = 1
    seed: int = 42

    def __post_init__(self) -> None:
        try:
            AsnFilter.parse(self.rejected_asns)
        except ValueError as exc:
            raise ConfigError(f"rejected-asns: {exc}") from None
        if self.min_votes < 1:
            raise ConfigError("min-votes must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.dominance_ratio <= 1:
            raise ConfigError("dominance-ratio must be > 1")

    @property
    def rejected(self) -> AsnFilter:
        return AsnFilter.parse(self.rejected_asns)

    def config_hash(self) -> str:
        """Digest of the inference thresholds; worker count and paths do not count."""
        text = "\n".join(f"{k}={getattr(self, k)}" for k in THRESHOLD_KEYS)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def _field_types() -> dict[str, type]:
    return {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str) -> object:
    kind = _field_types()[key]
    if key in LIST_KEYS:
        return [p.strip() for p in raw.split(",") if p.strip()]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key.replace('_', '-')}: expected {kind}, got {raw!r}") from None
    return raw


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values: dict[str, object] = {}
    known = _field_types()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ConfigError(f"config line {lineno}: unknown key {key.replace('_', '-')!r}")
        values[key] = _coerce(key, raw.strip())
    return dataclasses.replace(base or RunConfig(), **values)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read ``path``, else the file named by ``$BGPREL_CONFIG``, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
