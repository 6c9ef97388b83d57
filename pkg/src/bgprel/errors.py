"""Exception hierarchy shared by every pipeline stage."""


class BgprelError(Exception):
    """Base class for all errors raised by this package."""


class DataError(BgprelError):
    """Input data could not be decoded or violates a format contract."""


class MrtDecodeError(DataError):
    """MRT framing is broken; carries the byte offset of the offending record."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class TextRecordError(DataError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DictionaryError(DataError):
    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        detail = "; ".join(f"row {row}: {msg}" for row, msg in problems)
        super().__init__(f"invalid community dictionary: {detail}")


class RouteServerDumpError(DataError):
    pass


class ConfigError(BgprelError):
    pass


class InfeasibleQuota(BgprelError):
    """Synthetic generation parameters cannot be satisfied."""


class NoDefaults(ValueError):
    """A LocPrf profile has no dominant values and cannot be interpreted."""


class UnknownRelationship(ValueError):
    """A relationship sequence contains a step outside {c2p, p2c, p2p, s2s}."""
