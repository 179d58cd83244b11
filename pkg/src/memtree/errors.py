"""Exception hierarchy shared by every memtree module."""


class MemTreeError(Exception):
    """Base class. ``kind`` is the stable machine-readable error name."""

    kind = "error"


class InvalidArgument(MemTreeError, ValueError):
    kind = "invalid-argument"


class NotFound(MemTreeError, KeyError):
    kind = "not-found"

    def __str__(self):
        # KeyError quotes its message; keep the plain text
        return str(self.args[0]) if self.args else ""


class InvalidState(MemTreeError):
    kind = "invalid-state"


class DegenerateEmbedding(InvalidState):
    kind = "degenerate-embedding"


class ProviderUnavailable(MemTreeError):
    kind = "provider-unavailable"


class ProtocolError(MemTreeError):
    kind = "protocol-error"


class TooLarge(MemTreeError):
    kind = "too-large"


class UnsupportedVersion(MemTreeError):
    kind = "unsupported-version"


class CorruptSnapshot(MemTreeError):
    kind = "corrupt-snapshot"


class SchemaError(MemTreeError):
    """A JSONL record that does not match the expected field map."""

    kind = "schema-error"

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message
