"""Exception hierarchy shared by every subsystem."""


class PatError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PatError):
    """Array shapes do not line up (names the offending tensor or layer)."""


class UsageError(PatError):
    """An API was called out of protocol (backward before forward, step after done, ...)."""


class ConfigError(PatError):
    """A spec/config value is invalid or inconsistent."""


class NumericError(PatError):
    """A non-finite value appeared where finite math is required."""


class SnapshotError(PatError):
    """A parameter snapshot file could not be decoded."""


class SnapshotVersionError(SnapshotError):
    """Snapshot file carries an unsupported format version."""


class IncompatibleSnapshotError(SnapshotError):
    """Snapshot dimensions do not match the topology it is being loaded into."""


class AdviceUnavailableError(PatError):
    """No teacher packets are available; caller should fall back to self mode."""


class OracleRefusalError(PatError):
    """The exact-solution oracle refuses an instance (state space too large)."""
