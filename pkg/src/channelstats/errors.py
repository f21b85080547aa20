"""Exception types shared across the package."""


class ChannelStatsError(Exception):
    """Base class for package errors."""


class NonIdentifiableError(ChannelStatsError, ValueError):
    """The design does not determine the requested parameters."""


class ConfigError(ChannelStatsError, ValueError):
    """A run configuration is malformed or inconsistent."""
