"""Exception types shared across the package."""


class LocalizationError(Exception):
    """Base class for all errors raised by this package."""


class MapParseError(LocalizationError):
    """The map XML could not be parsed at all."""


class MapValidationError(LocalizationError):
    """The map XML parsed but violates a structural rule."""


class ConfigError(LocalizationError):
    """A configuration value is out of its legal range."""


class TraceFormatError(LocalizationError):
    """A trace line does not match the expected JSONL schema."""


class ScriptError(LocalizationError):
    """A walk script is inconsistent with the map or with itself."""


class EngineInitError(LocalizationError):
    """The initial positional state contradicts the initial area state."""


class UnknownRouterError(LocalizationError):
    """A router id is not an indicator node on the map."""
