"""Exception hierarchy shared across the package.

CLI exit-code mapping: usage problems exit 2 (argparse), any SatfuseError
exits 1 with a machine-parsable category prefix.
"""


class SatfuseError(Exception):
    """Base class for all domain errors raised by this package."""

    category = "error"


class FormatError(SatfuseError):
    """Malformed on-disk container (bad magic, truncated payload, bad label)."""

    category = "format"


class DegenerateInputError(SatfuseError):
    """Input too small or empty for the requested statistic."""

    category = "degenerate-input"


class ConfigError(SatfuseError):
    """Inconsistent or unknown configuration keys/values."""

    category = "config"


class CheckpointVersionError(SatfuseError):
    """Checkpoint file written by an incompatible format version."""

    category = "checkpoint-version"
