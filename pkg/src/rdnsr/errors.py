"""Exception types shared across the package.

The CLI maps these onto exit codes: usage and configuration problems exit
with 2, numerical failures with 1.
"""


class RdnError(Exception):
    """Base class for all package errors."""


class DimensionError(RdnError):
    """Operand shapes are incompatible with the requested operation."""


class NumericError(RdnError):
    """A tensor contains NaN or Inf where finite values are required."""


class UsageError(RdnError):
    """An API contract was violated (wrong call order, bad argument)."""


class ConfigError(RdnError):
    """Invalid or unknown configuration key/value."""


class CheckpointError(RdnError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """File is not a recognized checkpoint or has an unsupported version."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint file ended before all declared data was read."""


class CheckpointMismatchError(CheckpointError):
    """Stored tensors do not match the model configuration."""
