"""Exception hierarchy shared across the package.

Every error the CLI maps to a distinct exit code lives here so that library
users and the command line agree on failure taxonomy.
"""


class NulldiffError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    kind = "error"


class DimensionError(NulldiffError):
    """Tensor/sequence shapes do not agree."""

    exit_code = 4
    kind = "shape-conflict"


class ConfigError(NulldiffError):
    """Invalid or inconsistent configuration value."""

    exit_code = 3
    kind = "malformed-config"


class MaskError(NulldiffError):
    """Region mask refers to vertices outside the sequence."""

    exit_code = 4
    kind = "mask-out-of-range"


class InputError(NulldiffError):
    """Input data violates a precondition (non-finite values, bad range)."""

    exit_code = 7
    kind = "bad-input"


class NumericError(NulldiffError):
    """Non-finite values were produced where finite ones are required."""

    exit_code = 7
    kind = "numeric"


class UndefinedMetricError(NulldiffError):
    """A metric is mathematically undefined for the given inputs."""

    exit_code = 8
    kind = "undefined-metric"


class CheckpointError(NulldiffError):
    """Checkpoint file is corrupt, truncated, or structurally wrong."""

    exit_code = 6
    kind = "checkpoint"


class NoIntermediateFramesError(NulldiffError):
    """An inter-frame reconstruction was requested with nothing to fill."""

    exit_code = 5
    kind = "no-intermediate-frames"
