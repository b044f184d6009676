"""Exception taxonomy shared by all modules.

Three top-level categories map onto CLI exit codes: input/validation
problems (exit 2), file and format problems (exit 3), and metrics that
are mathematically undefined for the given data (exit 4).
"""


class PixeluqError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PixeluqError):
    """Invalid in-memory inputs, parameters, or configuration."""


class InvalidInputError(InputError):
    """Array contents violate a precondition (NaN, negative variance, ...)."""


class InvalidLabelError(InputError):
    """Label map contains values outside [0, C) that are not the ignore index."""


class InvalidParameterError(InputError):
    """A scalar parameter is out of its documented range."""


class EmptyStackError(InputError):
    """A sample stack with S = 0 was passed to a fusion operation."""


class ManifestError(InputError):
    """Manifest fails schema or cross-entry consistency validation."""


class IOFailure(PixeluqError):
    """File-level problem: missing, malformed, or unsupported content."""


class MissingInputError(IOFailure):
    """A referenced input file does not exist."""


class TensorFormatError(IOFailure):
    """Tensor file is not a well-formed NPY v1.0 payload."""


class UnsupportedDtypeError(IOFailure):
    """Tensor element type is outside the supported set."""


class UndefinedMetricError(PixeluqError):
    """Metric has no defined value for the given data (e.g. empty support)."""


class UndefinedThresholdError(UndefinedMetricError):
    """No scored pixels to compute an uncertainty threshold from."""


class InfiniteLossError(PixeluqError):
    """Loss value would be infinite (zero probability at the target class)."""
