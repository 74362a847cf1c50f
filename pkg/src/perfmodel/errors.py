"""Exception hierarchy for perfmodel."""


class PerfModelError(Exception):
    """Base class for all perfmodel errors."""


class InvalidFlag(PerfModelError):
    """A flag argument is outside the values a kernel signature declares."""


class InvalidScalar(PerfModelError):
    """A scalar argument is not a finite real number."""


class InvalidLeadingDimension(PerfModelError):
    """A leading dimension is smaller than the operand's row count."""


class UnknownKernel(PerfModelError):
    """No registered signature with the requested id."""


class InvalidSpec(PerfModelError):
    """An algorithm spec carries sizes a generator cannot honor."""


class InvalidOperand(PerfModelError):
    """An operand reference does not name an operand of the call."""


class NoOperands(PerfModelError):
    """A prediction step needs at least one operand to weigh."""


class BackendError(PerfModelError):
    """A measurement backend failed to produce timings."""


class ResourceError(PerfModelError):
    """A backend could not acquire a resource (library, buffer, symbol)."""


class DegenerateBox(PerfModelError):
    """A box side collapsed below the grid's minimum width."""


class FitError(PerfModelError):
    """The least-squares system for a patch is rank deficient."""


class OutOfDomain(PerfModelError):
    """A query point lies outside every patch of the model (no extrapolation)."""

    def __init__(self, message, *, point=None, call_index=None):
        super().__init__(message)
        self.point = point
        self.call_index = call_index


class UnknownVariant(PerfModelError):
    """The model holds no patches for the requested variant key."""

    def __init__(self, message, *, call_index=None):
        super().__init__(message)
        self.call_index = call_index


class ModelFormatError(PerfModelError):
    """A model file cannot be parsed."""


class VersionError(ModelFormatError):
    """A model file declares an unsupported schema version."""
