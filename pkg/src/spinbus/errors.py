"""Exception types raised across the toolkit."""


class SpinBusError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SpinBusError, ValueError):
    pass


class InvalidParameterError(SpinBusError, ValueError):
    pass


class InvalidTruncationError(InvalidParameterError):
    pass


class PreconditionError(SpinBusError, ValueError):
    pass


class DivergenceError(PreconditionError):
    """A closed-form expression is evaluated at its pole (e.g. exact resonance)."""


class SolverError(SpinBusError, RuntimeError):
    """Time evolution failed; ``diagnostics`` carries what was observed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegeneracyError(SpinBusError, RuntimeError):
    pass


class WindowTooShortError(SpinBusError, RuntimeError):
    pass


class AmbiguousPeakError(SpinBusError, RuntimeError):
    pass


class LabelingError(SpinBusError, RuntimeError):
    pass


class StencilError(SpinBusError, RuntimeError):
    pass


class ProfileParseError(SpinBusError, ValueError):
    pass


class ProfileRangeError(SpinBusError, ValueError):
    pass


class NumericalIntegrityError(SpinBusError, RuntimeError):
    pass


class ConfigError(SpinBusError, ValueError):
    """Invalid run configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
