"""Exception hierarchy shared by the library and the CLI."""


class DWGateError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(DWGateError, ValueError):
    pass


class ConfigurationError(DWGateError, ValueError):
    """Bad grid, schedule or config-file settings."""


class DimensionError(DWGateError, ValueError):
    """Operands live on incompatible grids or have the wrong rank."""


class GeometryDegenerateError(DWGateError):
    """The potential does not form a double well for the given parameters."""


class UnderResolvedKernelError(DWGateError):
    pass


class NumericalError(DWGateError):
    """Base for failures of a numerical method (CLI exit code 3)."""


class SolverError(NumericalError):
    pass


class CalibrationFailedError(NumericalError):
    def __init__(self, message, best_model=None, residuals=None):
        super().__init__(message)
        self.best_model = best_model
        self.residuals = residuals


class StepSizeError(NumericalError):
    pass


class NumericalBlowupError(NumericalError):
    def __init__(self, message, last_good=None, step=None):
        super().__init__(message)
        self.last_good = last_good
        self.step = step


class ExtractionError(NumericalError):
    """Spectrum tracks could not be matched to the requested states."""


class NonInteractingSynchronizationError(NumericalError, ZeroDivisionError):
    pass


class ProtocolError(DWGateError):
    """The gate protocol cannot be carried out (CLI exit code 4)."""


class UndefinedPhaseError(ProtocolError):
    pass
