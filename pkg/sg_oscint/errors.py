class SgOscError(Exception):
    pass


class ValidationError(SgOscError, ValueError):
    pass


class NumericalError(SgOscError, RuntimeError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class OrderError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class AdmissibilityError(ValidationError):
    pass


class RegularizationError(ValidationError):
    pass


class StandingAssumptionError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class ExtensionError(ValidationError):
    pass


class JobValidationError(ValidationError):
    def __init__(self, message, pointer="/"):
        super().__init__(f"{message} (at {pointer})")
        self.pointer = pointer


class QuadratureError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TailBoundError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
