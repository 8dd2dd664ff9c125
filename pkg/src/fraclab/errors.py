"""Exception hierarchy. Every error carries a machine-readable ``code``."""


class FracLabError(Exception):
    code = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        out.update({k: v for k, v in self.details.items()})
        return out


class InvalidArgumentError(FracLabError, ValueError):
    code = "invalid_argument"

    def __init__(self, message, code=None, **details):
        super().__init__(message, **details)
        if code is not None:
            self.code = code


class DimensionMismatchError(InvalidArgumentError):
    code = "dimension_mismatch"


class CoefficientViolationError(FracLabError, ValueError):
    """Matrix coefficient is not symmetric positive definite at some point."""

    code = "coefficient_violation"


class SingularMassError(FracLabError, ArithmeticError):
    code = "singular_mass"


class ConvergenceError(FracLabError, ArithmeticError):
    code = "convergence"


class AccuracyError(FracLabError, ArithmeticError):
    code = "accuracy"


class PoleError(FracLabError, ValueError):
    code = "pole"


class DivisionHazardError(FracLabError, ArithmeticError):
    code = "division_hazard"


class IntegrationError(FracLabError, ArithmeticError):
    code = "integration"


class AccuracyWarning(UserWarning):
    pass
