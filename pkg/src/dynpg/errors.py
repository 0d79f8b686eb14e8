class DynPGError(Exception):
    """Base class for all library errors."""


class UnsupportedInputError(DynPGError, ValueError):
    pass


class SingularPointError(DynPGError, ValueError):
    """A covector sits too close to a singular hyperplane (α, q − μ) = 0."""


class FactorizationError(DynPGError, ArithmeticError):
    """A triangular factorization hit a vanishing principal minor."""


class BranchCutError(DynPGError, ArithmeticError):
    """Matrix logarithm or square root requested on the negative real axis."""


class CalibrationError(DynPGError, RuntimeError):
    """A calibration fit left a residual above its acceptance threshold."""
