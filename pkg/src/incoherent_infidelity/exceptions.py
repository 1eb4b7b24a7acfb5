"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ValidationError(ValueError):
    """An operator fails a physical precondition (hermiticity, unitarity, purity...)."""


class NumericalError(ArithmeticError):
    """A numerical routine received non-finite input or failed to converge."""


class CliffordLookupError(KeyError):
    """A unitary is not an element of the two-qubit Clifford group."""


class FitError(RuntimeError):
    """Nonlinear least squares did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
