"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid shapes."""


class ConfigError(ValueError):
    """A configuration is internally inconsistent or infeasible."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values (NaN/Inf)."""


class ManifestError(ValueError):
    """A dataset manifest file is malformed."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"manifest line {line_number}: {message}")
        self.line_number = line_number
