"""Exception hierarchy shared by every module."""


class FrailtyError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(FrailtyError, ValueError):
    """A hazard or frailty parameter is outside its admissible set."""


class DomainError(FrailtyError, ValueError):
    """An argument lies outside the domain of the operation."""


class StructureError(FrailtyError, ValueError):
    """The model does not have the structure an operation requires."""


class DegenerateHazardError(FrailtyError, ValueError):
    """Every cause-specific weight is zero, so the total hazard vanishes."""


class CapabilityError(FrailtyError):
    """The requested deterministic method does not support this model."""


class ConfigError(FrailtyError, ValueError):
    """A JSON configuration violates the schema; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ParseError(FrailtyError, ValueError):
    """A data file could not be parsed; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericalError(FrailtyError, ArithmeticError):
    """A numerical routine missed its tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        if achieved is not None:
            message = f"{message} (achieved {achieved:.3g})"
        super().__init__(message)
        self.achieved = achieved
