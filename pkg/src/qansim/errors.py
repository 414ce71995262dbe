"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A caller passed a value outside an operation's domain."""


class NumericalError(ArithmeticError):
    """A state drifted outside its physical tolerances."""


class ScenarioConfigError(ValueError):
    """A network scenario is malformed or references unknown entities."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
