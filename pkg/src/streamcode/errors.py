"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Invalid code or channel parameters."""


class ConstructionError(RuntimeError):
    """A random construction kept failing its rank verification."""


class ContractError(RuntimeError):
    """A caller broke an ordering or history precondition."""


class RegimeError(ValueError):
    """A closed form was asked for outside the regime where it holds."""


class EnumerationSizeError(ValueError):
    """An exhaustive enumeration would be too large to run."""

    def __init__(self, message: str, estimate: int):
        super().__init__(message)
        self.estimate = estimate
