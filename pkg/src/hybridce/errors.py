"""Exception hierarchy shared by all modules."""


class HybridCEError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HybridCEError, ValueError):
    """A parameter lies outside its admissible domain."""


class DimensionError(HybridCEError, ValueError):
    """Array shapes are inconsistent with each other or with a scenario."""


class NotHermitianError(DomainError):
    pass


class DefinitenessError(HybridCEError, ValueError):
    """A matrix required to be positive definite is not."""


class NotPSDError(DefinitenessError):
    pass


class RankError(HybridCEError, ValueError):
    pass


class DegenerateError(HybridCEError, ValueError):
    pass


class NumericalError(HybridCEError, ArithmeticError):
    """A decomposition or solve failed; ``condition`` carries a diagnostic when known."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConfigError(HybridCEError, ValueError):
    """Invalid sweep configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
