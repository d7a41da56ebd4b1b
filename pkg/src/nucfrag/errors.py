"""Exception types shared across the package."""


class NucfragError(Exception):
    pass


class ConfigurationError(NucfragError, ValueError):
    """Invalid parameters or experiment configuration."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class UnsupportedConfiguration(ConfigurationError):
    pass


class InvalidTransition(NucfragError, ValueError):
    pass


class InvalidComposition(NucfragError, ValueError):
    pass


class InsufficientData(NucfragError, ValueError):
    pass


class UndefinedStatistic(NucfragError, ValueError):
    pass


class PrecisionError(NucfragError, ArithmeticError):
    pass
