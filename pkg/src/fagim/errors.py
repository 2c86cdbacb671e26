"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid system or simulation configuration."""


class NumericalError(ArithmeticError):
    """A numerical routine produced a result outside its guaranteed range."""
