class SolGeoError(Exception):
    """Base class for errors raised by solgeo."""


class DomainError(SolGeoError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonFiniteError(SolGeoError, ArithmeticError):
    """A computation overflowed or produced a NaN from finite inputs."""


class ConfigError(SolGeoError, ValueError):
    """An experiment configuration failed schema validation.

    ``path`` is the dotted location of the offending field, e.g. ``run.T``.
    """

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
