"""Exception hierarchy shared by all modules."""


class NExpError(Exception):
    """Base class for every error raised by nexpflow."""


class InvalidParameter(NExpError, ValueError):
    pass


class ResolutionError(NExpError):
    """A computation needs symbols beyond the finite window that is known."""


class ConstraintViolation(NExpError, ValueError):
    """A window contains a forbidden word or a symbol outside the alphabet."""


class UnsupportedSystem(NExpError, TypeError):
    pass


class InvalidPair(NExpError, ValueError):
    pass


class InvalidChain(NExpError, ValueError):
    pass


class DomainError(NExpError, ValueError):
    pass


class CoverageError(NExpError):
    """A modulus table does not reach the requested distance."""


class ConfigError(NExpError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
