"""Exception hierarchy shared by all modules."""


class HeatLQError(Exception):
    """Base class for every error raised by heatlq."""


class ParseError(HeatLQError):
    """Configuration file is malformed or does not follow the schema."""


class ValidationError(HeatLQError):
    """Configuration parses but violates an invariant."""


class DomainError(HeatLQError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class BlowupError(HeatLQError, ArithmeticError):
    """A numerical quantity exceeded its divergence threshold.

    ``path_index`` is set when the failure happened inside a Monte Carlo run.
    """

    def __init__(self, message, path_index=None):
        super().__init__(message)
        self.path_index = path_index
