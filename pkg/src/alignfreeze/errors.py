"""Exception hierarchy.

Everything raised deliberately by the toolkit derives from
:class:`AlignFreezeError`.  The CLI maps :class:`ConfigError` to exit code 3
and every other subclass to exit code 4.
"""


class AlignFreezeError(Exception):
    pass


class ConfigError(AlignFreezeError, ValueError):
    """Invalid configuration, strategy or experiment spec."""


class StrategyError(ConfigError):
    pass


class DataError(AlignFreezeError, ValueError):
    """Problem with input data (files, corpora, labels, batches)."""


class ParseError(DataError):
    def __init__(self, message, token=None, column=None, line=None):
        self.token = token
        self.column = column
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if token is not None:
            where.append(f"token {token!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DimensionError(DataError):
    pass


class SpanError(DataError):
    pass


class BatchError(DataError):
    pass


class InputError(DataError):
    """Token ids out of vocabulary or sequence too long."""


class GradientError(DataError):
    pass


class NumericError(AlignFreezeError, ArithmeticError):
    pass


class StateError(AlignFreezeError, RuntimeError):
    """Activation cache does not belong to the current model state."""
