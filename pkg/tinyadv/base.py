"""bottom-level base abstractions"""

__all__ = ['EXIT_OK', 'EXIT_FAILURE', 'EXIT_CONFIG', 'EXIT_DATA', 'EXIT_ORACLE',
           'TinyAdvError', 'ConfigError', 'DataError', 'PreconditionError',
           'StateError', 'MetricError', 'OracleError', 'AttackError']

# Process exit codes of the command line tools
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ORACLE = 4


class TinyAdvError(Exception):
    """Base class of every error raised by tinyadv.

    :Ivariables:
        exit_code : int
            Exit status the command line tools report for this error.
    """

    exit_code = EXIT_FAILURE


class ConfigError(TinyAdvError):
    """A run configuration is malformed or names unknown things."""

    exit_code = EXIT_CONFIG


class DataError(TinyAdvError):
    """Input data cannot be read, parsed or matched to a schema."""

    exit_code = EXIT_DATA


class PreconditionError(DataError, ValueError):
    """An operation was called with arguments violating its precondition."""


class StateError(DataError):
    """An object was used before it reached the required state."""


class MetricError(DataError, ValueError):
    """A metric is undefined for the given inputs."""


class OracleError(TinyAdvError):
    """A model oracle failed to answer a prediction request."""

    exit_code = EXIT_ORACLE


class AttackError(OracleError):
    """An attack aborted because its oracle failed.

    :Ivariables:
        iteration : int
            Zero-based index of the iteration whose query failed.
    """

    def __init__(self, message, iteration):
        super(AttackError, self).__init__(message)
        self.iteration = iteration
