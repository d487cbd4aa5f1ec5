class GenloopError(Exception):
    """The base class for all genloop errors. Each subclass carries the
    process exit code the command line interface reports for it."""
    exit_code: int = 1


class ConfigError(GenloopError):
    """Raised when a configuration value violates its contract, for example
    a mixture that does not sum to one or a threshold outside the reward
    range."""
    exit_code = 2


class DataError(GenloopError):
    """Raised when input data is malformed: unknown tokens, context
    overflow or unreadable record files."""
    exit_code = 3


class IntegrityError(DataError):
    """Raised when a persisted artifact does not match its recorded
    checksum."""
    pass


class TrainingError(GenloopError):
    """Raised when training produces a non-finite loss, gradient or
    probability ratio."""
    exit_code = 4


class ContractError(GenloopError):
    """Raised when a caller violates an operation precondition, for example
    calling backward on a non-scalar loss or filtering unscored
    candidates."""
    pass


class HandlerNotFoundError(GenloopError):
    """Raised when no handler is registered for a loop command."""
    pass
