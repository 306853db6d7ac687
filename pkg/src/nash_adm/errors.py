"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and input problems exit
with 2, numeric failures detected mid-run exit with 3.
"""


class InputError(ValueError):
    """Raised when a caller hands a function malformed or inconsistent data."""


class ConfigError(InputError):
    """Raised when an experiment configuration cannot be used as given."""


class InvariantError(RuntimeError):
    """Raised when an internal consistency condition fails during construction."""


class NumericError(RuntimeError):
    """Raised when an iteration produces non-finite values or visibly diverges.

    Carries the 1-based iteration index at which the failure was detected,
    or None when no single iteration is to blame.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
