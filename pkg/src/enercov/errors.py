"""Exception hierarchy shared by the planning and simulation layers.

Each error carries the process exit code the command-line frontend uses
when it surfaces the failure.
"""


class EnercovError(Exception):
    exit_code = 1


class ConfigurationError(EnercovError, ValueError):
    exit_code = 2


class UnsupportedModelError(EnercovError):
    exit_code = 2


class ConvergenceError(EnercovError):
    exit_code = 3


class InfeasibleError(EnercovError):
    exit_code = 4


class InfeasibleTransitionError(InfeasibleError):
    pass


class ConstraintViolationError(EnercovError):
    exit_code = 5
