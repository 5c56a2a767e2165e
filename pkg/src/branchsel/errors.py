"""Exception hierarchy shared by every module.

The CLI maps each class to its own exit code, so raise the most specific one.
"""


class BranchselError(Exception):
    exit_code = 1


class CapacityError(BranchselError):
    """A configured size budget (state count, particle count) was exceeded."""

    exit_code = 3


class NumericalError(BranchselError):
    """A solver failed to converge or produced an out-of-tolerance residual."""

    exit_code = 4


class InvariantViolation(BranchselError):
    """An internal consistency check failed; this always indicates a bug."""

    exit_code = 5
