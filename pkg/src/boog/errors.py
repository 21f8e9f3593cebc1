"""Exception types shared across the package.

The CLI maps these onto stable exit codes: validation/parameter problems
exit 1, file and format problems exit 2, numerical aborts exit 3.
"""


class ShapeError(ValueError):
    """Dimension mismatch between operands. Carries both shapes."""

    def __init__(self, message, left=None, right=None):
        if left is not None or right is not None:
            message = f"{message} (got {left} vs {right})"
        super().__init__(message)
        self.left = left
        self.right = right


class ContractViolation(ValueError):
    """A documented precondition was broken by the caller."""


class ParameterError(ValueError):
    """User-supplied parameter outside its valid range."""


class DataValidationError(ValueError):
    """A dataset record violates an invariant; message names the record."""


class FileFormatError(IOError):
    """Bad magic, truncated payload, unparseable or wrong-version file."""


class UndefinedMetricError(ValueError):
    """Requested metric is undefined for the given inputs."""


class NumericalError(ArithmeticError):
    """Non-finite value reached the training loop; names epoch and batch."""
