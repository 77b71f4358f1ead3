class VteError(Exception):
    """Base class for every error raised by the estimation toolkit."""


class VteInputError(VteError, ValueError):
    """Raised when inputs violate a documented precondition.

    Attributes:
        row: 1-based data row the problem was found in, or None.
        column: Column name the problem was found in, or None.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class VteNumericError(VteError, ArithmeticError):
    """Raised when a linear solve or iterative fit cannot produce a trustworthy result.

    Attributes:
        diagnostics: A dict of solver state at failure (may be empty).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
