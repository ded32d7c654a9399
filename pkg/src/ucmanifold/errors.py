"""Exception hierarchy shared by all ucmanifold modules."""


class UCError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(UCError, ValueError):
    pass


class UnsupportedOperationError(UCError):
    pass


class SingularNetworkError(UCError):
    """Reduced susceptance matrix could not be inverted."""


class InfeasibleCaseError(UCError):
    """Demand cannot be covered even with every unit committed.

    ``hour`` holds the 0-based binding hour when known.
    """

    def __init__(self, message, hour=None):
        super().__init__(message)
        self.hour = hour


class PreconditionError(UCError, ValueError):
    pass


class CaseParseError(UCError):
    """A case, unit or scenario file could not be parsed.

    ``line`` is the 1-based offending line number when known.
    """

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
