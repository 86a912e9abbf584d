"""
ContrastForge exceptions
"""


class ContrastForgeException(Exception):
    """
    A common exception class
    """
    msg = "A ContrastForge exception occurred"
    exit_code = 1

    def __init__(self, msg=None, cause=None):
        self.msg = msg if msg is not None else self.msg
        self.cause = cause
        super(ContrastForgeException, self).__init__(self.msg)


class ConfigurationError(ContrastForgeException):
    """
    Raised when hyperparameters, shapes of definitions or run settings are invalid
    """
    msg = "Invalid configuration"
    exit_code = 2


class UsageError(ContrastForgeException):
    """
    Raised when an API is called with arguments it cannot accept
    """
    msg = "Invalid usage"
    exit_code = 2


class DataError(ContrastForgeException):
    """
    Raised when volumes, slices or test sets are unusable
    """
    msg = "Invalid data"
    exit_code = 3


class FitError(DataError):
    """
    Raised when the baseline regression cannot be fitted
    """
    msg = "Unable to fit baseline regression"


class FileFormatError(ContrastForgeException):
    """
    Raised when an artifact file has a bad magic, version or length
    """
    msg = "Unreadable artifact file"
    exit_code = 4

    def __init__(self, path, msg=None, cause=None):
        self.path = str(path)
        msg = msg if msg is not None else self.msg
        super(FileFormatError, self).__init__("{0}: {1}".format(self.path, msg), cause)
