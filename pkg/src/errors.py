class MetaLPError(Exception):
    """Base class for failures raised by the MetaLP engine"""


class DataValidationError(MetaLPError, ValueError):
    """Input data, schema or parameters are not usable"""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ConvergenceError(MetaLPError, RuntimeError):
    """An iterative estimator stopped before reaching its tolerance"""
