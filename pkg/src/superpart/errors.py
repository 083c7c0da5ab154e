class SuperpartError(Exception):
    """Base class for all errors raised by superpart."""


class ParseError(SuperpartError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(SuperpartError):
    pass


class EstimationError(SuperpartError):
    pass


class NonBracketingError(SuperpartError):
    """Raised when a lambda search interval does not bracket the target coarseness.

    ``best_lambda`` holds the closest-achieving value that was evaluated.
    """

    def __init__(self, message, best_lambda=None, best_count=None):
        super().__init__(message)
        self.best_lambda = best_lambda
        self.best_count = best_count
