"""Exception types shared across the package."""


class QCacheError(Exception):
    pass


class InvalidParams(QCacheError, ValueError):
    pass


class MissingBlock(QCacheError, ValueError):
    pass


class ParseError(QCacheError, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(QCacheError, ValueError):
    pass


class MissingClassification(QCacheError, KeyError):
    pass


class UnboundedModel(QCacheError):
    pass


class Infeasible(QCacheError):
    pass


class BudgetExceeded(QCacheError, RuntimeError):
    """Raised instead of returning a result computed from a truncated search."""
