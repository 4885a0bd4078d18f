"""
Exception types shared by the solver modules
"""
from typing import Optional


class CasimirError(Exception):
    """Base class for all solver errors"""


class DomainError(CasimirError, ValueError):
    """Argument outside the physical domain (d <= 0, xi <= 0, k < 0, ...)"""


class UnsupportedOperationError(CasimirError):
    """Operation not defined for the given material variant"""


class OpticalDataError(CasimirError, ValueError):
    """Malformed or invalid optical table"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrandError(CasimirError, ArithmeticError):
    """Integrand returned NaN"""

    def __init__(self, abscissa: float):
        self.abscissa = abscissa
        super().__init__(f"integrand returned NaN at x = {abscissa!r}")


class ConvergenceError(CasimirError):
    """Hard numerical failure that invalidates a result"""


class ConfigError(CasimirError, ValueError):
    """Invalid run configuration"""


class CacheError(CasimirError):
    """Result cache cannot be used"""
