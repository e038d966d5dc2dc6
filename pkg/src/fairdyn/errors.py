"""Exception types shared across the package."""


class FairdynError(Exception):
    """Base class for every error raised by fairdyn."""


class ScenarioError(FairdynError, ValueError):
    """Invalid scenario document or parameter set.

    ``field`` names the offending entry so callers can report it precisely.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainError(FairdynError, ValueError):
    """Mathematically invalid input to a distribution or matrix operation."""


class SolverError(FairdynError, RuntimeError):
    """A threshold or fixed-point solver failed.

    ``bracket`` carries the last bracketing interval of a root search,
    ``last`` the final iterate of a fixed-point refinement, and
    ``residual`` the remaining defect, when available.
    """

    def __init__(self, message: str, bracket=None, last=None, residual=None):
        super().__init__(message)
        self.bracket = bracket
        self.last = last
        self.residual = residual
