"""
Exception hierarchy for the vakonomic integrator package.

Every failure the solvers can report derives from ``VakonomicError`` so the
CLI can map library failures to a stable exit code. Contract and range
violations also derive from the matching builtin exceptions.
"""

from typing import Optional, Sequence


class VakonomicError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.index = index

    def at_index(self, k: int) -> "VakonomicError":
        """Annotate the error with the flow node at which it happened."""
        self.index = k
        self.args = (f"{self.message} (at step k={k})",)
        return self

    def __str__(self) -> str:
        return self.args[0] if self.args else self.message


class ContractError(VakonomicError, ValueError):
    """Shape mismatch or violated precondition."""


class RangeError(VakonomicError, IndexError):
    """Index window or path length out of range."""


class NumericDomainError(VakonomicError, ArithmeticError):
    """A function evaluation produced a non-finite value."""

    def __init__(self, message: str, coords: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.coords = None if coords is None else list(coords)


class SingularKkt(VakonomicError):
    """The step or KKT Jacobian is numerically singular."""

    def __init__(self, message: str, rel_det: Optional[float] = None, pivot: Optional[int] = None):
        super().__init__(message)
        self.rel_det = rel_det
        self.pivot = pivot


class NoConvergence(VakonomicError):
    """Newton iteration hit its iteration cap, failed its line search or stalled above tol."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class InconsistentSeed(VakonomicError):
    """Seed data violates the constraint it must satisfy."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class IntegrationBlowUp(VakonomicError):
    """The continuous reference integrator produced a non-finite state."""


class ConfigError(VakonomicError):
    """Invalid experiment configuration."""


class CheckFailure(VakonomicError):
    """A named self-check failed."""

    def __init__(self, message: str, check: str = ""):
        super().__init__(message)
        self.check = check
