"""
Exception and warning types raised by the capacity toolkit.

All errors derive from CapacityError, which is itself a RuntimeError, so code
that already guards calls with ``except RuntimeError`` keeps working.
"""


class CapacityError(RuntimeError):
    """Base class for errors raised by splurge_cnoma_capacity."""


class DomainError(CapacityError, ValueError):
    """Raised when a special function is evaluated outside its domain."""


class SeriesTruncationError(CapacityError):
    """Raised when a series does not meet its tail tolerance within max_order terms."""

    def __init__(
            self,
            message: str,
            *,
            max_order: int,
            residual: float
    ) -> None:
        super().__init__(message)
        self._max_order = max_order
        self._residual = residual

    @property
    def max_order(self) -> int:
        """Get the truncation order that was exhausted."""
        return self._max_order

    @property
    def residual(self) -> float:
        """Get the relative magnitude of the last term added."""
        return self._residual


class InfeasibleAllocationError(CapacityError, ValueError):
    """Raised when a power allocation violates the ordering or budget constraints."""


class NumericOverflowError(CapacityError, OverflowError):
    """Raised instead of silently returning inf."""


class CancellationWarning(RuntimeWarning):
    """Issued when a recurrence loses too many digits and quadrature is used instead."""
