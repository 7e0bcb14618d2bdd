"""
Exception classes for the dicke_sim library.
"""

from typing import List, Optional, Tuple


class DickeSimError(Exception):
    """Base exception for all dicke_sim errors."""
    pass


class ValidationError(DickeSimError):
    """Raised when inputs or configs fail validation."""

    def __init__(self, message: str, errors: Optional[List[Tuple[str, str]]] = None):
        super().__init__(message)
        self.errors = list(errors or [])

    def __str__(self):
        if not self.errors:
            return super().__str__()
        details = "; ".join(f"{pointer or '/'}: {msg}" for pointer, msg in self.errors)
        return f"{super().__str__()} ({details})"


class DimensionError(ValidationError):
    """Raised when operator, state or subsystem dimensions do not match."""
    pass


class NormError(ValidationError):
    """Raised when a state or coefficient set is not normalized."""
    pass


class NonHermitianError(ValidationError):
    """Raised when a Hamiltonian fails the Hermiticity check."""
    pass


class ConvergenceError(DickeSimError):
    """Raised when the integrator or the optimizer fails to converge."""

    def __init__(self, message: str, time_stamp: Optional[float] = None,
                 residual: Optional[float] = None):
        super().__init__(message)
        self.time_stamp = time_stamp
        self.residual = residual


class SamplingError(DickeSimError):
    """Raised when record synthesis cannot build a sampler."""
    pass


class ExportError(DickeSimError):
    """Raised when writing an artifact fails."""
    pass
