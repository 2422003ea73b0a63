"""Exception types shared across the package.

Every failure mode that a caller may want to branch on (or that the CLI
maps to a distinct exit code) gets its own class.  Plain ``ValueError`` is
reserved for garden-variety misuse of helper functions.
"""

from __future__ import annotations


class KerrmeterError(Exception):
    """Base class for all package-specific failures."""


class DimensionError(KerrmeterError):
    """An operator or state was requested with an unusable dimension."""


class SignatureError(KerrmeterError):
    """Operands live on different or incompatible Hilbert spaces."""


class NonHermitianError(KerrmeterError):
    """A matrix that must be Hermitian is not, beyond tolerance."""


class TruncationLeakError(KerrmeterError):
    """Fock-space population has leaked into the truncation boundary."""


class InvalidStateError(KerrmeterError):
    """A density matrix is too far from positive semidefinite to trust."""


class InvariantViolation(KerrmeterError):
    """A run-time invariant (trace, Hermiticity, positivity) was breached.

    Carries the simulation time, the name of the violated invariant and the
    measured magnitude so that aborts are actionable rather than mysterious.
    """

    def __init__(
        self,
        message: str,
        *,
        time: float | None = None,
        invariant: str | None = None,
        magnitude: float | None = None,
    ) -> None:
        super().__init__(message)
        self.time = time
        self.invariant = invariant
        self.magnitude = magnitude


class NormCollapseError(KerrmeterError):
    """A stochastic step destroyed the state norm (step size too large)."""


class DivergenceError(KerrmeterError):
    """A classical trajectory left the trusted phase-space region."""


class ConfigError(KerrmeterError):
    """A configuration file or parameter set failed validation."""
