"""Physics model: a driven nonlinear oscillator cross-Kerr coupled to a qubit.

The full Hamiltonian in dimensionless units (drive frequency fixed at 1) is

    H(t) = (3/4) p^2 + (beta^2/4) q^4 - (1/4) q^2 + (g/beta) cos(t) q
           - (1/4)(p^2 + q^2) sigma_z + (Gamma/2)(pq + qp) + epsilon sigma_x

with all oscillator operators tensored against the qubit identity and the
Pauli operators against the oscillator identity.  Pinning sigma_z -> +1
leaves the excited qubit facing the standard driven Duffing oscillator
(kinetic p^2/2, double-well potential); sigma_z -> -1 leaves the ground
qubit facing a pure quartic well with kinetic term p^2.  The cross-Kerr
form (p^2 + q^2) sigma_z / 4 = (a†a + 1/2) sigma_z / 2 measures sigma_z
without flipping it, so with epsilon = 0 the qubit populations are
conserved and the oscillator acts as a pointer.

Damping at rate Gamma enters twice, and the two pieces belong together:
a single Lindblad operator L = sqrt(2 Gamma) a, plus the (Gamma/2)(pq+qp)
Hamiltonian term.  Without the latter, the mean-field equations damp both
quadratures symmetrically instead of reproducing the velocity-damped
classical oscillator (see ``classical`` for the derivation).

``epsilon`` is the coefficient of sigma_x; epsilon = 1/2 makes the qubit
self-Hamiltonian comparable in magnitude to the cross-Kerr coupling and is
the interesting incompatible-observable regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hilbert
from .errors import ConfigError
from .hilbert import OperatorMatrix, SpaceSignature, StateVector

DRIVE_OMEGA = 1.0  # drive is cos(t); fixed so the strobe phase t/2pi = n + 1/4 is unambiguous
DRIVE_PERIOD = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """Physics knobs.

    beta      dimensionless action scale of the oscillator (smaller = more
              classical, larger truncation needed); must be > 0 since the
              drive amplitude is g/beta.
    g         drive strength.
    gamma     damping rate of the zero-temperature environment.
    epsilon   sigma_x coefficient (0 for pure pointer measurement, 1/2 for
              the incompatible-observable regime).
    fock_dim  oscillator truncation N.

    The defaults (beta=0.1, g=0.3, gamma=0.125) are the headline operating
    point where the excited-branch Duffing dynamics is chaotic; note that
    beta=0.1 requires fock_dim of several hundred.  Desk-scale work uses
    beta=0.3 so that N=60 suffices.
    """

    beta: float = 0.1
    g: float = 0.3
    gamma: float = 0.125
    epsilon: float = 0.0
    fock_dim: int = 60

    def __post_init__(self) -> None:
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ConfigError(f"beta must be positive and finite, got {self.beta}")
        if self.g < 0.0 or not math.isfinite(self.g):
            raise ConfigError(f"g must be >= 0 and finite, got {self.g}")
        if self.gamma < 0.0 or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma must be >= 0 and finite, got {self.gamma}")
        if not math.isfinite(self.epsilon):
            raise ConfigError(f"epsilon must be finite, got {self.epsilon}")
        if self.fock_dim < 2:
            raise ConfigError(f"fock_dim must be >= 2, got {self.fock_dim}")

    @property
    def signature(self) -> SpaceSignature:
        return SpaceSignature.composite(self.fock_dim)


def suggest_fock_dim(q_max: float) -> int:
    """Truncation guidance: N >= ceil(3 q_max^2 / 2) for phase-space extent q_max."""
    return int(math.ceil(1.5 * q_max * q_max))


@dataclass(frozen=True)
class HamiltonianParts:
    """H(t) split as static_part + cos(t) * drive_part.

    Integrators precompute both matrices once and rebuild H(t) per substep
    with one scalar multiply, so the split must reproduce the full builder
    exactly; ``build_hamiltonian`` is implemented on top of it.
    """

    static_part: OperatorMatrix
    drive_part: OperatorMatrix

    def at(self, t: float) -> np.ndarray:
        return self.static_part.mat + math.cos(t) * self.drive_part.mat


def hamiltonian_parts(params: ModelParams) -> HamiltonianParts:
    """Assemble the static and drive parts of H on the composite space."""
    n = params.fock_dim
    q = hilbert.position_op(n).mat
    p = hilbert.momentum_op(n).mat
    q2 = q @ q
    p2 = p @ p
    q4 = q2 @ q2
    sx, _, sz = hilbert.pauli_ops()

    osc_static = (
        0.75 * p2
        + 0.25 * params.beta**2 * q4
        - 0.25 * q2
        + 0.5 * params.gamma * (p @ q + q @ p)
    )
    i2 = np.eye(2)
    i_n = np.eye(n)
    static = (
        np.kron(i2, osc_static)
        - 0.25 * np.kron(sz.mat, p2 + q2)
        + params.epsilon * np.kron(sx.mat, i_n)
    )
    drive = (params.g / params.beta) * np.kron(i2, q)

    sig = params.signature
    return HamiltonianParts(
        static_part=OperatorMatrix(sig, static, hermitian=True),
        drive_part=OperatorMatrix(sig, drive, hermitian=True),
    )


def build_hamiltonian(params: ModelParams, t: float) -> OperatorMatrix:
    """Full Hamiltonian H(t) at a given dimensionless time."""
    parts = hamiltonian_parts(params)
    return OperatorMatrix(params.signature, parts.at(t), hermitian=True)


def lindblad_operators(params: ModelParams) -> list[OperatorMatrix]:
    """Environment coupling: the single zero-temperature damping channel.

    Returns [sqrt(2 Gamma) (I ⊗ a)], or an empty list when gamma = 0 so
    that integrators fall back to purely unitary evolution.
    """
    if params.gamma == 0.0:
        return []
    a = hilbert.lift_oscillator(hilbert.annihilation_op(params.fock_dim))
    return [OperatorMatrix(params.signature, math.sqrt(2.0 * params.gamma) * a.mat)]


def effective_potential(
    q_values: np.ndarray, sigma_z_expectation: float, params: ModelParams
) -> np.ndarray:
    """Oscillator potential seen at a fixed qubit polarization.

    V(q) = (beta^2/4) q^4 - (1/4) q^2 - (<sigma_z>/4) q^2.

    <sigma_z> = -1 gives the pure quartic well; +1 gives the Duffing
    double well with minima at q = ±1/beta and depth -1/(4 beta^2).
    """
    if not -1.0 <= sigma_z_expectation <= 1.0:
        raise ValueError(f"<sigma_z> must lie in [-1, 1], got {sigma_z_expectation}")
    q = np.asarray(q_values, dtype=np.float64)
    return 0.25 * params.beta**2 * q**4 - 0.25 * q**2 - 0.25 * sigma_z_expectation * q**2


def initial_state(
    qubit_amplitudes: tuple[complex, complex],
    alpha: complex,
    params: ModelParams,
    tail_tol: float = hilbert.DEFAULT_COHERENT_TAIL_TOL,
) -> StateVector:
    """Product state (c_g|g> + c_e|e>) ⊗ |alpha> on the composite space."""
    c_g, c_e = qubit_amplitudes
    qubit = hilbert.qubit_state(c_g, c_e)
    osc = hilbert.coherent_state(alpha, params.fock_dim, tail_tol=tail_tol)
    return hilbert.tensor(qubit, osc)
