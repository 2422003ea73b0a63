"""Dense operator algebra on a qubit ⊗ truncated-oscillator Hilbert space.

The composite space is ordered qubit-major: basis index = qubit_index * N +
fock_index, with qubit basis (|g>, |e>) and oscillator Fock basis
|0> ... |N-1>.  The qubit convention is sigma_z |g> = -|g>,
sigma_z |e> = +|e>, so the reduced qubit matrix reads
[[rho_gg, rho_ge], [rho_eg, rho_ee]].

Every operator and state carries a :class:`SpaceSignature`; operations
refuse to combine carriers whose signatures disagree, so a mismatched
truncation fails loudly instead of broadcasting.  All carriers are
immutable after construction and safe to share between threads or
processes.

Dense complex matrices are used throughout: at the dimensions this package
targets (2N up to ~1200) dense Hermitian algebra is simpler and faster
than sparse formats, and BLAS does the heavy lifting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .errors import (
    DimensionError,
    InvalidStateError,
    NonHermitianError,
    SignatureError,
    TruncationLeakError,
)

QUBIT_GROUND = 0
QUBIT_EXCITED = 1

HERMITIAN_CONSTRUCTION_TOL = 1e-12
STATE_NORM_TOL = 1e-10
DEFAULT_COHERENT_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class SpaceSignature:
    """Identifies which (sub)space a matrix or vector lives on.

    A dimension of 1 marks an absent factor, so (2, 1) is a bare qubit,
    (1, N) a bare oscillator and (2, N) the composite space.
    """

    qubit_dim: int
    fock_dim: int

    def __post_init__(self) -> None:
        if self.qubit_dim not in (1, 2):
            raise DimensionError(f"qubit_dim must be 1 or 2, got {self.qubit_dim}")
        if self.fock_dim < 1:
            raise DimensionError(f"fock_dim must be >= 1, got {self.fock_dim}")

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.fock_dim

    @property
    def is_composite(self) -> bool:
        return self.qubit_dim == 2 and self.fock_dim > 1

    @property
    def is_qubit_only(self) -> bool:
        return self.qubit_dim == 2 and self.fock_dim == 1

    @property
    def is_oscillator_only(self) -> bool:
        return self.qubit_dim == 1 and self.fock_dim > 1

    @classmethod
    def qubit(cls) -> "SpaceSignature":
        return cls(2, 1)

    @classmethod
    def oscillator(cls, fock_dim: int) -> "SpaceSignature":
        if fock_dim < 2:
            raise DimensionError(f"oscillator truncation needs fock_dim >= 2, got {fock_dim}")
        return cls(1, fock_dim)

    @classmethod
    def composite(cls, fock_dim: int) -> "SpaceSignature":
        if fock_dim < 2:
            raise DimensionError(f"composite space needs fock_dim >= 2, got {fock_dim}")
        return cls(2, fock_dim)


def _require_same_signature(a: SpaceSignature, b: SpaceSignature, what: str) -> None:
    if a != b:
        raise SignatureError(f"{what}: signatures differ ({a} vs {b})")


def _frozen_complex_matrix(entries: np.ndarray, dim: int, what: str) -> np.ndarray:
    mat = np.array(entries, dtype=np.complex128, copy=True, order="C")
    if mat.shape != (dim, dim):
        raise DimensionError(f"{what}: expected shape {(dim, dim)}, got {mat.shape}")
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class OperatorMatrix:
    """A dense operator tagged with its space signature.

    ``hermitian=True`` asserts Hermiticity at construction time
    (max deviation below ``HERMITIAN_CONSTRUCTION_TOL``) and is used by
    downstream consumers to skip redundant checks.
    """

    signature: SpaceSignature
    mat: np.ndarray
    hermitian: bool = False

    def __post_init__(self) -> None:
        mat = _frozen_complex_matrix(self.mat, self.signature.dim, "OperatorMatrix")
        object.__setattr__(self, "mat", mat)
        if self.hermitian:
            dev = float(np.max(np.abs(mat - mat.conj().T)))
            if dev >= HERMITIAN_CONSTRUCTION_TOL:
                raise NonHermitianError(
                    f"operator flagged Hermitian deviates by {dev:.3e} "
                    f"(tolerance {HERMITIAN_CONSTRUCTION_TOL:.0e})"
                )

    @property
    def dim(self) -> int:
        return self.signature.dim

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.signature, self.mat.conj().T, hermitian=self.hermitian)


@dataclass(frozen=True)
class StateVector:
    """A pure state on a signed (sub)space.  Not automatically normalized."""

    signature: SpaceSignature
    vec: np.ndarray

    def __post_init__(self) -> None:
        vec = np.array(self.vec, dtype=np.complex128, copy=True)
        if vec.shape != (self.signature.dim,):
            raise DimensionError(
                f"StateVector: expected shape {(self.signature.dim,)}, got {vec.shape}"
            )
        vec.setflags(write=False)
        object.__setattr__(self, "vec", vec)

    @property
    def dim(self) -> int:
        return self.signature.dim

    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.signature, self.vec / n)

    def require_normalized(self, tol: float = STATE_NORM_TOL) -> None:
        dev = abs(self.norm() - 1.0)
        if dev > tol:
            raise ValueError(f"state norm deviates from 1 by {dev:.3e} (tolerance {tol:.0e})")


@dataclass(frozen=True)
class DensityMatrix:
    """A (candidate) density matrix tagged with its space signature.

    Construction does not validate physicality; call :meth:`validate` with
    explicit tolerances where the trace/Hermiticity/positivity contract
    matters (integrators do this at every recorded time).
    """

    signature: SpaceSignature
    mat: np.ndarray

    def __post_init__(self) -> None:
        mat = _frozen_complex_matrix(self.mat, self.signature.dim, "DensityMatrix")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        return cls(psi.signature, np.outer(psi.vec, psi.vec.conj()))

    @property
    def dim(self) -> int:
        return self.signature.dim

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def purity(self) -> float:
        return float(np.vdot(self.mat, self.mat).real)

    def validate(
        self,
        trace_tol: float = 1e-8,
        herm_tol: float = 1e-10,
        psd_tol: float = 1e-8,
    ) -> None:
        """Raise unless trace, Hermiticity and positivity hold within tolerance."""
        trace_dev = abs(self.trace() - 1.0)
        if trace_dev > trace_tol:
            raise InvalidStateError(
                f"density matrix trace deviates from 1 by {trace_dev:.3e} "
                f"(tolerance {trace_tol:.0e})"
            )
        herm_dev = float(np.max(np.abs(self.mat - self.mat.conj().T)))
        if herm_dev > herm_tol:
            raise InvalidStateError(
                f"density matrix deviates from Hermiticity by {herm_dev:.3e} "
                f"(tolerance {herm_tol:.0e})"
            )
        min_eig = float(np.linalg.eigvalsh(self.mat)[0])
        if min_eig < -psd_tol:
            raise InvalidStateError(
                f"density matrix has eigenvalue {min_eig:.3e} below -psd_tol "
                f"(tolerance {psd_tol:.0e})"
            )


# ---------------------------------------------------------------------------
# Operator constructors
# ---------------------------------------------------------------------------


def annihilation_op(fock_dim: int) -> OperatorMatrix:
    """Truncated annihilation operator, a|n> = sqrt(n)|n-1>.

    On the truncated basis {|0>, ..., |N-1>} the commutator [a, a†]
    equals the identity except for the (N-1, N-1) entry, which reads
    -(N-1).  That corner defect is inherent to truncation; the leak
    monitors elsewhere exist to keep population away from it.
    """
    if fock_dim < 2:
        raise DimensionError(f"annihilation operator needs fock_dim >= 2, got {fock_dim}")
    mat = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=np.float64)), k=1)
    return OperatorMatrix(SpaceSignature.oscillator(fock_dim), mat)


def number_op(fock_dim: int) -> OperatorMatrix:
    if fock_dim < 2:
        raise DimensionError(f"number operator needs fock_dim >= 2, got {fock_dim}")
    mat = np.diag(np.arange(fock_dim, dtype=np.float64))
    return OperatorMatrix(SpaceSignature.oscillator(fock_dim), mat, hermitian=True)


def position_op(fock_dim: int) -> OperatorMatrix:
    """Dimensionless position q = (a + a†)/sqrt(2)."""
    a = annihilation_op(fock_dim).mat
    return OperatorMatrix(
        SpaceSignature.oscillator(fock_dim), (a + a.conj().T) / np.sqrt(2.0), hermitian=True
    )


def momentum_op(fock_dim: int) -> OperatorMatrix:
    """Conjugate momentum p = -i (a - a†)/sqrt(2), so [q, p] = i away from the corner."""
    a = annihilation_op(fock_dim).mat
    return OperatorMatrix(
        SpaceSignature.oscillator(fock_dim), -1j * (a - a.conj().T) / np.sqrt(2.0), hermitian=True
    )


def identity_op(signature: SpaceSignature) -> OperatorMatrix:
    return OperatorMatrix(signature, np.eye(signature.dim), hermitian=True)


def pauli_ops() -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """Pauli operators (sigma_x, sigma_y, sigma_z) in the (|g>, |e>) basis.

    With the ground state first, sigma_z = diag(-1, +1); the triple keeps
    the standard algebra sigma_x sigma_y = i sigma_z.
    """
    sig = SpaceSignature.qubit()
    sx = OperatorMatrix(sig, np.array([[0, 1], [1, 0]]), hermitian=True)
    sy = OperatorMatrix(sig, np.array([[0, 1j], [-1j, 0]]), hermitian=True)
    sz = OperatorMatrix(sig, np.array([[-1, 0], [0, 1]]), hermitian=True)
    return sx, sy, sz


# ---------------------------------------------------------------------------
# State constructors
# ---------------------------------------------------------------------------


def fock_state(n: int, fock_dim: int) -> StateVector:
    if not 0 <= n < fock_dim:
        raise DimensionError(f"Fock index {n} outside truncation 0..{fock_dim - 1}")
    vec = np.zeros(fock_dim, dtype=np.complex128)
    vec[n] = 1.0
    return StateVector(SpaceSignature.oscillator(fock_dim), vec)


def qubit_state(c_g: complex, c_e: complex, norm_tol: float = STATE_NORM_TOL) -> StateVector:
    """Qubit state c_g|g> + c_e|e>; amplitudes must already be normalized."""
    dev = abs(abs(c_g) ** 2 + abs(c_e) ** 2 - 1.0)
    if dev > norm_tol:
        raise ValueError(
            f"qubit amplitudes are not normalized: |c_g|^2 + |c_e|^2 deviates by {dev:.3e}"
        )
    return StateVector(SpaceSignature.qubit(), np.array([c_g, c_e], dtype=np.complex128))


def coherent_tail_weight(alpha: complex, fock_dim: int) -> float:
    """Poisson weight of the discarded levels n >= fock_dim for |alpha>."""
    lam = abs(alpha) ** 2
    if lam == 0.0:
        return 0.0
    # P(X >= N) for X ~ Poisson(lam) via the regularized lower incomplete gamma.
    return float(gammainc(fock_dim, lam))


def required_fock_dim(alpha: complex, tail_tol: float) -> int:
    """Smallest truncation whose coherent-state tail weight is below tail_tol."""
    lam = abs(alpha) ** 2
    lo, hi = 2, 4
    while coherent_tail_weight(alpha, hi) >= tail_tol:
        hi *= 2
        if hi > 10_000_000:
            raise ValueError("required truncation exceeds 1e7 levels; check alpha/tail_tol")
    while lo < hi:
        mid = (lo + hi) // 2
        if coherent_tail_weight(alpha, mid) < tail_tol:
            hi = mid
        else:
            lo = mid + 1
    return lo


def coherent_state(
    alpha: complex,
    fock_dim: int,
    tail_tol: float = DEFAULT_COHERENT_TAIL_TOL,
) -> StateVector:
    """Truncated coherent state |alpha>, renormalized to unit norm.

    Amplitudes follow c_n = exp(-|alpha|^2 / 2) alpha^n / sqrt(n!), built by
    the stable recurrence c_n = c_{n-1} * alpha / sqrt(n).  The truncated
    tail weight must sit below ``tail_tol``; otherwise the state would be
    silently distorted, so construction fails and names the truncation that
    would suffice.

    Expectation values in the stated convention: <q> = sqrt(2) Re alpha,
    <p> = sqrt(2) Im alpha, <a† a> = |alpha|^2 (up to the tail weight).
    """
    if fock_dim < 2:
        raise DimensionError(f"coherent state needs fock_dim >= 2, got {fock_dim}")
    tail = coherent_tail_weight(alpha, fock_dim)
    if tail >= tail_tol:
        needed = required_fock_dim(alpha, tail_tol)
        raise TruncationLeakError(
            f"coherent state |alpha={alpha}| leaks {tail:.3e} past fock_dim={fock_dim} "
            f"(tolerance {tail_tol:.0e}); use fock_dim >= {needed}"
        )
    amps = np.zeros(fock_dim, dtype=np.complex128)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, fock_dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    amps /= np.linalg.norm(amps)
    return StateVector(SpaceSignature.oscillator(fock_dim), amps)


# ---------------------------------------------------------------------------
# Composition and reduction
# ---------------------------------------------------------------------------


def tensor(a, b):
    """Kronecker product under the fixed qubit ⊗ oscillator ordering.

    ``a`` must live on the bare qubit and ``b`` on the bare oscillator;
    composite operands are rejected because the ordering convention is
    global and a second tensor factor has nowhere to go.
    Accepts two OperatorMatrix or two StateVector arguments.
    """
    if isinstance(a, OperatorMatrix) and isinstance(b, OperatorMatrix):
        _check_tensor_operands(a.signature, b.signature)
        sig = SpaceSignature(2, b.signature.fock_dim)
        return OperatorMatrix(
            sig, np.kron(a.mat, b.mat), hermitian=a.hermitian and b.hermitian
        )
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        _check_tensor_operands(a.signature, b.signature)
        sig = SpaceSignature(2, b.signature.fock_dim)
        return StateVector(sig, np.kron(a.vec, b.vec))
    raise TypeError("tensor expects two OperatorMatrix or two StateVector operands")


def _check_tensor_operands(sa: SpaceSignature, sb: SpaceSignature) -> None:
    if sa.is_composite or sb.is_composite:
        raise SignatureError("tensor operands must be single-subsystem, got a composite")
    if not sa.is_qubit_only:
        raise SignatureError(f"first tensor operand must be qubit-only, got {sa}")
    if not sb.is_oscillator_only:
        raise SignatureError(f"second tensor operand must be oscillator-only, got {sb}")


def lift_qubit(op: OperatorMatrix, fock_dim: int) -> OperatorMatrix:
    """Embed a qubit operator into the composite space as op ⊗ I_N."""
    return tensor(op, identity_op(SpaceSignature.oscillator(fock_dim)))


def lift_oscillator(op: OperatorMatrix) -> OperatorMatrix:
    """Embed an oscillator operator into the composite space as I_2 ⊗ op."""
    return tensor(identity_op(SpaceSignature.qubit()), op)


def _require_composite(sig: SpaceSignature, what: str) -> None:
    if not sig.is_composite:
        raise SignatureError(f"{what} needs a composite-signature input, got {sig}")


def _reduced_qubit_raw(rho: np.ndarray, fock_dim: int) -> np.ndarray:
    return np.einsum("aibi->ab", rho.reshape(2, fock_dim, 2, fock_dim))


def _reduced_oscillator_raw(rho: np.ndarray, fock_dim: int) -> np.ndarray:
    return np.einsum("aiaj->ij", rho.reshape(2, fock_dim, 2, fock_dim))


def partial_trace_oscillator(rho: DensityMatrix) -> DensityMatrix:
    """Trace out the oscillator, leaving the 2x2 qubit matrix."""
    _require_composite(rho.signature, "partial_trace_oscillator")
    n = rho.signature.fock_dim
    return DensityMatrix(SpaceSignature.qubit(), _reduced_qubit_raw(rho.mat, n))


def partial_trace_qubit(rho: DensityMatrix) -> DensityMatrix:
    """Trace out the qubit, leaving the N x N oscillator matrix."""
    _require_composite(rho.signature, "partial_trace_qubit")
    n = rho.signature.fock_dim
    return DensityMatrix(SpaceSignature.oscillator(n), _reduced_oscillator_raw(rho.mat, n))


def qubit_density_from_state(psi: StateVector) -> DensityMatrix:
    """Reduced qubit density matrix of a composite pure state."""
    _require_composite(psi.signature, "qubit_density_from_state")
    blocks = psi.vec.reshape(2, psi.signature.fock_dim)
    return DensityMatrix(SpaceSignature.qubit(), blocks @ blocks.conj().T)


# ---------------------------------------------------------------------------
# Spectra and expectation values
# ---------------------------------------------------------------------------


def hermitian_eigenvalues(op: OperatorMatrix, herm_tol: float = 1e-10) -> np.ndarray:
    """Real eigenvalues of a Hermitian operator, ascending.

    Refuses non-Hermitian input (beyond ``herm_tol``) instead of quietly
    symmetrizing, because a non-Hermitian matrix reaching an entropy or
    spectral diagnostic signals an upstream bug.
    """
    dev = float(np.max(np.abs(op.mat - op.mat.conj().T)))
    if dev > herm_tol:
        raise NonHermitianError(
            f"hermitian_eigenvalues: input deviates from Hermiticity by {dev:.3e}"
        )
    return np.linalg.eigvalsh(op.mat)


def hermitian_eigensystem(op: OperatorMatrix, herm_tol: float = 1e-10):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian operator."""
    dev = float(np.max(np.abs(op.mat - op.mat.conj().T)))
    if dev > herm_tol:
        raise NonHermitianError(
            f"hermitian_eigensystem: input deviates from Hermiticity by {dev:.3e}"
        )
    return np.linalg.eigh(op.mat)


def expect(op: OperatorMatrix, state) -> complex:
    """<A> in a StateVector or DensityMatrix (complex; real for Hermitian A)."""
    if isinstance(state, StateVector):
        _require_same_signature(op.signature, state.signature, "expect")
        return complex(np.vdot(state.vec, op.mat @ state.vec))
    if isinstance(state, DensityMatrix):
        _require_same_signature(op.signature, state.signature, "expect")
        return complex(np.trace(op.mat @ state.mat))
    raise TypeError("expect expects a StateVector or DensityMatrix state")
