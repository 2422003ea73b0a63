import numpy as np
import pytest
from scipy.special import gammainc

from kerrmeter import (
    DensityMatrix,
    DimensionError,
    NonHermitianError,
    SignatureError,
    SpaceSignature,
    StateVector,
    TruncationLeakError,
    annihilation_op,
    coherent_state,
    expect,
    fock_state,
    hermitian_eigenvalues,
    momentum_op,
    number_op,
    partial_trace_oscillator,
    partial_trace_qubit,
    pauli_ops,
    position_op,
    qubit_state,
    tensor,
)
from kerrmeter.hilbert import (
    coherent_tail_weight,
    hermitian_eigensystem,
    identity_op,
    lift_oscillator,
    lift_qubit,
    qubit_density_from_state,
    required_fock_dim,
)

from conftest import random_composite_density, random_density_matrix


class TestLadderOperators:
    def test_smallest_annihilation(self):
        a = annihilation_op(2)
        assert np.array_equal(a.mat, np.array([[0, 1], [0, 0]], dtype=complex))

    def test_number_operator_spectrum(self):
        for n in (2, 5, 17):
            a = annihilation_op(n).mat
            num = a.conj().T @ a
            assert np.allclose(num, np.diag(np.arange(n)), atol=1e-14)

    def test_truncation_corner_of_commutator(self):
        a = annihilation_op(5).mat
        comm = a @ a.conj().T - a.conj().T @ a
        expected = np.eye(5)
        expected[4, 4] = -4.0
        assert np.allclose(comm, expected, atol=1e-13)

    def test_rejects_tiny_dimension(self):
        with pytest.raises(DimensionError):
            annihilation_op(1)


class TestQuadratures:
    def test_hermitian_and_vacuum_moments(self):
        q = position_op(12)
        p = momentum_op(12)
        vac = fock_state(0, 12)
        assert abs(expect(q, vac)) < 1e-14
        assert abs(expect(p, vac)) < 1e-14
        # <0|q^2|0> = 1/2 in the a = (q+ip)/sqrt(2) convention
        q2 = DensityMatrix(q.signature, q.mat @ q.mat)
        assert abs(np.vdot(vac.vec, q2.mat @ vac.vec) - 0.5) < 1e-13

    def test_canonical_commutator_except_corner(self):
        n = 9
        q, p = position_op(n).mat, momentum_op(n).mat
        comm = q @ p - p @ q
        expected = 1j * np.eye(n)
        assert np.allclose(comm[: n - 1, : n - 1], expected[: n - 1, : n - 1], atol=1e-13)
        assert abs(comm[n - 1, n - 1] - 1j * (1 - n)) < 1e-12


class TestPauli:
    def test_ground_state_convention(self):
        sx, sy, sz = pauli_ops()
        g = qubit_state(1.0, 0.0)
        e = qubit_state(0.0, 1.0)
        assert np.allclose(sz.mat @ g.vec, -g.vec)
        assert np.allclose(sz.mat @ e.vec, e.vec)
        assert np.allclose(sx.mat @ g.vec, e.vec)

    def test_algebra(self):
        sx, sy, sz = pauli_ops()
        assert np.allclose(sz.mat @ sz.mat, np.eye(2))
        assert np.allclose(sx.mat @ sy.mat, 1j * sz.mat)


class TestCoherentState:
    def test_alpha_zero_is_vacuum(self):
        psi = coherent_state(0.0, 8)
        assert np.allclose(psi.vec, fock_state(0, 8).vec)

    def test_mean_excitation(self):
        alpha = 1.7 - 0.4j
        psi = coherent_state(alpha, 40)
        n_mean = expect(number_op(40), psi).real
        assert abs(n_mean - abs(alpha) ** 2) < 1e-8

    def test_position_mean_of_large_alpha(self):
        # <q> = sqrt(2) Re alpha; alpha = 6.8 sits at q ~ 9.617.
        psi = coherent_state(6.8, 110)
        q_mean = expect(position_op(110), psi).real
        assert abs(q_mean - np.sqrt(2.0) * 6.8) < 1e-6

    def test_norm_exactly_one_and_tail_identity(self):
        alpha = 2.3
        n = 18
        psi = coherent_state(alpha, n, tail_tol=1e-2)
        assert abs(np.linalg.norm(psi.vec) - 1.0) < 1e-12
        # Pre-renormalization deficit equals the analytic Poisson tail.
        amps = np.zeros(n, dtype=complex)
        amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
        for k in range(1, n):
            amps[k] = amps[k - 1] * alpha / np.sqrt(k)
        deficit = 1.0 - np.sum(np.abs(amps) ** 2)
        assert abs(deficit - coherent_tail_weight(alpha, n)) < 1e-8
        assert abs(coherent_tail_weight(alpha, n) - gammainc(n, abs(alpha) ** 2)) == 0.0

    def test_leak_error_names_required_dimension(self):
        with pytest.raises(TruncationLeakError) as err:
            coherent_state(4.0, 10)
        needed = required_fock_dim(4.0, 1e-8)
        assert str(needed) in str(err.value)
        coherent_state(4.0, needed)  # and that dimension actually works


class TestTensorAndTraces:
    def test_identity_product(self):
        i2 = identity_op(SpaceSignature.qubit())
        i5 = identity_op(SpaceSignature.oscillator(5))
        assert np.array_equal(tensor(i2, i5).mat, np.eye(10))

    def test_mixed_product_property(self, rng):
        n = 6
        for _ in range(10):
            a, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(2))
            b, d = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(2))
            qa = tensor(_op2(a), _opn(b, n)).mat @ tensor(_op2(c), _opn(d, n)).mat
            qb = tensor(_op2(a @ c), _opn(b @ d, n)).mat
            assert np.max(np.abs(qa - qb)) < 1e-12

    def test_basis_product_state_index(self):
        psi = tensor(qubit_state(1.0, 0.0), fock_state(0, 4))
        expected = np.zeros(8)
        expected[0] = 1.0
        assert np.allclose(psi.vec, expected)
        psi_e = tensor(qubit_state(0.0, 1.0), fock_state(2, 4))
        assert psi_e.vec[1 * 4 + 2] == 1.0

    def test_composite_operand_rejected(self):
        comp = identity_op(SpaceSignature.composite(3))
        with pytest.raises(SignatureError):
            tensor(comp, identity_op(SpaceSignature.oscillator(3)))

    def test_wrong_order_rejected(self):
        with pytest.raises(SignatureError):
            tensor(identity_op(SpaceSignature.oscillator(3)), identity_op(SpaceSignature.qubit()))

    def test_product_state_recovery(self, rng):
        n = 5
        rho_q = random_density_matrix(rng, 2)
        rho_o = random_density_matrix(rng, n)
        rho = DensityMatrix(SpaceSignature.composite(n), np.kron(rho_q, rho_o))
        assert np.max(np.abs(partial_trace_oscillator(rho).mat - rho_q)) < 1e-12
        assert np.max(np.abs(partial_trace_qubit(rho).mat - rho_o)) < 1e-12

    def test_maximally_entangled_reductions(self):
        n = 3
        vec = np.zeros(2 * n, dtype=complex)
        vec[0] = vec[n + 1] = 1.0 / np.sqrt(2.0)  # (|g,0> + |e,1>)/sqrt(2)
        rho = DensityMatrix.from_state(StateVector(SpaceSignature.composite(n), vec))
        rq = partial_trace_oscillator(rho).mat
        assert np.allclose(rq, np.eye(2) / 2, atol=1e-14)
        ro = partial_trace_qubit(rho).mat
        assert np.allclose(ro[:2, :2], np.eye(2) / 2, atol=1e-14)

    def test_partial_trace_preserves_trace(self, rng):
        for _ in range(20):
            rho = random_composite_density(rng, 4)
            assert abs(partial_trace_oscillator(rho).trace() - 1.0) < 1e-12
            assert abs(partial_trace_qubit(rho).trace() - 1.0) < 1e-12

    def test_single_subsystem_input_rejected(self, rng):
        rho = DensityMatrix(SpaceSignature.oscillator(4), random_density_matrix(rng, 4))
        with pytest.raises(SignatureError):
            partial_trace_qubit(rho)

    def test_reduced_qubit_from_pure_state(self, rng):
        n = 6
        vec = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
        psi = StateVector(SpaceSignature.composite(n), vec).normalized()
        direct = partial_trace_oscillator(DensityMatrix.from_state(psi)).mat
        fast = qubit_density_from_state(psi).mat
        assert np.max(np.abs(direct - fast)) < 1e-13


class TestEigenSolves:
    def test_diagonal(self):
        op = _opn(np.diag([0.3, 0.7]), 2)
        assert np.allclose(hermitian_eigenvalues(op), [0.3, 0.7])

    def test_sigma_x(self):
        sx, _, _ = pauli_ops()
        assert np.allclose(hermitian_eigenvalues(sx), [-1.0, 1.0])

    def test_trace_identity_and_reconstruction(self, rng):
        for _ in range(10):
            x = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
            h = x + x.conj().T
            op = _opn(h, 12)
            vals = hermitian_eigenvalues(op)
            assert abs(np.sum(vals) - np.trace(h).real) < 1e-10
            w, v = hermitian_eigensystem(op)
            assert np.max(np.abs(h - (v * w) @ v.conj().T)) < 1e-8

    def test_non_hermitian_rejected(self):
        bad = _opn(np.array([[0.0, 1.0], [0.0, 0.0]]), 2)
        with pytest.raises(NonHermitianError):
            hermitian_eigenvalues(bad)


class TestCarriers:
    def test_hermitian_flag_enforced(self):
        from kerrmeter import OperatorMatrix

        with pytest.raises(NonHermitianError):
            OperatorMatrix(
                SpaceSignature.oscillator(3),
                np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]]),
                hermitian=True,
            )

    def test_operators_immutable(self):
        q = position_op(4)
        with pytest.raises(ValueError):
            q.mat[0, 0] = 5.0

    def test_density_matrix_validate(self, rng):
        rho = random_composite_density(rng, 3)
        rho.validate()
        bad = DensityMatrix(rho.signature, 2.0 * rho.mat)
        with pytest.raises(Exception):
            bad.validate()

    def test_expect_signature_mismatch(self):
        q5 = position_op(5)
        psi6 = fock_state(0, 6)
        with pytest.raises(SignatureError):
            expect(q5, psi6)

    def test_lift_helpers(self):
        sx, _, sz = pauli_ops()
        n = 4
        a = annihilation_op(n)
        left = lift_qubit(sz, n).mat @ lift_oscillator(a).mat
        right = tensor(sz, a).mat
        assert np.max(np.abs(left - right)) < 1e-14


def _op2(mat):
    from kerrmeter import OperatorMatrix

    return OperatorMatrix(SpaceSignature.qubit(), mat)


def _opn(mat, n):
    from kerrmeter import OperatorMatrix

    return OperatorMatrix(SpaceSignature.oscillator(n), mat)
