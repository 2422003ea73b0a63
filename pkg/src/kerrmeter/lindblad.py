"""Fixed-step integration of the Lindblad master equation.

The equation of motion for the density matrix is

    d rho / dt = -i [H(t), rho]
                 + sum_m ( L_m rho L_m† - (1/2) L_m† L_m rho - (1/2) rho L_m† L_m )

integrated with the classical 4th-order Runge-Kutta scheme at a fixed
step.  A fixed step is deliberate: the drive period sets a natural time
scale, strobed outputs must land exactly on t/2pi = n + 1/4, and runs must
be bit-reproducible across machines.  There is no positivity projection:
if the state drifts outside tolerance the run aborts with a diagnostic,
because a positivity breach means the truncation or the step size is
wrong and patching it would hide that.

Stability note: the spectral radius of the truncated Hamiltonian grows
like (beta^2/4)(2N)^2 from the quartic term, so the step must satisfy
dt * ||H|| < 2.8 (the RK4 imaginary-axis limit).  The desk-scale default
dt = 2pi/2000 is comfortably inside that bound for beta = 0.3, N = 60;
paper-scale truncations (N of several hundred) need proportionally more
steps per period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert, observables
from .errors import ConfigError, InvariantViolation, SignatureError, TruncationLeakError
from .hilbert import DensityMatrix, OperatorMatrix
from .model import DRIVE_PERIOD, ModelParams, hamiltonian_parts, lindblad_operators


@dataclass(frozen=True)
class MasterRunConfig:
    """Integration and validation settings for one master-equation run.

    ``t_end`` must be an integer number of steps; ``record_stride`` thins
    the recorded observable series (snapshots of the full density matrix
    are taken only at ``snapshot_times``, which are rounded to the step
    grid).  Tolerances are checked at every recorded time and breaching
    any of them aborts the run.
    """

    t_end: float
    dt: float = DRIVE_PERIOD / 2000.0
    record_stride: int = 10
    trace_tol: float = 1e-6
    herm_tol: float = 1e-8
    psd_tol: float = 1e-6
    leak_tol: float = 1e-4
    snapshot_times: tuple[float, ...] = ()
    store_rho_series: bool = False

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_end <= 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        for name in ("trace_tol", "herm_tol", "psd_tol", "leak_tol"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        n_steps = round(self.t_end / self.dt)
        if n_steps < 1 or abs(n_steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigError(
                f"t_end={self.t_end} is not an integer multiple of dt={self.dt}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)


@dataclass
class MasterRunOutput:
    """Recorded time series plus optional density-matrix snapshots.

    The qubit series come from the reduced 2x2 matrix (populations and
    coherence magnitude), the entropies are in nats, ``corr_index`` is
    S_Q + S_O - S, and ``leak`` tracks the population of the top five
    Fock levels.  ``invariants`` summarizes the worst deviations seen at
    recorded times (max trace deviation, max Hermiticity deviation, min
    eigenvalue, peak leak).
    """

    times: np.ndarray
    rho_gg: np.ndarray
    rho_ee: np.ndarray
    rho_ge_abs: np.ndarray
    sigma_z: np.ndarray
    q_mean: np.ndarray
    p_mean: np.ndarray
    s_qubit: np.ndarray
    s_osc: np.ndarray
    s_total: np.ndarray
    corr_index: np.ndarray
    leak: np.ndarray
    purity: np.ndarray
    final_rho: DensityMatrix
    snapshots: list[tuple[float, DensityMatrix]] = field(default_factory=list)
    rho_series: list[DensityMatrix] = field(default_factory=list)
    invariants: dict[str, float] = field(default_factory=dict)


def lindblad_rhs(rho: DensityMatrix, hamiltonian: OperatorMatrix, lindblads) -> np.ndarray:
    """Right-hand side of the master equation for arbitrary channels.

    Returns the matrix derivative d rho / dt; its trace vanishes
    identically, which downstream tests rely on.  This is the reference
    implementation; ``integrate_master`` uses an algebraically identical
    fast path specialized to the model's single damping channel.
    """
    if rho.signature != hamiltonian.signature:
        raise SignatureError(
            f"lindblad_rhs: rho {rho.signature} vs H {hamiltonian.signature}"
        )
    for op in lindblads:
        if op.signature != rho.signature:
            raise SignatureError(
                f"lindblad_rhs: rho {rho.signature} vs L {op.signature}"
            )
    h = hamiltonian.mat
    r = rho.mat
    out = -1j * (h @ r - r @ h)
    for op in lindblads:
        l = op.mat
        ld = l.conj().T
        ldl = ld @ l
        out += l @ r @ ld - 0.5 * (ldl @ r + r @ ldl)
    return out


class _ModelRhs:
    """Master-equation RHS specialized to L = sqrt(2 Gamma) (I ⊗ a).

    Uses K(t) = H(t) - (i/2) L†L so that d rho = -i (K rho - (K rho)†)
    + L rho L†.  The sandwich L rho L† and the anticommutator are
    O(dim^2) for the lowering channel (index shifts and diagonal scaling),
    leaving a single dense matmul per evaluation.

    The (K rho)† shortcut is only valid on Hermitian rho: on the
    anti-Hermitian component it generates a spurious flow that GROWS at
    rates up to Gamma * (N-1), so the integrator must re-symmetrize the
    state every step to keep that component at roundoff.
    """

    def __init__(self, params: ModelParams):
        parts = hamiltonian_parts(params)
        self.n = params.fock_dim
        self.gamma = params.gamma
        dim = 2 * self.n
        number_diag = np.tile(np.arange(self.n, dtype=np.float64), 2)
        self.k_static = parts.static_part.mat.astype(np.complex128, copy=True)
        if self.gamma > 0.0:
            self.k_static = self.k_static - 1j * self.gamma * np.diag(number_diag)
        self.drive = parts.drive_part.mat
        self.ladder = np.sqrt(np.arange(1.0, self.n))
        self._scratch = np.empty((dim, dim), dtype=np.complex128)

    def __call__(self, t: float, rho: np.ndarray) -> np.ndarray:
        k = self.k_static + math.cos(t) * self.drive
        m = k @ rho
        out = -1j * (m - m.conj().T)
        if self.gamma > 0.0:
            # 2 Gamma * (A rho A†) with A = I ⊗ a: shift both indices up by one
            # inside each qubit block and scale by sqrt-ladder factors.
            n = self.n
            r4 = rho.reshape(2, n, 2, n)
            sandwich = self._scratch
            sandwich.fill(0.0)
            s4 = sandwich.reshape(2, n, 2, n)
            s = self.ladder
            s4[:, : n - 1, :, : n - 1] = (
                r4[:, 1:, :, 1:] * s[None, :, None, None] * s[None, None, None, :]
            )
            out += (2.0 * self.gamma) * sandwich
        return out


def _rk4_step(rhs, t: float, dt: float, rho: np.ndarray) -> np.ndarray:
    k1 = rhs(t, rho)
    k2 = rhs(t + 0.5 * dt, rho + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, rho + (0.5 * dt) * k2)
    k4 = rhs(t + dt, rho + dt * k3)
    out = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    # Pin the anti-Hermitian roundoff at machine precision; see _ModelRhs.
    return 0.5 * (out + out.conj().T)


def integrate_master(
    rho0: DensityMatrix, params: ModelParams, cfg: MasterRunConfig
) -> MasterRunOutput:
    """Integrate the master equation and record diagnostics.

    The state is validated (trace, Hermiticity, positivity, truncation
    leak) at every recorded time; a breach raises ``InvariantViolation``
    or ``TruncationLeakError`` carrying the simulation time and the
    measured magnitude.  Output is a deterministic function of
    (rho0, params, cfg).
    """
    if rho0.signature != params.signature:
        raise SignatureError(
            f"integrate_master: rho0 {rho0.signature} vs params {params.signature}"
        )
    rhs = _ModelRhs(params)
    n = params.fock_dim
    q_mat = hilbert.position_op(n).mat
    p_mat = hilbert.momentum_op(n).mat

    n_steps = cfg.n_steps
    record_steps = list(range(0, n_steps + 1, cfg.record_stride))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    snapshot_steps = {}
    for t_snap in cfg.snapshot_times:
        k = round(t_snap / cfg.dt)
        if not 0 <= k <= n_steps:
            raise ConfigError(f"snapshot time {t_snap} outside the run horizon")
        snapshot_steps.setdefault(k, k * cfg.dt)

    rho = rho0.mat.astype(np.complex128, copy=True)
    rows: list[tuple] = []
    snapshots: list[tuple[float, DensityMatrix]] = []
    rho_series: list[DensityMatrix] = []
    worst = {
        "max_trace_dev": 0.0,
        "max_herm_dev": 0.0,
        "min_eigenvalue": np.inf,
        "leak_peak": 0.0,
    }

    record_set = set(record_steps)
    for step in range(n_steps + 1):
        t = step * cfg.dt
        if step in record_set:
            rows.append(_record(rho, t, n, q_mat, p_mat, cfg, worst))
            if cfg.store_rho_series:
                rho_series.append(DensityMatrix(params.signature, rho))
        if step in snapshot_steps:
            snapshots.append((snapshot_steps[step], DensityMatrix(params.signature, rho)))
        if step < n_steps:
            rho = _rk4_step(rhs, t, cfg.dt, rho)

    cols = list(zip(*rows))
    arrays = [np.array(c, dtype=np.float64) for c in cols]
    (times, rho_gg, rho_ee, rho_ge_abs, sigma_z, q_mean, p_mean,
     s_q, s_o, s_tot, corr, leak, purity) = arrays
    return MasterRunOutput(
        times=times,
        rho_gg=rho_gg,
        rho_ee=rho_ee,
        rho_ge_abs=rho_ge_abs,
        sigma_z=sigma_z,
        q_mean=q_mean,
        p_mean=p_mean,
        s_qubit=s_q,
        s_osc=s_o,
        s_total=s_tot,
        corr_index=corr,
        leak=leak,
        purity=purity,
        final_rho=DensityMatrix(params.signature, rho),
        snapshots=snapshots,
        rho_series=rho_series,
        invariants={k: float(v) for k, v in worst.items()},
    )


def _record(rho, t, n, q_mat, p_mat, cfg: MasterRunConfig, worst: dict):
    """Observables + invariant checks for one recorded time."""
    trace = np.trace(rho).real
    trace_dev = abs(trace - 1.0) + abs(np.trace(rho).imag)
    herm_dev = float(np.max(np.abs(rho - rho.conj().T)))
    eig_full = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    min_eig = float(eig_full[0])

    rq = hilbert._reduced_qubit_raw(rho, n)
    ro = hilbert._reduced_oscillator_raw(rho, n)
    leak = float(np.sum(np.diag(ro).real[-5:]))

    worst["max_trace_dev"] = max(worst["max_trace_dev"], trace_dev)
    worst["max_herm_dev"] = max(worst["max_herm_dev"], herm_dev)
    worst["min_eigenvalue"] = min(worst["min_eigenvalue"], min_eig)
    worst["leak_peak"] = max(worst["leak_peak"], leak)

    if trace_dev > cfg.trace_tol:
        raise InvariantViolation(
            f"trace deviation {trace_dev:.3e} at t={t:.6f} exceeds {cfg.trace_tol:.0e}",
            time=t, invariant="trace", magnitude=trace_dev,
        )
    if herm_dev > cfg.herm_tol:
        raise InvariantViolation(
            f"Hermiticity deviation {herm_dev:.3e} at t={t:.6f} exceeds {cfg.herm_tol:.0e}",
            time=t, invariant="hermiticity", magnitude=herm_dev,
        )
    if min_eig < -cfg.psd_tol:
        raise InvariantViolation(
            f"eigenvalue {min_eig:.3e} at t={t:.6f} below -{cfg.psd_tol:.0e}",
            time=t, invariant="positivity", magnitude=-min_eig,
        )
    if leak > cfg.leak_tol:
        raise TruncationLeakError(
            f"top-5 Fock population {leak:.3e} at t={t:.6f} exceeds {cfg.leak_tol:.0e}; "
            f"increase fock_dim"
        )

    s_q = observables.entropy_of_eigenvalues(np.linalg.eigvalsh(rq), cfg.psd_tol)
    s_o = observables.entropy_of_eigenvalues(np.linalg.eigvalsh(ro), cfg.psd_tol)
    s_tot = observables.entropy_of_eigenvalues(eig_full, cfg.psd_tol)
    q_mean = float(np.trace(ro @ q_mat).real)
    p_mean = float(np.trace(ro @ p_mat).real)
    purity = float(np.vdot(rho, rho).real)
    return (
        t,
        rq[0, 0].real,
        rq[1, 1].real,
        abs(rq[0, 1]),
        rq[1, 1].real - rq[0, 0].real,
        q_mean,
        p_mean,
        s_q,
        s_o,
        s_tot,
        s_q + s_o - s_tot,
        leak,
        purity,
    )
