"""Quantum-state-diffusion unravelling: stochastic pure-state trajectories.

The stochastic increment per step is the Euler-Maruyama form of

    |d psi> = -i H |psi> dt
              + sum_m (L_m - <L_m>) |psi> d xi_m
              + sum_m (<L_m†> L_m - (1/2) L_m† L_m - (1/2) <L_m†><L_m>) |psi> dt

followed by renormalization, with all expectation values frozen at the
pre-step state.  The complex noise increments satisfy E[d xi] = 0,
E[d xi^2] = 0, E[|d xi|^2] = dt; averaging |psi><psi| over the noise
reproduces the Lindblad master equation, which is the contract the test
suite enforces ensemble-against-integrator.

Stiffness and the stepping scheme: a bare explicit Euler treatment of
-i H psi dt is unstable against the top of the truncated-oscillator
spectrum, which grows like (beta^2/4)(2N)^2 from the quartic term.  The
highest eigencomponents are amplified at rate ~ E^2 dt^2 / 2 per step
while damping only removes Gamma n dt, so roundoff seeded at the ladder
edge doubles every few steps unless dt < 2 Gamma N / E_max^2 — measured
blow-ups at desk scale (beta = 0.3, N = 60) start at ~25x the
accuracy-driven step (``stable_dt_estimate`` computes the bound).  The
production engine therefore splits the generator: the static Hamiltonian
block advances by its exact unitary propagator (precomputed once per
run via one Hermitian eigendecomposition per qubit branch), while the
drive, the sigma_x coupling, the dissipative drift and the noise keep
their plain Euler-Maruyama increments evaluated at the pre-step state.
The scheme remains first-order-in-noise and fixed-step; it is validated
against the pure Euler-Maruyama reference step (``qsd_step``), against
closed forms, and against the master equation in the ensemble mean.

Noise is generated per trajectory from a counter-based Philox stream
keyed by (seed, trajectory index), so trajectory k's randomness is a pure
function of those two integers: ensembles can be split across processes,
restarted, or replayed point-wise without any sequential seed handoff.

Performance: trajectories of an ensemble are advanced together as a
batch, turning the per-step propagator application into one BLAS-3
matrix product per qubit branch instead of thousands of tiny matvecs.
The damping channel L = sqrt(2 Gamma) (I ⊗ a) is applied by index
shifts, never as a dense matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import hilbert
from .errors import (
    ConfigError,
    NormCollapseError,
    SignatureError,
    TruncationLeakError,
)
from .hilbert import OperatorMatrix, StateVector
from .model import DRIVE_PERIOD, ModelParams, hamiltonian_parts

MAX_SEED = 2**64 - 1
_NOISE_BLOCK = 2048


def stable_dt_estimate(params: ModelParams, safety: float = 0.35) -> float:
    """Largest Euler step that keeps the truncation edge net-damped.

    Uses the eigenvalue extent of the static Hamiltonian and the damping
    rate Gamma * (N-1) of the top Fock level; the default safety margin
    also absorbs the mean-square amplification of the noise terms, which
    the deterministic bound alone underestimates (seed-dependent blow-ups
    were observed at ~1.9x the deterministic bound at desk scale).  With
    gamma = 0 nothing damps the edge, so the estimate falls back to an
    accuracy-motivated step instead.
    """
    parts = hamiltonian_parts(params)
    energies = np.linalg.eigvalsh(parts.static_part.mat)
    e_extent = float(max(abs(energies[0]), abs(energies[-1])))
    if params.gamma == 0.0 or e_extent == 0.0:
        return safety * 0.1 / max(e_extent, 1.0)
    return safety * 2.0 * params.gamma * (params.fock_dim - 1) / e_extent**2


class NoiseStream:
    """Complex Wiener increments for one trajectory, one channel at a time.

    Emits d xi = (eta1 + i eta2) sqrt(dt/2) per step and channel, with
    eta1, eta2 independent standard normals from a Philox generator keyed
    by (seed, trajectory index).  The stream depends only on that key and
    the draw order, not on block sizes, so identical configurations give
    identical noise on any platform.
    """

    def __init__(self, seed: int, traj_index: int, dt: float, n_channels: int):
        if not 0 <= seed <= MAX_SEED:
            raise ConfigError(f"seed must fit in 64 bits, got {seed}")
        if not 0 <= traj_index <= MAX_SEED:
            raise ConfigError(f"traj_index must fit in 64 bits, got {traj_index}")
        if dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {dt}")
        if n_channels < 0:
            raise ConfigError(f"n_channels must be >= 0, got {n_channels}")
        self.seed = seed
        self.traj_index = traj_index
        self.dt = dt
        self.n_channels = n_channels
        key = np.array([seed, traj_index], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self._scale = math.sqrt(dt / 2.0)

    def draw(self, n_steps: int) -> np.ndarray:
        """Increments for the next ``n_steps`` steps, shape (n_steps, n_channels)."""
        z = self._gen.standard_normal((n_steps, self.n_channels, 2))
        return (z[..., 0] + 1j * z[..., 1]) * self._scale


@dataclass(frozen=True)
class TrajectoryConfig:
    """Stepping, recording and provenance settings for one QSD run.

    ``seed`` keys the noise family; ``traj_index`` selects the member, so
    an ensemble over indices 0..M-1 with a fixed seed is reproducible
    trajectory by trajectory.
    """

    t_end: float
    dt: float = DRIVE_PERIOD / 16000.0
    record_stride: int = 80
    seed: int = 0
    traj_index: int = 0
    leak_tol: float = 1e-4
    norm_floor: float = 0.5
    store_final_state: bool = True

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ConfigError("dt and t_end must be positive")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        if not 0.0 < self.norm_floor < 1.0:
            raise ConfigError(f"norm_floor must be in (0, 1), got {self.norm_floor}")
        if self.leak_tol <= 0.0:
            raise ConfigError("leak_tol must be positive")
        n_steps = round(self.t_end / self.dt)
        if n_steps < 1 or abs(n_steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigError(
                f"t_end={self.t_end} is not an integer multiple of dt={self.dt}"
            )
        if n_steps % self.record_stride != 0:
            raise ConfigError(
                f"record_stride={self.record_stride} must divide n_steps={n_steps}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)


@dataclass
class TrajectoryRecord:
    """Observable time series of one trajectory plus noise provenance.

    The (seed, traj_index, dt) triple replays the exact noise stream.
    P_g and the qubit entropy come from the reduced qubit matrix of the
    normalized state at each recorded time; ``leak`` is the population of
    the top five Fock levels.
    """

    seed: int
    traj_index: int
    dt: float
    record_stride: int
    times: np.ndarray
    q_mean: np.ndarray
    p_mean: np.ndarray
    sigma_z: np.ndarray
    p_ground: np.ndarray
    entropy_qubit: np.ndarray
    leak: np.ndarray
    final_state: StateVector | None = None


def qsd_step(
    psi: StateVector,
    hamiltonian: OperatorMatrix,
    lindblads,
    noise: np.ndarray | None,
    dt: float,
) -> StateVector:
    """One Euler-Maruyama step, renormalized: the reference implementation.

    ``noise`` supplies one complex increment per channel (None is accepted
    for the channel-free unitary limit).  Works for arbitrary operators;
    the batched engine used by ``run_trajectory`` is an algebraically
    identical specialization and is tested against this function.
    """
    psi.require_normalized(tol=1e-8)
    if hamiltonian.signature != psi.signature:
        raise SignatureError(
            f"qsd_step: psi {psi.signature} vs H {hamiltonian.signature}"
        )
    n_channels = len(lindblads)
    if n_channels and (noise is None or len(noise) != n_channels):
        raise ValueError(f"expected {n_channels} noise increments")
    v = psi.vec
    dv = -1j * dt * (hamiltonian.mat @ v)
    for i, op in enumerate(lindblads):
        if op.signature != psi.signature:
            raise SignatureError(f"qsd_step: psi {psi.signature} vs L {op.signature}")
        l = op.mat
        lv = l @ v
        expec = complex(np.vdot(v, lv))
        dv += dt * (
            np.conj(expec) * lv
            - 0.5 * (l.conj().T @ lv)
            - 0.5 * abs(expec) ** 2 * v
        )
        dv += (lv - expec * v) * noise[i]
    out = v + dv
    norm = float(np.linalg.norm(out))
    if norm < 0.5:
        raise NormCollapseError(
            f"step destroyed the norm (|psi + dpsi| = {norm:.3e}); reduce dt"
        )
    return StateVector(psi.signature, out / norm)


class _BatchEngine:
    """Advances a batch of trajectories under the model dynamics.

    States are stored as two contiguous (M, N) blocks (ground and excited
    qubit rows).  The static Hamiltonian is block-diagonal apart from the
    sigma_x coupling, which by construction is exactly epsilon * I and is
    kept in the explicit part; this is asserted at setup.  Each step
    applies the Euler-Maruyama increments of the drive, the sigma_x
    coupling and the damping channel at the pre-step state, then rotates
    by the exact static-block propagator exp(-i H_block dt), then
    renormalizes.  The exact rotation is what makes the scheme stable at
    accuracy-driven step sizes (see the module docstring).
    """

    def __init__(self, params: ModelParams, batch: int):
        n = params.fock_dim
        parts = hamiltonian_parts(params)
        blocks = parts.static_part.mat.reshape(2, n, 2, n)
        cross = blocks[0, :, 1, :]
        if float(np.max(np.abs(cross - params.epsilon * np.eye(n)))) > 1e-12:
            raise AssertionError("static Hamiltonian cross block is not epsilon * I")
        self.n = n
        self.batch = batch
        self.params = params
        self.h_gg = np.ascontiguousarray(blocks[0, :, 0, :])
        self.h_ee = np.ascontiguousarray(blocks[1, :, 1, :])
        self.epsilon = params.epsilon
        self.gamma = params.gamma
        self.drive_amp = params.g / params.beta
        self.ladder = np.sqrt(np.arange(1.0, n))
        self.number = np.arange(n, dtype=np.float64)
        self._prop_g_t: np.ndarray | None = None
        self._prop_e_t: np.ndarray | None = None
        self._dt = None
        # Per-step scratch; the hot loop must not allocate (M, N) arrays.
        shape = (batch, n)
        self._hg = np.empty(shape, dtype=np.complex128)
        self._he = np.empty(shape, dtype=np.complex128)
        self._ag = np.zeros(shape, dtype=np.complex128)
        self._ae = np.zeros(shape, dtype=np.complex128)
        self._scale = np.empty(shape, dtype=np.complex128)
        self._rot = np.empty(shape, dtype=np.complex128)

    def set_dt(self, dt: float) -> None:
        """Build the exact static-block propagators for this step size."""
        self._dt = dt
        for name, block in (("_prop_g_t", self.h_gg), ("_prop_e_t", self.h_ee)):
            evals, evecs = np.linalg.eigh(block)
            phases = np.exp(-1j * dt * evals)
            prop = (evecs * phases) @ evecs.conj().T
            setattr(self, name, np.ascontiguousarray(prop.T))

    def apply_lower(self, block: np.ndarray) -> np.ndarray:
        """(I ⊗ a) acting on an (M, N) block."""
        out = np.zeros_like(block)
        out[:, :-1] = block[:, 1:] * self.ladder
        return out

    def apply_position(self, block: np.ndarray) -> np.ndarray:
        out = np.zeros_like(block)
        out[:, :-1] = block[:, 1:] * self.ladder
        out[:, 1:] += block[:, :-1] * self.ladder
        out *= 1.0 / math.sqrt(2.0)
        return out

    def apply_momentum(self, block: np.ndarray) -> np.ndarray:
        out = np.zeros_like(block)
        out[:, :-1] = block[:, 1:] * self.ladder
        out[:, 1:] -= block[:, :-1] * self.ladder
        out *= -1j / math.sqrt(2.0)
        return out

    def step(
        self,
        psi_g: np.ndarray,
        psi_e: np.ndarray,
        t: float,
        dt: float,
        dxi: np.ndarray | None,
    ) -> np.ndarray:
        """Advance all rows by one step in place; returns post-step norms.

        Explicit increments (drive, sigma_x, dissipator, noise) use the
        pre-step state throughout; the dissipative terms are grouped into
        a per-row scalar (functions of <a>), a per-column scalar (the
        number operator) and a multiple of the pre-step a psi, so besides
        the two BLAS-3 rotations the step is O(M N) elementwise work.
        """
        hg, he, ag, ae = self._hg, self._he, self._ag, self._ae

        # Explicit Hamiltonian increments -i dt (cos(t) (g/beta) q + eps sigma_x) psi.
        if self.drive_amp != 0.0:
            dl = (-1j * dt * self.drive_amp * math.cos(t) / math.sqrt(2.0)) * self.ladder
            np.multiply(psi_g[:, 1:], dl, out=hg[:, :-1])
            hg[:, -1] = 0.0
            hg[:, 1:] += psi_g[:, :-1] * dl
            np.multiply(psi_e[:, 1:], dl, out=he[:, :-1])
            he[:, -1] = 0.0
            he[:, 1:] += psi_e[:, :-1] * dl
        else:
            hg.fill(0.0)
            he.fill(0.0)
        if self.epsilon != 0.0:
            eps = -1j * dt * self.epsilon
            hg += eps * psi_e
            he += eps * psi_g

        if self.gamma > 0.0:
            np.multiply(psi_g[:, 1:], self.ladder, out=ag[:, :-1])
            np.multiply(psi_e[:, 1:], self.ladder, out=ae[:, :-1])
            # <a> in the pre-step (normalized) state, per trajectory.
            abar = np.vecdot(psi_g, ag) + np.vecdot(psi_e, ae)
            gdt = self.gamma * dt
            c_a = (2.0 * gdt) * abar.conj()
            c_psi = (-gdt) * (abar.conj() * abar)
            if dxi is not None:
                w = math.sqrt(2.0 * self.gamma) * dxi
                c_a += w
                c_psi -= w * abar
            np.subtract(
                (1.0 + c_psi)[:, None], gdt * self.number[None, :], out=self._scale
            )
            np.multiply(psi_g, self._scale, out=psi_g)
            np.multiply(psi_e, self._scale, out=psi_e)
            np.multiply(ag, c_a[:, None], out=ag)
            np.multiply(ae, c_a[:, None], out=ae)
            psi_g += ag
            psi_e += ae

        psi_g += hg
        psi_e += he

        # Exact static rotation; preserves the post-increment norm.
        np.dot(psi_g, self._prop_g_t, out=self._rot)
        psi_g[:] = self._rot
        np.dot(psi_e, self._prop_e_t, out=self._rot)
        psi_e[:] = self._rot

        norms_sq = np.vecdot(psi_g, psi_g).real + np.vecdot(psi_e, psi_e).real
        norms = np.sqrt(norms_sq)
        psi_g /= norms[:, None]
        psi_e /= norms[:, None]
        return norms

    def observe(self, psi_g: np.ndarray, psi_e: np.ndarray) -> tuple[np.ndarray, ...]:
        """Per-trajectory (q, p, sigma_z, P_g, S_Q, leak) of normalized states."""
        pg = np.einsum("mn,mn->m", psi_g.conj(), psi_g).real
        pe = np.einsum("mn,mn->m", psi_e.conj(), psi_e).real
        qg = self.apply_position(psi_g)
        qe = self.apply_position(psi_e)
        q = (
            np.einsum("mn,mn->m", psi_g.conj(), qg)
            + np.einsum("mn,mn->m", psi_e.conj(), qe)
        ).real
        pg_mom = self.apply_momentum(psi_g)
        pe_mom = self.apply_momentum(psi_e)
        p = (
            np.einsum("mn,mn->m", psi_g.conj(), pg_mom)
            + np.einsum("mn,mn->m", psi_e.conj(), pe_mom)
        ).real
        coherence = np.einsum("mn,mn->m", psi_e.conj(), psi_g)
        det = pg * pe - (coherence.conj() * coherence).real
        disc = np.sqrt(np.clip(1.0 - 4.0 * det, 0.0, None))
        lam1 = np.clip(0.5 * (1.0 - disc), 0.0, 1.0)
        lam2 = np.clip(0.5 * (1.0 + disc), 0.0, 1.0)
        entropy = -(_xlogx(lam1) + _xlogx(lam2))
        leak = (
            np.einsum("mn,mn->m", psi_g[:, -5:].conj(), psi_g[:, -5:])
            + np.einsum("mn,mn->m", psi_e[:, -5:].conj(), psi_e[:, -5:])
        ).real
        return q, p, pe - pg, pg, entropy, leak


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    mask = x > 0.0
    out[mask] = x[mask] * np.log(x[mask])
    return out


def run_trajectory(
    psi0: StateVector, params: ModelParams, cfg: TrajectoryConfig
) -> TrajectoryRecord:
    """Integrate a single trajectory; deterministic in (psi0, params, cfg)."""
    records, failures = run_trajectory_batch(psi0, params, cfg, [cfg.traj_index])
    if failures:
        _, error = failures[0]
        raise error
    return records[0]


def run_trajectory_batch(
    psi0: StateVector,
    params: ModelParams,
    cfg: TrajectoryConfig,
    indices,
) -> tuple[list[TrajectoryRecord | None], list[tuple[int, Exception]]]:
    """Advance one trajectory per index, all from the same initial state.

    Returns (records, failures); a failed trajectory (truncation leak or
    norm collapse) contributes None to ``records`` and an entry naming the
    index to ``failures``, while the rest of the batch continues.  The
    record for index k is identical whether k runs alone or in a batch.
    """
    if psi0.signature != params.signature:
        raise SignatureError(
            f"trajectory: psi0 {psi0.signature} vs params {params.signature}"
        )
    psi0.require_normalized(tol=1e-8)
    indices = list(indices)
    m = len(indices)
    if m == 0:
        return [], []

    engine = _BatchEngine(params, m)
    engine.set_dt(cfg.dt)
    n = params.fock_dim
    n_steps = cfg.n_steps
    n_channels = 1 if params.gamma > 0.0 else 0

    base = psi0.vec.reshape(2, n)
    psi_g = np.tile(base[0], (m, 1))
    psi_e = np.tile(base[1], (m, 1))

    streams = [
        NoiseStream(cfg.seed, k, cfg.dt, n_channels) if n_channels else None
        for k in indices
    ]

    n_records = n_steps // cfg.record_stride + 1
    series = {
        name: np.zeros((n_records, m))
        for name in ("q", "p", "sz", "pg", "sq", "leak")
    }
    times = np.zeros(n_records)
    alive = np.ones(m, dtype=bool)
    failures: list[tuple[int, Exception]] = []

    def fail(row: int, error: Exception) -> None:
        alive[row] = False
        failures.append((indices[row], error))
        # Park the row on a harmless unit vector so batch math stays finite.
        psi_g[row] = 0.0
        psi_e[row] = 0.0
        psi_g[row, 0] = 1.0

    rec = 0
    noise_block: np.ndarray | None = None
    block_pos = 0
    for step in range(n_steps + 1):
        t = step * cfg.dt
        if step % cfg.record_stride == 0:
            q, p, sz, pg, sq, leak = engine.observe(psi_g, psi_e)
            times[rec] = t
            for name, vals in zip(("q", "p", "sz", "pg", "sq", "leak"),
                                  (q, p, sz, pg, sq, leak)):
                series[name][rec] = vals
            for row in np.nonzero(alive & (leak > cfg.leak_tol))[0]:
                fail(
                    int(row),
                    TruncationLeakError(
                        f"trajectory {indices[row]}: top-5 Fock population "
                        f"{leak[row]:.3e} at t={t:.6f} exceeds {cfg.leak_tol:.0e}; "
                        f"increase fock_dim"
                    ),
                )
            rec += 1
        if step == n_steps:
            break

        if n_channels:
            if noise_block is None or block_pos == noise_block.shape[1]:
                count = min(_NOISE_BLOCK, n_steps - step)
                noise_block = np.stack(
                    [s.draw(count)[:, 0] for s in streams], axis=0
                )
                block_pos = 0
            dxi = noise_block[:, block_pos]
            block_pos += 1
        else:
            dxi = None
        norms = engine.step(psi_g, psi_e, t, cfg.dt, dxi)
        for row in np.nonzero(alive & (norms < cfg.norm_floor))[0]:
            fail(
                int(row),
                NormCollapseError(
                    f"trajectory {indices[row]}: |psi + dpsi| = {norms[row]:.3e} "
                    f"at t={t:.6f}; reduce dt"
                ),
            )

    records: list[TrajectoryRecord | None] = []
    for row, index in enumerate(indices):
        if not alive[row]:
            records.append(None)
            continue
        final = None
        if cfg.store_final_state:
            final = StateVector(
                params.signature, np.concatenate([psi_g[row], psi_e[row]])
            )
        records.append(
            TrajectoryRecord(
                seed=cfg.seed,
                traj_index=index,
                dt=cfg.dt,
                record_stride=cfg.record_stride,
                times=times.copy(),
                q_mean=series["q"][:, row].copy(),
                p_mean=series["p"][:, row].copy(),
                sigma_z=series["sz"][:, row].copy(),
                p_ground=series["pg"][:, row].copy(),
                entropy_qubit=series["sq"][:, row].copy(),
                leak=series["leak"][:, row].copy(),
                final_state=final,
            )
        )
    return records, failures


def trajectory_config_for_index(cfg: TrajectoryConfig, traj_index: int) -> TrajectoryConfig:
    return replace(cfg, traj_index=traj_index)
