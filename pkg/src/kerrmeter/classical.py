"""Classical-limit oracle for the two qubit branches of the oscillator.

Pinning sigma_z to a branch s = ±1 and taking mean-field expectation
values of the full dissipative dynamics gives the classical equations
integrated here.  Two damping contributions combine: Hamilton's equations
applied to the (Gamma/2)(pq + qp) term give (+Gamma q, -Gamma p), while
the damping channel L = sqrt(2 Gamma) a drifts both quadratures by
(-Gamma q, -Gamma p).  The q-contributions cancel and the p-contributions
add, leaving velocity damping only:

    dq/dt = ((3 - s)/2) p
    dp/dt = -beta^2 q^3 + ((1 + s)/2) q - (g/beta) cos(t) - 2 Gamma p

On the excited branch (s = +1) this is the classic driven, damped Duffing
oscillator; on the ground branch (s = -1) a driven quartic well with a
doubled effective velocity.  In the scaled variables (beta q, beta p) the
flow is independent of beta, so the periodic-vs-chaotic distinction
between the branches holds at any action scale.

Because these equations are derived rather than copied from anywhere,
``ehrenfest_consistency`` closes the loop: it integrates the quantum
master equation with the qubit pinned on a branch and checks that the
numerical time derivatives of <q> and <p> match ``classical_rhs``
evaluated at (<q>, <p>).  The residual is dominated by beta^2(<q^3> -
<q>^3) ≈ (3/2) beta^2 <q> for a near-coherent state, so the gate passes
only while the state is narrow relative to its displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .hilbert import DensityMatrix, coherent_state, qubit_state, tensor
from .model import DRIVE_PERIOD, ModelParams
from .observables import Outcome, PoincareSection, RegionBox

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class ClassicalState:
    q: float
    p: float
    t: float = 0.0


@dataclass
class ClassicalRunResult:
    """Dense classical trajectory plus its strobe section."""

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    section: PoincareSection


def classical_rhs(
    state: ClassicalState, sigma_z_branch: int, params: ModelParams
) -> tuple[float, float]:
    """(dq/dt, dp/dt) on a pinned qubit branch (+1 excited, -1 ground)."""
    s = _check_branch(sigma_z_branch)
    dq = 0.5 * (3.0 - s) * state.p
    dp = (
        -params.beta**2 * state.q**3
        + 0.5 * (1.0 + s) * state.q
        - (params.g / params.beta) * math.cos(state.t)
        - 2.0 * params.gamma * state.p
    )
    return dq, dp


def branch_energy(state: ClassicalState, sigma_z_branch: int, params: ModelParams) -> float:
    """Conserved energy of the undriven, undamped branch flow (g = Gamma = 0)."""
    s = _check_branch(sigma_z_branch)
    kinetic = 0.25 * (3.0 - s) * state.p**2
    potential = 0.25 * params.beta**2 * state.q**4 - 0.25 * (1.0 + s) * state.q**2
    return kinetic + potential


def _check_branch(branch: int) -> float:
    if branch not in (-1, 1):
        raise ConfigError(f"sigma_z branch must be -1 or +1, got {branch}")
    return float(branch)


def integrate_classical(
    state0: ClassicalState,
    sigma_z_branch: int,
    params: ModelParams,
    dt: float = DRIVE_PERIOD / 2000.0,
    t_end: float = 100.0 * DRIVE_PERIOD,
    record_stride: int = 10,
) -> ClassicalRunResult:
    """Fixed-step RK4 integration with strobing at t/2pi = n + 1/4.

    The step must divide the drive period into a multiple of 4 so strobe
    times land exactly on the grid.  Leaving |q| or |p| beyond 1e6 aborts:
    the confining quartic makes that reachable only through numerical
    blow-up, never physics.
    """
    s = _check_branch(sigma_z_branch)
    spp = round(DRIVE_PERIOD / dt)
    if abs(spp * dt - DRIVE_PERIOD) > 1e-9 * spp or spp % 4 != 0:
        raise ConfigError(f"dt must equal 2pi/k with k divisible by 4, got {dt!r}")
    n_steps = round(t_end / dt)
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ConfigError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    if n_steps % record_stride != 0:
        raise ConfigError(f"record_stride={record_stride} must divide n_steps={n_steps}")

    beta_sq = params.beta**2
    drive = params.g / params.beta
    two_gamma = 2.0 * params.gamma
    vel = 0.5 * (3.0 - s)
    lin = 0.5 * (1.0 + s)

    def rhs(t: float, q: float, p: float) -> tuple[float, float]:
        return (
            vel * p,
            -beta_sq * q**3 + lin * q - drive * math.cos(t) - two_gamma * p,
        )

    q, p = state0.q, state0.p
    quarter = spp // 4
    times, qs, ps = [], [], []
    strobe_t, strobe_q, strobe_p = [], [], []
    for step in range(n_steps + 1):
        t = state0.t + step * dt
        if step % record_stride == 0:
            times.append(t)
            qs.append(q)
            ps.append(p)
        if step % spp == quarter:
            strobe_t.append(t)
            strobe_q.append(q)
            strobe_p.append(p)
        if not (abs(q) < DIVERGENCE_LIMIT and abs(p) < DIVERGENCE_LIMIT):
            raise DivergenceError(
                f"classical trajectory diverged at t={t:.6f}: q={q:.3e}, p={p:.3e}"
            )
        if step == n_steps:
            break
        k1q, k1p = rhs(t, q, p)
        k2q, k2p = rhs(t + 0.5 * dt, q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
        k3q, k3p = rhs(t + 0.5 * dt, q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
        k4q, k4p = rhs(t + dt, q + dt * k3q, p + dt * k3p)
        q += (dt / 6.0) * (k1q + 2.0 * (k2q + k3q) + k4q)
        p += (dt / 6.0) * (k1p + 2.0 * (k2p + k3p) + k4p)

    label = Outcome.E if sigma_z_branch == 1 else Outcome.G
    section = PoincareSection(
        times=np.array(strobe_t),
        q=np.array(strobe_q),
        p=np.array(strobe_p),
        labels=tuple(label for _ in strobe_t),
    )
    return ClassicalRunResult(
        times=np.array(times), q=np.array(qs), p=np.array(ps), section=section
    )


def calibrate_region_box(
    params: ModelParams,
    transient_periods: int = 10,
    total_periods: int = 60,
    pad_fraction: float = 0.2,
    pad_floor: float = 2.0,
    dt: float = DRIVE_PERIOD / 2000.0,
) -> RegionBox:
    """Bounding box of the ground-branch attractor's post-transient strobes.

    Starts from the scaled reference point q = 1/beta, p = 0, drops the
    transient, and pads the box by 20% of its span per side with an
    absolute floor: quantum strobe points scatter around the classical
    attractor with at least coherent-state width, so a degenerate
    (near-point) classical cluster must still yield a usable box.
    """
    start = ClassicalState(q=1.0 / params.beta, p=0.0, t=0.0)
    run = integrate_classical(
        start, -1, params, dt=dt, t_end=total_periods * DRIVE_PERIOD, record_stride=100
    )
    keep = run.section.times > transient_periods * DRIVE_PERIOD
    q, p = run.section.q[keep], run.section.p[keep]
    if q.size == 0:
        raise ConfigError("no strobe points after transient; extend total_periods")
    pad_q = max(pad_fraction * (q.max() - q.min()), pad_floor)
    pad_p = max(pad_fraction * (p.max() - p.min()), pad_floor)
    return RegionBox(
        q_min=float(q.min() - pad_q),
        q_max=float(q.max() + pad_q),
        p_min=float(p.min() - pad_p),
        p_max=float(p.max() + pad_p),
    )


def ehrenfest_consistency(
    params: ModelParams,
    sigma_z_branch: int,
    horizon: float,
    alpha: complex | None = None,
    dt: float = DRIVE_PERIOD / 4000.0,
    coherent_tail_tol: float = 1e-6,
) -> float:
    """Max relative deviation between quantum drift and ``classical_rhs``.

    Runs the master equation with epsilon forced to 0 and the qubit pinned
    on the branch (an exact symmetry, so it stays pinned), differentiates
    the recorded <q>, <p> series centrally, and compares against
    ``classical_rhs`` at the recorded (<q>, <p>).  Each component is
    normalized by the largest magnitude ``classical_rhs`` attains for it
    over the horizon, so the measure is scale-relative without dividing
    by near-zero crossings.  A horizon <= 0 returns 0 by convention.

    The deviation has an irreducible physical floor: the force on the
    packet mean involves <q^3> = <q>^3 + (3/2)<q> for a coherent state,
    while the classical force uses <q>^3 alone, so the gate is only tight
    in the correspondence regime (small beta at fixed beta*q).  The
    default displacement 1.2/beta keeps the width residual near the
    percent level at beta = 0.1 without demanding a huge truncation.
    """
    from .lindblad import MasterRunConfig, integrate_master

    _check_branch(sigma_z_branch)
    if horizon <= 0.0:
        return 0.0
    if alpha is None:
        alpha = 1.2 / (math.sqrt(2.0) * params.beta)
    pinned = ModelParams(
        beta=params.beta,
        g=params.g,
        gamma=params.gamma,
        epsilon=0.0,
        fock_dim=params.fock_dim,
    )
    amps = (1.0, 0.0) if sigma_z_branch == -1 else (0.0, 1.0)
    qubit = qubit_state(*amps)
    osc = coherent_state(alpha, params.fock_dim, tail_tol=coherent_tail_tol)
    rho0 = DensityMatrix.from_state(tensor(qubit, osc))

    n_steps = max(2, round(horizon / dt))
    # Large-amplitude gate states sit higher on the Fock ladder, where the
    # per-step integrator error perturbing the pure state's zero eigenvalues
    # is bigger; the positivity tolerance here reflects that, not physics.
    cfg = MasterRunConfig(
        t_end=n_steps * dt,
        dt=dt,
        record_stride=1,
        leak_tol=1e-3,
        psd_tol=1e-4,
    )
    out = integrate_master(rho0, pinned, cfg)

    # Central differences on the interior points of the recorded series.
    dq_num = (out.q_mean[2:] - out.q_mean[:-2]) / (2.0 * dt)
    dp_num = (out.p_mean[2:] - out.p_mean[:-2]) / (2.0 * dt)
    dq_cls = np.empty_like(dq_num)
    dp_cls = np.empty_like(dp_num)
    for i, (t, q, p) in enumerate(
        zip(out.times[1:-1], out.q_mean[1:-1], out.p_mean[1:-1])
    ):
        dq_cls[i], dp_cls[i] = classical_rhs(
            ClassicalState(q=q, p=p, t=t), sigma_z_branch, params
        )
    scale_q = float(np.max(np.abs(dq_cls)))
    scale_p = float(np.max(np.abs(dp_cls)))
    if scale_q == 0.0 or scale_p == 0.0:
        raise ConfigError("degenerate gate run: classical drift identically zero")
    dev_q = float(np.max(np.abs(dq_num - dq_cls))) / scale_q
    dev_p = float(np.max(np.abs(dp_num - dp_cls))) / scale_p
    return max(dev_q, dev_p)
