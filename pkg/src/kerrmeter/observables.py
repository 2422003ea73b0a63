"""Diagnostics: Wigner functions, entropies, strobe sections, outcome labels.

The Wigner function is evaluated in displaced-parity form,

    W(q, p) = (1/pi) Tr[ rho · D(alpha) Pi D†(alpha) ],   alpha = (q + i p)/sqrt(2),

which is analytically identical to the convolution-integral definition but
needs no quadrature.  Using D(alpha) Pi D†(alpha) = D(2 alpha) Pi, the
matrix element for |m><n| reduces to an associated-Laguerre expression
that this module evaluates with a two-term recurrence, vectorized over the
whole phase-space grid at O(N^2) per grid point.  The Gaussian envelope is
folded into the recurrence seed so nothing overflows even far from the
origin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import hilbert
from .errors import ConfigError, InvalidStateError, SignatureError
from .hilbert import DensityMatrix, StateVector

if TYPE_CHECKING:  # pragma: no cover
    from .qsd import TrajectoryRecord

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Phase-space grid and Wigner function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Rectangular (q, p) grid with inclusive endpoints."""

    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int
    n_p: int

    def __post_init__(self) -> None:
        if not (self.q_min < self.q_max and self.p_min < self.p_max):
            raise ConfigError("phase-space grid needs q_min < q_max and p_min < p_max")
        if self.n_q < 2 or self.n_p < 2:
            raise ConfigError("phase-space grid needs at least 2 points per axis")

    @property
    def q_axis(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.n_q)

    @property
    def p_axis(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def cell_area(self) -> float:
        dq = (self.q_max - self.q_min) / (self.n_q - 1)
        dp = (self.p_max - self.p_min) / (self.n_p - 1)
        return dq * dp


@dataclass(frozen=True)
class WignerField:
    """W(q, p) sampled on a grid; values[i, j] = W(q_axis[i], p_axis[j])."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def integral(self) -> float:
        """Riemann sum times cell area; ~1 when the grid encloses the state."""
        return float(np.sum(self.values) * self.grid.cell_area)

    def marginal_q(self) -> np.ndarray:
        """Position distribution sum_p W(q, p) dp."""
        dp = (self.grid.p_max - self.grid.p_min) / (self.grid.n_p - 1)
        return np.sum(self.values, axis=1) * dp


def wigner(rho_osc: DensityMatrix, grid: PhaseSpaceGrid) -> WignerField:
    """Wigner function of an oscillator-only density matrix.

    Composite states must be reduced with ``partial_trace_qubit`` first;
    passing one here is an error rather than an implicit trace, because
    which subsystem to discard is not this function's call.
    """
    if not rho_osc.signature.is_oscillator_only:
        raise SignatureError(
            f"wigner needs an oscillator-only density matrix, got {rho_osc.signature}"
        )
    n = rho_osc.signature.fock_dim
    rho = rho_osc.mat

    qs = grid.q_axis[:, None]
    ps = grid.p_axis[None, :]
    # c = 2*alpha at each grid point; x = |c|^2 is the Laguerre argument.
    c = np.sqrt(2.0) * (qs + 1j * ps)
    x = (c * c.conj()).real

    # col[m] holds G_{m, k} for the current column k, where
    #   G_{m, k} = sqrt(k!/m!) c^{m-k} L_k^{(m-k)}(x) * exp(-x/2)
    # seeded at G_{0,0} = exp(-x/2) and advanced by
    #   G_{m, k} = sqrt(m/k) G_{m-1, k-1} - (conj(c)/sqrt(k)) G_{m, k-1}.
    # The contribution of the elements rho[k, m] (m >= k) is
    #   (-1)^k * (rho_kk G_kk  +  2 Re(rho_km G_mk) for m > k) / pi.
    col = np.zeros((n,) + c.shape, dtype=np.complex128)
    col[0] = np.exp(-0.5 * x)
    for m in range(1, n):
        col[m] = col[m - 1] * (c / math.sqrt(m))

    w = rho[0, 0].real * col[0].real
    if n > 1:
        w = w + 2.0 * np.tensordot(rho[0, 1:], col[1:], axes=1).real

    c_conj = c.conj()
    for k in range(1, n):
        sqrt_k = math.sqrt(k)
        # Descending m keeps the still-needed previous-column values intact.
        for m in range(n - 1, k - 1, -1):
            col[m] = math.sqrt(m / k) * col[m - 1] - (c_conj / sqrt_k) * col[m]
        sign = -1.0 if k % 2 else 1.0
        w = w + sign * (rho[k, k].real * col[k].real)
        if k + 1 < n:
            w = w + (2.0 * sign) * np.tensordot(rho[k, k + 1 :], col[k + 1 :], axes=1).real

    return WignerField(grid, w / math.pi)


# ---------------------------------------------------------------------------
# Entropies
# ---------------------------------------------------------------------------


def entropy_of_eigenvalues(eigenvalues: np.ndarray, psd_tol: float = 1e-8) -> float:
    """-sum(lam ln lam) with the 0 ln 0 := 0 convention.

    Eigenvalues in [-psd_tol, 0) are roundoff and clamped to zero; anything
    more negative aborts, since it means the state itself is broken and an
    entropy computed from it would be fiction.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    low = float(lam.min()) if lam.size else 0.0
    if low < -psd_tol:
        raise InvalidStateError(
            f"eigenvalue {low:.3e} below -psd_tol ({psd_tol:.0e}); state is not PSD"
        )
    lam = np.clip(lam, 0.0, 1.0)
    positive = lam[lam > 0.0]
    return float(-np.sum(positive * np.log(positive)))


def von_neumann_entropy(rho: DensityMatrix, psd_tol: float = 1e-8) -> float:
    """Von Neumann entropy -Tr(rho ln rho) in nats."""
    eig = np.linalg.eigvalsh(0.5 * (rho.mat + rho.mat.conj().T))
    return entropy_of_eigenvalues(eig, psd_tol)


def index_of_correlation(
    rho: DensityMatrix, psd_tol: float = 1e-8
) -> tuple[float, float, float, float]:
    """(S_Q, S_O, S, I) for a composite state, with I = S_Q + S_O - S.

    I measures the total (classical plus quantum) correlation between
    qubit and oscillator; it settles at ln 2 once a projective measurement
    of the qubit has been faithfully recorded by the oscillator.
    """
    if not rho.signature.is_composite:
        raise SignatureError(
            f"index_of_correlation needs a composite state, got {rho.signature}"
        )
    s_q = von_neumann_entropy(hilbert.partial_trace_oscillator(rho), psd_tol)
    s_o = von_neumann_entropy(hilbert.partial_trace_qubit(rho), psd_tol)
    s = von_neumann_entropy(rho, psd_tol)
    return s_q, s_o, s, s_q + s_o - s


def qubit_populations(state) -> tuple[float, float, float]:
    """(rho_gg, rho_ee, |rho_ge|) of the reduced qubit matrix."""
    if isinstance(state, StateVector):
        rq = hilbert.qubit_density_from_state(state).mat
    elif isinstance(state, DensityMatrix):
        rq = hilbert.partial_trace_oscillator(state).mat
    else:
        raise TypeError("qubit_populations expects a StateVector or DensityMatrix")
    return float(rq[0, 0].real), float(rq[1, 1].real), float(abs(rq[0, 1]))


# ---------------------------------------------------------------------------
# Strobe sections and outcome classification
# ---------------------------------------------------------------------------


class Outcome(str, enum.Enum):
    G = "G"
    E = "E"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class RegionBox:
    """Axis-aligned phase-space box; the calibrated home of the periodic attractor."""

    q_min: float
    q_max: float
    p_min: float
    p_max: float

    def contains(self, q: float, p: float) -> bool:
        return self.q_min <= q <= self.q_max and self.p_min <= p <= self.p_max


@dataclass(frozen=True)
class PoincareSection:
    """(⟨q⟩, ⟨p⟩) strobed once per drive period at phase t/2pi = n + 1/4."""

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    labels: tuple[Outcome, ...]

    def __len__(self) -> int:
        return len(self.q)


def poincare_section(
    record: "TrajectoryRecord",
    p_g_high: float = 0.99,
    p_g_low: float = 0.01,
) -> PoincareSection:
    """Strobe a trajectory record at t/2pi = n + 1/4.

    The record's step grid must actually contain the strobe times: the
    number of steps per drive period must be divisible by 4 and the
    record stride must divide the strobe offset.  Misalignment is a
    configuration error, not something to interpolate over.
    """
    period_steps = 2.0 * math.pi / record.dt
    spp = round(period_steps)
    if abs(period_steps - spp) > 1e-9 * spp or spp % 4 != 0:
        raise ConfigError(
            "strobe times need dt = 2pi/k with k divisible by 4; "
            f"got dt={record.dt!r}"
        )
    quarter = spp // 4
    if quarter % record.record_stride != 0 or spp % record.record_stride != 0:
        raise ConfigError(
            f"record stride {record.record_stride} does not land on strobe steps "
            f"(steps/period {spp})"
        )
    recorded_steps = np.arange(len(record.times)) * record.record_stride
    mask = recorded_steps % spp == quarter
    idx = np.nonzero(mask)[0]
    labels = []
    for i in idx:
        pg = record.p_ground[i]
        if pg > p_g_high:
            labels.append(Outcome.G)
        elif pg < p_g_low:
            labels.append(Outcome.E)
        else:
            labels.append(Outcome.UNDECIDED)
    return PoincareSection(
        times=record.times[idx],
        q=record.q_mean[idx],
        p=record.p_mean[idx],
        labels=tuple(labels),
    )


def classify_outcome(
    record: "TrajectoryRecord",
    window: float = 0.25,
    p_g_high: float = 0.99,
    p_g_low: float = 0.01,
) -> Outcome:
    """Label a trajectory by its qubit population over the trailing window.

    ``window`` is in drive periods.  G requires P_g above ``p_g_high`` at
    every recorded time in the window, E requires it below ``p_g_low``
    throughout; anything else is UNDECIDED (a value, not an error — a
    switching trajectory legitimately flips labels over time).
    """
    t_end = record.times[-1]
    span = record.times[-1] - record.times[0]
    window_t = window * 2.0 * math.pi
    if span + 1e-12 < window_t:
        raise ConfigError(f"record spans {span:.3f} < requested window {window_t:.3f}")
    tail = record.p_ground[record.times >= t_end - window_t - 1e-12]
    if np.all(tail > p_g_high):
        return Outcome.G
    if np.all(tail < p_g_low):
        return Outcome.E
    return Outcome.UNDECIDED


def classify_outcome_from_section(
    section: PoincareSection,
    region: RegionBox,
    window: int = 4,
) -> Outcome:
    """Oscillator-only classifier: where do the last ``window`` strobes fall?

    G if every one of the trailing strobe points lies inside the region
    box, E if every one lies outside ("not in A"), else UNDECIDED.  This
    uses no qubit information at all; agreement with ``classify_outcome``
    is what certifies the oscillator as a faithful classical record.
    """
    if len(section) < window:
        return Outcome.UNDECIDED
    inside = [
        region.contains(q, p)
        for q, p in zip(section.q[-window:], section.p[-window:])
    ]
    if all(inside):
        return Outcome.G
    if not any(inside):
        return Outcome.E
    return Outcome.UNDECIDED


def switching_events(
    record: "TrajectoryRecord",
    p_g_high: float = 0.99,
    p_g_low: float = 0.01,
) -> list[tuple[float, Outcome, Outcome]]:
    """Times at which the qubit label flips between G and E.

    Each event is (t_flip, previous label, new label).  The qubit leaves
    one band, wanders through the undecided interior, and enters the
    other band; t_flip is the midpoint of that crossing interval, which
    is where the transit actually happens rather than where it is first
    confirmed.
    """
    events = []
    current: Outcome | None = None
    t_left: float | None = None
    for t, pg in zip(record.times, record.p_ground):
        if pg > p_g_high:
            label = Outcome.G
        elif pg < p_g_low:
            label = Outcome.E
        else:
            continue
        if current is not None and label != current:
            t_flip = 0.5 * (t_left + float(t)) if t_left is not None else float(t)
            events.append((t_flip, current, label))
        current = label
        t_left = float(t)
    return events
