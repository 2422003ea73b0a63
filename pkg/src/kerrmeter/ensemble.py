"""Trajectory ensembles: aggregation, Born statistics, Zeno comparison.

Trajectory k of an ensemble draws its noise from the stream keyed by
(master_seed, k), so the ensemble is reproducible member-by-member and
splitting it across worker processes changes nothing about any individual
trajectory.  Aggregation always happens in index order after all
trajectories finish, which makes the ensemble means a deterministic
function of the configuration for a fixed worker count.

A small number of per-trajectory failures (truncation leak, norm
collapse) is tolerated and logged rather than voiding a long run; beyond
1% of the ensemble the run aborts, since that error rate signals a broken
configuration rather than bad luck.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import multiprocessing
import numpy as np

from .errors import ConfigError, KerrmeterError
from .hilbert import DensityMatrix, StateVector, coherent_state, qubit_state, tensor
from .lindblad import MasterRunConfig, MasterRunOutput, integrate_master
from .model import DRIVE_PERIOD, ModelParams
from .observables import Outcome, classify_outcome
from .qsd import TrajectoryConfig, TrajectoryRecord, run_trajectory_batch


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble size, seeding, stepping and aggregation options."""

    master_seed: int
    n_traj: int
    t_end: float
    dt: float = DRIVE_PERIOD / 16000.0
    record_stride: int = 80
    leak_tol: float = 1e-4
    workers: int = 1
    compare_master: bool = False
    master_dt: float = DRIVE_PERIOD / 2000.0
    max_failure_fraction: float = 0.01

    def __post_init__(self) -> None:
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not 0.0 <= self.max_failure_fraction < 1.0:
            raise ConfigError("max_failure_fraction must be in [0, 1)")

    def trajectory_config(self, traj_index: int = 0) -> TrajectoryConfig:
        return TrajectoryConfig(
            t_end=self.t_end,
            dt=self.dt,
            record_stride=self.record_stride,
            seed=self.master_seed,
            traj_index=traj_index,
            leak_tol=self.leak_tol,
        )


@dataclass
class EnsembleMeans:
    """Ensemble-mean observable series with standard errors of the mean."""

    times: np.ndarray
    n_traj: int
    q_mean: np.ndarray
    q_se: np.ndarray
    p_mean: np.ndarray
    p_se: np.ndarray
    sigma_z: np.ndarray
    sigma_z_se: np.ndarray
    p_ground: np.ndarray
    p_ground_se: np.ndarray
    entropy_qubit: np.ndarray
    entropy_qubit_se: np.ndarray


@dataclass
class EnsembleResult:
    records: list[TrajectoryRecord]
    means: EnsembleMeans
    failures: list[tuple[int, str]] = field(default_factory=list)
    master: MasterRunOutput | None = None


def _batch_worker(payload) -> tuple:
    psi0, params, cfg, indices = payload
    records, failures = run_trajectory_batch(psi0, params, cfg, indices)
    return records, [(k, repr(err)) for k, err in failures]


def run_ensemble(
    psi0: StateVector, params: ModelParams, cfg: EnsembleConfig
) -> EnsembleResult:
    """Run n_traj trajectories and aggregate their observables.

    With ``compare_master`` set, the Lindblad integration of the same
    initial state rides along in the result for direct unravelling
    checks.  Deterministic for fixed cfg and worker count.
    """
    indices = list(range(cfg.n_traj))
    base = cfg.trajectory_config()

    if cfg.workers == 1:
        records, raw_failures = run_trajectory_batch(psi0, params, base, indices)
        failures = [(k, repr(err)) for k, err in raw_failures]
    else:
        chunks = _split_chunks(indices, cfg.workers)
        records_by_index: dict[int, TrajectoryRecord | None] = {}
        failures = []
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx) as pool:
            payloads = [(psi0, params, base, chunk) for chunk in chunks]
            for chunk, (recs, fails) in zip(chunks, pool.map(_batch_worker, payloads)):
                for k, rec in zip(chunk, recs):
                    records_by_index[k] = rec
                failures.extend(fails)
        records = [records_by_index[k] for k in indices]

    failures.sort(key=lambda item: item[0])
    if len(failures) > cfg.max_failure_fraction * cfg.n_traj:
        raise KerrmeterError(
            f"{len(failures)} of {cfg.n_traj} trajectories failed "
            f"(limit {cfg.max_failure_fraction:.0%}); first: {failures[0][1]}"
        )
    kept = [r for r in records if r is not None]

    means = _aggregate(kept)
    master = None
    if cfg.compare_master:
        rho0 = DensityMatrix.from_state(psi0)
        master_cfg = MasterRunConfig(
            t_end=cfg.t_end,
            dt=cfg.master_dt,
            record_stride=_matching_stride(cfg),
            leak_tol=cfg.leak_tol,
        )
        master = integrate_master(rho0, params, master_cfg)
    return EnsembleResult(records=kept, means=means, failures=failures, master=master)


def _split_chunks(indices: list[int], workers: int) -> list[list[int]]:
    size = math.ceil(len(indices) / workers)
    return [indices[i : i + size] for i in range(0, len(indices), size)]


def _matching_stride(cfg: EnsembleConfig) -> int:
    """Master stride whose recorded times coincide with the ensemble's."""
    interval = cfg.dt * cfg.record_stride
    stride = round(interval / cfg.master_dt)
    if stride < 1 or abs(stride * cfg.master_dt - interval) > 1e-9:
        raise ConfigError(
            "ensemble recording interval is not a multiple of master_dt; "
            "align dt * record_stride with master_dt"
        )
    return stride


def _aggregate(records: list[TrajectoryRecord]) -> EnsembleMeans:
    if not records:
        raise KerrmeterError("no surviving trajectories to aggregate")
    m = len(records)
    fields = ("q_mean", "p_mean", "sigma_z", "p_ground", "entropy_qubit")
    stacked = {f: np.stack([getattr(r, f) for r in records]) for f in fields}
    out = {}
    for f in fields:
        data = stacked[f]
        out[f"{f}_mean"] = data.mean(axis=0)
        if m > 1:
            out[f"{f}_se"] = data.std(axis=0, ddof=1) / math.sqrt(m)
        else:
            out[f"{f}_se"] = np.zeros(data.shape[1])
    return EnsembleMeans(
        times=records[0].times.copy(),
        n_traj=m,
        q_mean=out["q_mean_mean"],
        q_se=out["q_mean_se"],
        p_mean=out["p_mean_mean"],
        p_se=out["p_mean_se"],
        sigma_z=out["sigma_z_mean"],
        sigma_z_se=out["sigma_z_se"],
        p_ground=out["p_ground_mean"],
        p_ground_se=out["p_ground_se"],
        entropy_qubit=out["entropy_qubit_mean"],
        entropy_qubit_se=out["entropy_qubit_se"],
    )


@dataclass
class BornReport:
    """Outcome statistics of a projection ensemble versus the Born rule.

    ``fraction_g`` counts decided trajectories only; the z-test uses the
    expected probability |c_g|^2 in the binomial standard error.  The
    report is flagged invalid when more than 10% of trajectories remain
    undecided, which for a compatible (epsilon = 0) measurement means the
    horizon was too short.
    """

    n_traj: int
    counts: dict[str, int]
    expected_p_g: float
    fraction_g: float
    std_error: float
    z_score: float
    z_threshold: float
    passed: bool
    valid: bool
    invalid_reason: str | None = None


def born_experiment(
    c_g: complex,
    c_e: complex,
    alpha: complex,
    params: ModelParams,
    cfg: EnsembleConfig,
    window: float = 0.25,
    z_threshold: float = 3.0,
) -> tuple[BornReport, EnsembleResult]:
    """Classify every trajectory at t_end and test the outcome fractions.

    The expected ground fraction is |c_g|^2 of the initial superposition;
    projection must emerge from the dynamics (no collapse is applied by
    hand anywhere in the package).
    """
    psi0 = tensor(
        qubit_state(c_g, c_e), coherent_state(alpha, params.fock_dim)
    )
    result = run_ensemble(psi0, params, cfg)
    outcomes = [classify_outcome(r, window=window) for r in result.records]
    counts = {
        "G": sum(1 for o in outcomes if o is Outcome.G),
        "E": sum(1 for o in outcomes if o is Outcome.E),
        "UNDECIDED": sum(1 for o in outcomes if o is Outcome.UNDECIDED),
    }
    decided = counts["G"] + counts["E"]
    expected = abs(c_g) ** 2
    valid = True
    reason = None
    undecided_fraction = counts["UNDECIDED"] / max(1, cfg.n_traj)
    if params.epsilon == 0.0 and undecided_fraction > 0.10:
        valid = False
        reason = (
            f"{undecided_fraction:.1%} of trajectories undecided; "
            "projection incomplete, extend t_end"
        )
    if decided == 0:
        return (
            BornReport(
                n_traj=cfg.n_traj,
                counts=counts,
                expected_p_g=expected,
                fraction_g=math.nan,
                std_error=math.nan,
                z_score=math.nan,
                z_threshold=z_threshold,
                passed=False,
                valid=False,
                invalid_reason="no decided trajectories",
            ),
            result,
        )
    fraction = counts["G"] / decided
    variance = expected * (1.0 - expected)
    std_error = math.sqrt(variance / decided) if variance > 0.0 else 0.0
    if std_error > 0.0:
        z = (fraction - expected) / std_error
    else:
        z = 0.0 if fraction == expected else math.inf
    report = BornReport(
        n_traj=cfg.n_traj,
        counts=counts,
        expected_p_g=expected,
        fraction_g=fraction,
        std_error=std_error,
        z_score=z,
        z_threshold=z_threshold,
        passed=valid and abs(z) <= z_threshold,
        valid=valid,
        invalid_reason=reason,
    )
    return report, result


@dataclass
class ZenoResult:
    """<sigma_z>(t) of the measured qubit next to its free-evolution twin."""

    times: np.ndarray
    sigma_z_coupled: np.ndarray
    sigma_z_free: np.ndarray
    master: MasterRunOutput


def free_qubit_sigma_z(times: np.ndarray, epsilon: float) -> np.ndarray:
    """Closed form for a lone qubit from |g> under H = epsilon sigma_x.

    Rabi rotation at frequency 2 epsilon: <sigma_z>(t) = -cos(2 epsilon t).
    """
    return -np.cos(2.0 * epsilon * np.asarray(times))


def zeno_experiment(
    params: ModelParams,
    alpha: complex,
    cfg: MasterRunConfig,
) -> ZenoResult:
    """Measured-vs-free comparison of coherent qubit evolution from |g>.

    The coupled half integrates the full master equation for
    |g> ⊗ |alpha>; the free half is the closed-form Rabi oscillation with
    the same sigma_x coefficient.  Strong measurement shows up as the
    coupled <sigma_z> hugging -1 while the free curve swings to +1.
    """
    if params.epsilon == 0.0:
        raise ConfigError("zeno_experiment needs epsilon != 0 (no free evolution otherwise)")
    psi0 = tensor(qubit_state(1.0, 0.0), coherent_state(alpha, params.fock_dim))
    master = integrate_master(DensityMatrix.from_state(psi0), params, cfg)
    return ZenoResult(
        times=master.times.copy(),
        sigma_z_coupled=master.sigma_z.copy(),
        sigma_z_free=free_qubit_sigma_z(master.times, params.epsilon),
        master=master,
    )


def zeno_trajectory(
    params: ModelParams,
    alpha: complex,
    cfg: TrajectoryConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-trajectory variant of the Zeno comparison (exploratory)."""
    if params.epsilon == 0.0:
        raise ConfigError("zeno_trajectory needs epsilon != 0")
    psi0 = tensor(qubit_state(1.0, 0.0), coherent_state(alpha, params.fock_dim))
    from .qsd import run_trajectory

    record = run_trajectory(psi0, params, cfg)
    return (
        record.times.copy(),
        record.sigma_z.copy(),
        free_qubit_sigma_z(record.times, params.epsilon),
    )
