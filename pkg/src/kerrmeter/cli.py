"""Command-line front end: named experiments with reproducible outputs.

Each subcommand reproduces one experiment family as CSV/JSON data files
(no plotting here; the CSVs are the product):

    potential    effective-potential curves for sigma_z = -1, 0, +1
    master       Lindblad integration: qubit matrix elements, entropies,
                 optional Wigner snapshots
    trajectory   a single quantum-state-diffusion trajectory
    ensemble     trajectory ensemble with a Born-rule report
    poincare     strobed sections: classical oracle branches plus quantum
                 trajectories, with the calibrated region box
    zeno         measured-vs-free qubit comparison
    replay       re-run any previous run from its manifest

Configuration is a JSON file layered over a named profile (``desk`` by
default; ``paper`` is the headline operating point and is long-running
by design).  Step sizes are given as integer steps per drive period so
strobe times land exactly on the grid.  Exit codes: 0 success, 2 config
error, 3 invariant breach, 4 truncation leak, 5 divergence or norm
collapse; aborts print a diagnostic JSON line to stderr.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classical import ClassicalState, calibrate_region_box, integrate_classical
from .ensemble import EnsembleConfig, born_experiment, run_ensemble, zeno_experiment
from .errors import (
    ConfigError,
    DivergenceError,
    InvariantViolation,
    KerrmeterError,
    NormCollapseError,
    TruncationLeakError,
)
from .hilbert import DensityMatrix
from .lindblad import MasterRunConfig, integrate_master
from .model import DRIVE_PERIOD, ModelParams, effective_potential, initial_state
from .observables import (
    PhaseSpaceGrid,
    classify_outcome,
    poincare_section,
    wigner,
)
from .qsd import TrajectoryConfig, run_trajectory, run_trajectory_batch
from .runio import RunManifest, float17, prepare_out_dir, write_csv, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_LEAK = 4
EXIT_DIVERGENCE = 5

PROFILES: dict[str, dict] = {
    # Desk scale: runs in seconds-to-minutes on one core; used by the
    # automated test suite.
    "desk": {
        "model": {"beta": 0.3, "g": 0.3, "gamma": 0.125, "epsilon": 0.0, "fock_dim": 60},
        "initial": {"c_g": 0.7071067811865476, "c_e": 0.7071067811865476, "alpha": 2.357022603955158},
        "master": {
            "steps_per_period": 2000,
            "t_end_periods": 1.0,
            "record_stride": 10,
            "trace_tol": 1e-6,
            "herm_tol": 1e-8,
            "psd_tol": 1e-6,
            "leak_tol": 1e-4,
            "snapshot_times_periods": [],
        },
        "qsd": {
            "steps_per_period": 40000,
            "t_end_periods": 1.0,
            "record_stride": 200,
            "leak_tol": 1e-3,
            "seed": 1,
            "traj_index": 0,
        },
        "ensemble": {
            "n_traj": 200,
            "master_seed": 1,
            "window_periods": 0.25,
            "z_threshold": 3.0,
            "compare_master": False,
            "spill_trajectories": False,
        },
        "wigner": {"q_min": -8.0, "q_max": 8.0, "p_min": -8.0, "p_max": 8.0, "n_q": 101, "n_p": 101},
        "potential": {"q_min": -15.0, "q_max": 15.0, "n_q": 601},
        "poincare": {
            "classical_periods": 200,
            "transient_periods": 10,
            "classical_steps_per_period": 2000,
            "n_traj": 4,
            "trajectory_periods": 3.0,
        },
        "zeno": {"t_end_periods": 0.5, "alpha": 2.357022603955158},
    },
    # Headline operating point; several hundred Fock levels and long
    # horizons.  Provided for completeness, deliberately not exercised
    # by the automated tests.
    "paper": {
        "model": {"beta": 0.1, "g": 0.3, "gamma": 0.125, "epsilon": 0.0, "fock_dim": 450},
        "initial": {"c_g": 0.7071067811865476, "c_e": 0.7071067811865476, "alpha": 6.8},
        "master": {
            "steps_per_period": 12000,
            "t_end_periods": 2.25,
            "record_stride": 60,
            "trace_tol": 1e-6,
            "herm_tol": 1e-8,
            "psd_tol": 1e-6,
            "leak_tol": 1e-4,
            "snapshot_times_periods": [0.1, 2.25],
        },
        "qsd": {
            "steps_per_period": 64000,
            "t_end_periods": 2.0,
            "record_stride": 320,
            "leak_tol": 1e-3,
            "seed": 1,
            "traj_index": 0,
        },
        "ensemble": {
            "n_traj": 500,
            "master_seed": 1,
            "window_periods": 0.25,
            "z_threshold": 3.0,
            "compare_master": False,
            "spill_trajectories": False,
        },
        "wigner": {"q_min": -25.0, "q_max": 25.0, "p_min": -25.0, "p_max": 25.0, "n_q": 201, "n_p": 201},
        "potential": {"q_min": -15.0, "q_max": 15.0, "n_q": 601},
        "poincare": {
            "classical_periods": 400,
            "transient_periods": 10,
            "classical_steps_per_period": 2000,
            "n_traj": 4,
            "trajectory_periods": 20.0,
        },
        "zeno": {"t_end_periods": 0.5, "alpha": 6.8},
    },
}

_SCHEMA_NUMERIC = {
    ("model", "beta"): float,
    ("model", "g"): float,
    ("model", "gamma"): float,
    ("model", "epsilon"): float,
    ("model", "fock_dim"): int,
    ("initial", "c_g"): complex,
    ("initial", "c_e"): complex,
    ("initial", "alpha"): complex,
    ("master", "steps_per_period"): int,
    ("master", "t_end_periods"): float,
    ("master", "record_stride"): int,
    ("master", "trace_tol"): float,
    ("master", "herm_tol"): float,
    ("master", "psd_tol"): float,
    ("master", "leak_tol"): float,
    ("qsd", "steps_per_period"): int,
    ("qsd", "t_end_periods"): float,
    ("qsd", "record_stride"): int,
    ("qsd", "leak_tol"): float,
    ("qsd", "seed"): int,
    ("qsd", "traj_index"): int,
    ("ensemble", "n_traj"): int,
    ("ensemble", "master_seed"): int,
    ("ensemble", "window_periods"): float,
    ("ensemble", "z_threshold"): float,
    ("ensemble", "compare_master"): bool,
    ("ensemble", "spill_trajectories"): bool,
    ("wigner", "q_min"): float,
    ("wigner", "q_max"): float,
    ("wigner", "p_min"): float,
    ("wigner", "p_max"): float,
    ("wigner", "n_q"): int,
    ("wigner", "n_p"): int,
    ("potential", "q_min"): float,
    ("potential", "q_max"): float,
    ("potential", "n_q"): int,
    ("poincare", "classical_periods"): int,
    ("poincare", "transient_periods"): int,
    ("poincare", "classical_steps_per_period"): int,
    ("poincare", "n_traj"): int,
    ("poincare", "trajectory_periods"): float,
    ("zeno", "t_end_periods"): float,
    ("zeno", "alpha"): complex,
}
_SCHEMA_LISTS = {("master", "snapshot_times_periods")}


def _coerce(path: tuple[str, str], value, kind):
    where = ".".join(path)
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{where} must be true/false, got {value!r}")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if kind is complex:
        # Complex values serialize as a number or a [re, im] pair.
        if isinstance(value, bool):
            raise ConfigError(f"{where} must be a number or [re, im], got {value!r}")
        if isinstance(value, (int, float)):
            return complex(value)
        if (
            isinstance(value, list)
            and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        ):
            return complex(value[0], value[1])
        raise ConfigError(f"{where} must be a number or [re, im], got {value!r}")
    raise AssertionError(kind)


def validate_config(config: dict) -> dict:
    """Check sections, keys and types; return a working copy.

    Unknown sections or keys are errors: a typo in a config must fail
    loudly rather than silently falling back to a default.
    """
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    known_sections = {p[0] for p in _SCHEMA_NUMERIC} | {p[0] for p in _SCHEMA_LISTS}
    out: dict = {}
    for section, body in config.items():
        if section not in known_sections:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        out[section] = {}
        for key, value in body.items():
            path = (section, key)
            if path in _SCHEMA_LISTS:
                if not isinstance(value, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
                ):
                    raise ConfigError(f"{section}.{key} must be a list of numbers")
                out[section][key] = [float(v) for v in value]
            elif path in _SCHEMA_NUMERIC:
                out[section][key] = value  # coerced on access
            else:
                raise ConfigError(f"unknown config key {section}.{key}")
    return out


def resolve_config(
    profile: str,
    config_path: str | None,
    seed: int | None,
) -> dict:
    """Layer profile defaults, the config file, and flag overrides."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    resolved = copy.deepcopy(PROFILES[profile])
    if config_path is not None:
        try:
            user = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}")
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}")
        user = validate_config(user)
        for section, body in user.items():
            resolved.setdefault(section, {}).update(body)
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be a nonnegative 64-bit integer")
        resolved["qsd"]["seed"] = seed
        resolved["ensemble"]["master_seed"] = seed
    validate_config(resolved)
    return resolved


def _get(config: dict, section: str, key: str):
    try:
        raw = config[section][key]
    except KeyError:
        raise ConfigError(f"missing config value {section}.{key}")
    if (section, key) in _SCHEMA_LISTS:
        return raw
    return _coerce((section, key), raw, _SCHEMA_NUMERIC[(section, key)])


def _model_params(config: dict) -> ModelParams:
    return ModelParams(
        beta=_get(config, "model", "beta"),
        g=_get(config, "model", "g"),
        gamma=_get(config, "model", "gamma"),
        epsilon=_get(config, "model", "epsilon"),
        fock_dim=_get(config, "model", "fock_dim"),
    )


def _initial_state(config: dict, params: ModelParams):
    c_g = _get(config, "initial", "c_g")
    c_e = _get(config, "initial", "c_e")
    alpha = _get(config, "initial", "alpha")
    return initial_state((c_g, c_e), alpha, params)


def _steps_per_period(config: dict, section: str, multiple_of_four: bool) -> float:
    k = _get(config, section, "steps_per_period")
    if k < 1:
        raise ConfigError(f"{section}.steps_per_period must be >= 1")
    if multiple_of_four and k % 4 != 0:
        raise ConfigError(
            f"{section}.steps_per_period must be divisible by 4 so strobe "
            f"times t/2pi = n + 1/4 land on the step grid"
        )
    return DRIVE_PERIOD / k


def _master_config(config: dict) -> MasterRunConfig:
    dt = _steps_per_period(config, "master", multiple_of_four=False)
    periods = _get(config, "master", "t_end_periods")
    snap = [t * DRIVE_PERIOD for t in _get(config, "master", "snapshot_times_periods")]
    return MasterRunConfig(
        t_end=periods * DRIVE_PERIOD,
        dt=dt,
        record_stride=_get(config, "master", "record_stride"),
        trace_tol=_get(config, "master", "trace_tol"),
        herm_tol=_get(config, "master", "herm_tol"),
        psd_tol=_get(config, "master", "psd_tol"),
        leak_tol=_get(config, "master", "leak_tol"),
        snapshot_times=tuple(snap),
    )


def _trajectory_config(config: dict, t_end_periods: float | None = None) -> TrajectoryConfig:
    dt = _steps_per_period(config, "qsd", multiple_of_four=True)
    periods = t_end_periods if t_end_periods is not None else _get(config, "qsd", "t_end_periods")
    return TrajectoryConfig(
        t_end=periods * DRIVE_PERIOD,
        dt=dt,
        record_stride=_get(config, "qsd", "record_stride"),
        seed=_get(config, "qsd", "seed"),
        traj_index=_get(config, "qsd", "traj_index"),
        leak_tol=_get(config, "qsd", "leak_tol"),
    )


def _manifest(command, config, seeds, workers, invariants, started) -> RunManifest:
    return RunManifest(
        command=command,
        resolved_config=config,
        seeds=seeds,
        workers=workers,
        invariants=invariants,
        wall_time_s=round(time.monotonic() - started, 3),
    ).finalize()


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_potential(config: dict, out_dir: Path, workers: int) -> None:
    started = time.monotonic()
    params = _model_params(config)
    q = np.linspace(
        _get(config, "potential", "q_min"),
        _get(config, "potential", "q_max"),
        _get(config, "potential", "n_q"),
    )
    cols = [
        q,
        effective_potential(q, -1.0, params),
        effective_potential(q, 0.0, params),
        effective_potential(q, 1.0, params),
    ]
    write_csv(out_dir / "potential.csv", ["q", "V_minus", "V_zero", "V_plus"], cols)
    _manifest("potential", config, {}, workers, {}, started).save(out_dir)


def cmd_master(config: dict, out_dir: Path, workers: int) -> None:
    started = time.monotonic()
    params = _model_params(config)
    psi0 = _initial_state(config, params)
    cfg = _master_config(config)
    out = integrate_master(DensityMatrix.from_state(psi0), params, cfg)

    t_over = out.times / DRIVE_PERIOD
    write_csv(
        out_dir / "series.csv",
        ["t_over_2pi", "rho_gg", "rho_ee", "abs_rho_ge", "S_Q", "S_O", "S", "I", "leak"],
        [t_over, out.rho_gg, out.rho_ee, out.rho_ge_abs, out.s_qubit, out.s_osc,
         out.s_total, out.corr_index, out.leak],
    )
    write_csv(
        out_dir / "expectations.csv",
        ["t_over_2pi", "q_mean", "p_mean", "sigma_z", "purity"],
        [t_over, out.q_mean, out.p_mean, out.sigma_z, out.purity],
    )
    grid = PhaseSpaceGrid(
        q_min=_get(config, "wigner", "q_min"),
        q_max=_get(config, "wigner", "q_max"),
        p_min=_get(config, "wigner", "p_min"),
        p_max=_get(config, "wigner", "p_max"),
        n_q=_get(config, "wigner", "n_q"),
        n_p=_get(config, "wigner", "n_p"),
    )
    from .hilbert import partial_trace_qubit

    for t_snap, rho in out.snapshots:
        field = wigner(partial_trace_qubit(rho), grid)
        label = format(t_snap / DRIVE_PERIOD, ".4f").replace(".", "p")
        qq = np.repeat(grid.q_axis, grid.n_p)
        pp = np.tile(grid.p_axis, grid.n_q)
        write_csv(
            out_dir / f"wigner_t{label}.csv",
            ["q", "p", "W"],
            [qq, pp, field.values.ravel()],
        )
    _manifest("master", config, {}, workers, out.invariants, started).save(out_dir)


def cmd_trajectory(config: dict, out_dir: Path, workers: int) -> None:
    started = time.monotonic()
    params = _model_params(config)
    psi0 = _initial_state(config, params)
    cfg = _trajectory_config(config)
    rec = run_trajectory(psi0, params, cfg)
    write_csv(
        out_dir / "trajectory.csv",
        ["t_over_2pi", "q_mean", "p_mean", "sigma_z", "p_ground", "entropy_qubit", "leak"],
        [rec.times / DRIVE_PERIOD, rec.q_mean, rec.p_mean, rec.sigma_z,
         rec.p_ground, rec.entropy_qubit, rec.leak],
    )
    _manifest(
        "trajectory", config,
        {"seed": rec.seed, "traj_index": rec.traj_index}, workers,
        {"leak_peak": float(rec.leak.max())}, started,
    ).save(out_dir)


def _ensemble_config(config: dict, workers: int) -> EnsembleConfig:
    dt = _steps_per_period(config, "qsd", multiple_of_four=True)
    return EnsembleConfig(
        master_seed=_get(config, "ensemble", "master_seed"),
        n_traj=_get(config, "ensemble", "n_traj"),
        t_end=_get(config, "qsd", "t_end_periods") * DRIVE_PERIOD,
        dt=dt,
        record_stride=_get(config, "qsd", "record_stride"),
        leak_tol=_get(config, "qsd", "leak_tol"),
        workers=workers,
        compare_master=_get(config, "ensemble", "compare_master"),
        master_dt=_steps_per_period(config, "master", multiple_of_four=False),
    )


def cmd_ensemble(config: dict, out_dir: Path, workers: int) -> None:
    started = time.monotonic()
    params = _model_params(config)
    cfg = _ensemble_config(config, workers)
    c_g = _get(config, "initial", "c_g")
    c_e = _get(config, "initial", "c_e")
    alpha = _get(config, "initial", "alpha")
    report, result = born_experiment(
        c_g, c_e, alpha, params, cfg,
        window=_get(config, "ensemble", "window_periods"),
        z_threshold=_get(config, "ensemble", "z_threshold"),
    )
    write_json(out_dir / "born_report.json", {
        "n_traj": report.n_traj,
        "counts": report.counts,
        "expected_p_g": report.expected_p_g,
        "fraction_g": report.fraction_g,
        "std_error": report.std_error,
        "z_score": report.z_score,
        "z_threshold": report.z_threshold,
        "passed": report.passed,
        "valid": report.valid,
        "invalid_reason": report.invalid_reason,
        "failures": result.failures,
    })
    m = result.means
    write_csv(
        out_dir / "mean_series.csv",
        ["t_over_2pi", "q_mean", "q_se", "p_mean", "p_se", "sigma_z", "sigma_z_se",
         "p_ground", "p_ground_se", "entropy_qubit", "entropy_qubit_se"],
        [m.times / DRIVE_PERIOD, m.q_mean, m.q_se, m.p_mean, m.p_se, m.sigma_z,
         m.sigma_z_se, m.p_ground, m.p_ground_se, m.entropy_qubit, m.entropy_qubit_se],
    )
    if _get(config, "ensemble", "spill_trajectories"):
        for rec in result.records:
            write_csv(
                out_dir / f"traj_{rec.traj_index:05d}.csv",
                ["t_over_2pi", "q_mean", "p_mean", "sigma_z", "p_ground",
                 "entropy_qubit", "leak"],
                [rec.times / DRIVE_PERIOD, rec.q_mean, rec.p_mean, rec.sigma_z,
                 rec.p_ground, rec.entropy_qubit, rec.leak],
            )
    _manifest(
        "ensemble", config,
        {"master_seed": cfg.master_seed}, workers,
        {"n_failures": len(result.failures)}, started,
    ).save(out_dir)


def cmd_poincare(config: dict, out_dir: Path, workers: int) -> None:
    started = time.monotonic()
    params = _model_params(config)
    dt_classical = DRIVE_PERIOD / _get(config, "poincare", "classical_steps_per_period")
    periods = _get(config, "poincare", "classical_periods")
    transient = _get(config, "poincare", "transient_periods")

    for branch, name in ((-1, "classical_minus"), (1, "classical_plus")):
        run = integrate_classical(
            ClassicalState(q=1.0 / params.beta, p=0.0, t=0.0),
            branch, params, dt=dt_classical, t_end=periods * DRIVE_PERIOD,
            record_stride=_get(config, "poincare", "classical_steps_per_period"),
        )
        sec = run.section
        write_csv(
            out_dir / f"{name}.csv",
            ["strobe_index", "t_over_2pi", "q", "p", "label"],
            [np.arange(len(sec)), sec.times / DRIVE_PERIOD, sec.q, sec.p,
             [lab.value for lab in sec.labels]],
        )
    box = calibrate_region_box(params, transient_periods=transient, dt=dt_classical)
    write_json(out_dir / "region_box.json", {
        "q_min": box.q_min, "q_max": box.q_max,
        "p_min": box.p_min, "p_max": box.p_max,
    })

    psi0 = _initial_state(config, params)
    cfg = _trajectory_config(config, t_end_periods=_get(config, "poincare", "trajectory_periods"))
    n_traj = _get(config, "poincare", "n_traj")
    recs, failures = run_trajectory_batch(psi0, params, cfg, range(n_traj))
    rows: list[list] = [[], [], [], [], [], []]
    for rec in recs:
        if rec is None:
            continue
        sec = poincare_section(rec)
        outcome = classify_outcome(rec)
        for i in range(len(sec)):
            rows[0].append(float(rec.traj_index))
            rows[1].append(sec.times[i] / DRIVE_PERIOD)
            rows[2].append(sec.q[i])
            rows[3].append(sec.p[i])
            rows[4].append(sec.labels[i].value)
            rows[5].append(outcome.value)
    write_csv(
        out_dir / "quantum.csv",
        ["traj_index", "t_over_2pi", "q", "p", "point_label", "trajectory_outcome"],
        rows,
    )
    _manifest(
        "poincare", config,
        {"seed": cfg.seed}, workers,
        {"n_failures": len(failures)}, started,
    ).save(out_dir)


def cmd_zeno(config: dict, out_dir: Path, workers: int) -> None:
    started = time.monotonic()
    params = _model_params(config)
    cfg = MasterRunConfig(
        t_end=_get(config, "zeno", "t_end_periods") * DRIVE_PERIOD,
        dt=_steps_per_period(config, "master", multiple_of_four=False),
        record_stride=_get(config, "master", "record_stride"),
        trace_tol=_get(config, "master", "trace_tol"),
        herm_tol=_get(config, "master", "herm_tol"),
        psd_tol=_get(config, "master", "psd_tol"),
        leak_tol=_get(config, "master", "leak_tol"),
    )
    result = zeno_experiment(params, _get(config, "zeno", "alpha"), cfg)
    write_csv(
        out_dir / "zeno.csv",
        ["t", "t_over_2pi", "sigma_z_coupled", "sigma_z_free"],
        [result.times, result.times / DRIVE_PERIOD,
         result.sigma_z_coupled, result.sigma_z_free],
    )
    _manifest("zeno", config, {}, workers, result.master.invariants, started).save(out_dir)


_HANDLERS = {
    "potential": cmd_potential,
    "master": cmd_master,
    "trajectory": cmd_trajectory,
    "ensemble": cmd_ensemble,
    "poincare": cmd_poincare,
    "zeno": cmd_zeno,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrmeter",
        description="Qubit measurement by a damped, driven Duffing oscillator: "
                    "simulation experiments with reproducible CSV/JSON outputs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=str, default=None, help="JSON config overlay")
        p.add_argument("--out-dir", type=str, required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="override trajectory/ensemble seeds")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    rp = sub.add_parser("replay", help="re-run a previous run from its manifest")
    rp.add_argument("--manifest", type=str, required=True)
    rp.add_argument("--out-dir", type=str, required=True)
    rp.add_argument("--workers", type=int, default=None,
                    help="defaults to the worker count recorded in the manifest")
    return parser


def _fail(code: int, error: Exception) -> int:
    diagnostic = {"error": type(error).__name__, "message": str(error)}
    if isinstance(error, InvariantViolation):
        diagnostic.update(
            time=error.time, invariant=error.invariant, magnitude=error.magnitude
        )
    print(json.dumps(diagnostic), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            manifest = RunManifest.load(Path(args.manifest))
            if manifest.command not in _HANDLERS:
                raise ConfigError(f"manifest command {manifest.command!r} is not replayable")
            workers = args.workers if args.workers is not None else manifest.workers
            out_dir = prepare_out_dir(Path(args.out_dir))
            _HANDLERS[manifest.command](manifest.resolved_config, out_dir, workers)
            return EXIT_OK
        config = resolve_config(args.profile, args.config, args.seed)
        out_dir = prepare_out_dir(Path(args.out_dir))
        _HANDLERS[args.command](config, out_dir, args.workers)
        return EXIT_OK
    except ConfigError as err:
        return _fail(EXIT_CONFIG, err)
    except InvariantViolation as err:
        return _fail(EXIT_INVARIANT, err)
    except TruncationLeakError as err:
        return _fail(EXIT_LEAK, err)
    except (DivergenceError, NormCollapseError) as err:
        return _fail(EXIT_DIVERGENCE, err)
    except KerrmeterError as err:
        return _fail(EXIT_CONFIG, err)


if __name__ == "__main__":
    sys.exit(main())
