"""kerrmeter: projective qubit measurement by a damped, driven Duffing meter.

A qubit is cross-Kerr coupled to a nonlinear oscillator operating in its
correspondence limit; the package integrates the Lindblad master equation
and its quantum-state-diffusion unravelling, and provides the diagnostics
(Wigner functions, entropies, strobe sections, Born statistics, Zeno
comparison) plus a classical oracle for the oscillator branches.
"""

from .classical import (
    ClassicalState,
    calibrate_region_box,
    classical_rhs,
    ehrenfest_consistency,
    integrate_classical,
)
from .ensemble import (
    BornReport,
    EnsembleConfig,
    EnsembleResult,
    ZenoResult,
    born_experiment,
    run_ensemble,
    zeno_experiment,
)
from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    InvalidStateError,
    InvariantViolation,
    KerrmeterError,
    NonHermitianError,
    NormCollapseError,
    SignatureError,
    TruncationLeakError,
)
from .hilbert import (
    DensityMatrix,
    OperatorMatrix,
    SpaceSignature,
    StateVector,
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
from .lindblad import MasterRunConfig, MasterRunOutput, integrate_master, lindblad_rhs
from .model import (
    DRIVE_PERIOD,
    HamiltonianParts,
    ModelParams,
    build_hamiltonian,
    effective_potential,
    hamiltonian_parts,
    initial_state,
    lindblad_operators,
    suggest_fock_dim,
)
from .observables import (
    Outcome,
    PhaseSpaceGrid,
    PoincareSection,
    RegionBox,
    WignerField,
    classify_outcome,
    classify_outcome_from_section,
    index_of_correlation,
    poincare_section,
    qubit_populations,
    switching_events,
    von_neumann_entropy,
    wigner,
)
from .qsd import (
    NoiseStream,
    TrajectoryConfig,
    TrajectoryRecord,
    qsd_step,
    run_trajectory,
    stable_dt_estimate,
)

__version__ = "0.1.0"
