"""Variational ground states of the Ohmic spin-boson model.

Bath discretization, a multi-coherent-state trial wavefunction with exact
gradients, multi-start quasi-Newton minimization with annealing escapes,
the full observable suite (symmetry parameter, bath fluctuations and
correlations, entanglement entropy), a truncated-Fock exact
diagonalization oracle, and the analysis layer that locates the
localization transition and extracts its exponents.
"""

__version__ = "0.1.0"

from .analysis import (
    ConvergenceStudy,
    FitResult,
    RatioTable,
    SweepRecord,
    TransitionResult,
    convergence_study,
    detect_transition,
    find_peak_frequency,
    fit_exponential,
    fit_log_form,
    fit_power_law,
    ratio_function,
    sweep_alpha,
)
from .ansatz import (
    ModelParams,
    OverlapKernels,
    VariationalState,
    apply_parity,
    energy,
    energy_and_gradient,
    energy_gradient,
    load_state,
    norm,
    normalized,
    overlap_kernels,
    random_state,
    save_state,
)
from .bath import (
    BathDiscretization,
    MeshSpec,
    SpectralDensity,
    discretize_linear,
    discretize_log,
    spectral_density,
)
from .errors import (
    BasisSizeError,
    DegenerateStateError,
    DomainError,
    FitError,
    OptimizationFailure,
    ParameterError,
    SchemaError,
    SpinBosonError,
    TruncationError,
)
from .observables import (
    AverageDisplacements,
    BathObservables,
    SpinObservables,
    SymmetryCheck,
    average_displacements,
    bath_observables,
    check_symmetry,
    correlation_rows,
    correlations,
    mode_variances,
    mode_variances_all,
    parity_expectation,
    spin_observables,
    symmetry_parameter,
)
from .optimizer import (
    AnnealSchedule,
    GroundStateSolution,
    OptimizerOptions,
    anneal,
    minimize,
    multi_start,
)
from .oracle import (
    ExactGround,
    FockBasisSpec,
    ValidationReport,
    build_hamiltonian,
    evaluate_state,
    exact_ground,
    oracle_observables,
    validation_gate,
)
