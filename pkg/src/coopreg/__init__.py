"""Deterministic simulation toolkit for discrete-time leader-follower
coordination and cooperative output regulation over switching networks."""

__version__ = "0.1.0"

from .observers import (
    DecayFit,
    ErrorState,
    LeaderModel,
    ObserverBank,
    adaptive_observer_step,
    distributed_observer_step,
    error_form_step,
    fit_decay,
    kron_factorization_check,
    observer_step,
    perturbed_convergence_check,
    spectral_radius,
)
from .regulation import (
    ControllerGains,
    GainSynthesisError,
    PlantModel,
    RegulatorSolution,
    RegulatorUnsolvableError,
    build_controller,
    control_input,
    plant_step,
    solve_regulator_equations,
    synthesize_stabilizing_gain,
)
from .simkit import (
    AssumptionChecks,
    CheckResult,
    ConvergenceReport,
    FollowerSpec,
    GainDirective,
    OverflowAbort,
    Scenario,
    Thresholds,
    TrajectoryLog,
    analyze,
    run,
    validate_scenario,
)
from .topology import (
    ConnectivityResult,
    DimensionError,
    NormalizedAdjacency,
    SwitchingSignal,
    SwitchingTopology,
    WeightedDigraph,
    consensus_step,
    find_connectivity_window,
    is_jointly_connected,
    normalize_adjacency,
    transition_product,
    union_digraph,
)

__all__ = [
    "__version__",
    "AssumptionChecks",
    "CheckResult",
    "ConnectivityResult",
    "ControllerGains",
    "ConvergenceReport",
    "DecayFit",
    "DimensionError",
    "ErrorState",
    "FollowerSpec",
    "GainDirective",
    "GainSynthesisError",
    "LeaderModel",
    "NormalizedAdjacency",
    "ObserverBank",
    "OverflowAbort",
    "PlantModel",
    "RegulatorSolution",
    "RegulatorUnsolvableError",
    "Scenario",
    "SwitchingSignal",
    "SwitchingTopology",
    "Thresholds",
    "TrajectoryLog",
    "WeightedDigraph",
    "adaptive_observer_step",
    "analyze",
    "build_controller",
    "consensus_step",
    "control_input",
    "distributed_observer_step",
    "error_form_step",
    "find_connectivity_window",
    "fit_decay",
    "is_jointly_connected",
    "kron_factorization_check",
    "normalize_adjacency",
    "observer_step",
    "perturbed_convergence_check",
    "plant_step",
    "run",
    "solve_regulator_equations",
    "spectral_radius",
    "synthesize_stabilizing_gain",
    "transition_product",
    "union_digraph",
    "validate_scenario",
]
