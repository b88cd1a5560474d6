"""Multitype Lambda-coalescents: rates, exact simulation and analysis."""
from .analysis import (
    CdiReport, ProcessingSpeeds, Verdict, big_psi, classify_cdi, descent_profile,
    flow_profile, omega, phi_flow, psi, psi_tilde,
)
from .arrays import (
    ArrayIndexSet, RateArray, array_from_representation, check_recursion_array,
    recover_representation,
)
from .measures import (
    SCHEMA_VERSION, ConfigError, CsbpParams, FiniteMeasureOnCube, MergerMeasureSet,
    build_measure_set, check_integrability, csbp_local_rates, kill_measure,
    load_measure_set, project_measure, single_type_compose, single_type_decompose,
)
from .rates import TransitionTable, merger_rate, recursion_residual, transition_table
from .simulator import (
    RngSpec, Trajectory, TypedPartition, ensemble, project_partition, simulate_jump_chain,
    simulate_labelled, simulate_projected_with_killing,
)

__version__ = "0.1.0"

__all__ = [
    "CdiReport",
    "ProcessingSpeeds",
    "Verdict",
    "big_psi",
    "classify_cdi",
    "descent_profile",
    "flow_profile",
    "omega",
    "phi_flow",
    "psi",
    "psi_tilde",
    "ArrayIndexSet",
    "RateArray",
    "array_from_representation",
    "check_recursion_array",
    "recover_representation",
    "SCHEMA_VERSION",
    "ConfigError",
    "CsbpParams",
    "FiniteMeasureOnCube",
    "MergerMeasureSet",
    "build_measure_set",
    "check_integrability",
    "csbp_local_rates",
    "kill_measure",
    "load_measure_set",
    "project_measure",
    "single_type_compose",
    "single_type_decompose",
    "TransitionTable",
    "merger_rate",
    "recursion_residual",
    "transition_table",
    "RngSpec",
    "Trajectory",
    "TypedPartition",
    "ensemble",
    "project_partition",
    "simulate_jump_chain",
    "simulate_labelled",
    "simulate_projected_with_killing",
    "__version__",
]
