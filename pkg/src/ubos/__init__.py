"""Unitary block optimization for variational quantum circuits."""

from .effective import (
    EVCounter,
    EffectiveHamiltonian,
    NoiseSpec,
    add_gaussian_noise,
    build_h_tilde,
    build_s_tilde,
    rank_of_T,
    reconstruct_from_energies,
    shot_estimate,
)
from .engine import (
    RunRecord,
    SGDConfig,
    SweepConfig,
    TimeEvoConfig,
    barren_plateau_experiment,
    energy_gradient,
    run_sgd,
    run_tubos,
    run_vqe,
    sgd_step,
    tubos_step,
    ubos_sweep,
)
from .estimators import SGDEstimator, TUBOSEstimator, UBOSEstimator
from .gates import (
    FAMILY_NAMES,
    BlockPart,
    block_family,
    block_subspace_basis,
    coefficient_gradients,
    family_basis,
    family_unitary,
    gate_family,
    pauli_coefficients,
)
from .local_opt import OptimizerConfig, generalized_lower_bound, maximize_overlap, minimize_gate
from .pauli import PauliString, PauliSumOperator, apply_operator, build_xxz, ground_state, pauli_product
from .simulator import Circuit, build_brick_circuit, derivative_state, fidelity, run_circuit, transition_element

__version__ = "0.1.0"

__all__ = [
    "EVCounter",
    "EffectiveHamiltonian",
    "NoiseSpec",
    "add_gaussian_noise",
    "build_h_tilde",
    "build_s_tilde",
    "rank_of_T",
    "reconstruct_from_energies",
    "shot_estimate",
    "RunRecord",
    "SGDConfig",
    "SweepConfig",
    "TimeEvoConfig",
    "barren_plateau_experiment",
    "energy_gradient",
    "run_sgd",
    "run_tubos",
    "run_vqe",
    "sgd_step",
    "tubos_step",
    "ubos_sweep",
    "FAMILY_NAMES",
    "BlockPart",
    "block_family",
    "block_subspace_basis",
    "coefficient_gradients",
    "family_basis",
    "family_unitary",
    "gate_family",
    "pauli_coefficients",
    "SGDEstimator",
    "TUBOSEstimator",
    "UBOSEstimator",
    "OptimizerConfig",
    "generalized_lower_bound",
    "maximize_overlap",
    "minimize_gate",
    "PauliString",
    "PauliSumOperator",
    "apply_operator",
    "build_xxz",
    "ground_state",
    "pauli_product",
    "Circuit",
    "build_brick_circuit",
    "derivative_state",
    "fidelity",
    "run_circuit",
    "transition_element",
]
