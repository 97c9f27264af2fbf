"""Estimator-style wrappers around the optimization engine.

``fit`` takes the Hamiltonian in place of ``X``. Fitted attributes end in an
underscore, hyperparameters are constructor arguments, so ``get_params`` /
``set_params`` / ``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .effective import NoiseSpec
from .engine import SGDConfig, SweepConfig, TimeEvoConfig, run_sgd, run_tubos, run_vqe
from .gates import FAMILY_NAMES, gate_family
from .local_opt import OptimizerConfig
from .pauli import PauliString, PauliSumOperator
from .simulator import build_brick_circuit, check_params, run_circuit


def check_hamiltonian(hamiltonian) -> PauliSumOperator:
    """Accept an operator, its text form, or an iterable of ``(coef, string)``."""
    if isinstance(hamiltonian, PauliSumOperator):
        return hamiltonian
    if isinstance(hamiltonian, str):
        return PauliSumOperator.from_text(hamiltonian)
    try:
        terms = [(float(c), s if isinstance(s, PauliString) else PauliString(str(s))) for c, s in hamiltonian]
    except (TypeError, ValueError) as exc:
        raise TypeError(f"cannot interpret {type(hamiltonian).__name__} as a Pauli sum") from exc
    return PauliSumOperator(terms)


def check_noise(noise, seed: int = 0) -> NoiseSpec:
    if isinstance(noise, NoiseSpec):
        return noise
    return NoiseSpec.parse(str(noise), seed=seed)


def _check_layers(n_layers):
    if not isinstance(n_layers, (int, np.integer)) or n_layers < 1:
        raise ValueError(f"n_layers must be a positive integer, got {n_layers!r}")


def _check_family(family):
    if family not in FAMILY_NAMES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILY_NAMES}")


class _CircuitEstimator(BaseEstimator):
    def _setup(self, hamiltonian, init_params):
        op = check_hamiltonian(hamiltonian)
        _check_layers(self.n_layers)
        _check_family(self.family)
        circuit = build_brick_circuit(op.n_qubits, self.n_layers, gate_family(self.family))
        if init_params is None:
            init_params = circuit.random_params(np.random.default_rng(self.random_state))
        check_params(circuit, init_params)
        init_params = [np.asarray(x, dtype=float) for x in init_params]
        return op, circuit, init_params

    def _finish(self, circuit, record):
        self.circuit_ = circuit
        self.record_ = record
        self.params_ = record.params
        self.energy_ = record.final_energy
        self.n_evs_ = int(record.evs[-1])
        return self

    def state(self) -> np.ndarray:
        check_is_fitted(self, "params_")
        return run_circuit(self.circuit_, self.params_)

    def score(self, hamiltonian) -> float:
        """Negative energy of the fitted state (higher is better)."""
        check_is_fitted(self, "params_")
        return -check_hamiltonian(hamiltonian).expectation(self.state())


class UBOSEstimator(_CircuitEstimator):
    """Brick-circuit VQE optimized by UBOS sweeps."""

    def __init__(
        self,
        n_layers=3,
        family="generic",
        max_sweeps=50,
        energy_tolerance=1e-8,
        shuffle_order=True,
        noise="exact",
        method="nelder_mead",
        restarts=4,
        max_evals=4000,
        record_fidelity=False,
        random_state=0,
    ):
        self.n_layers = n_layers
        self.family = family
        self.max_sweeps = max_sweeps
        self.energy_tolerance = energy_tolerance
        self.shuffle_order = shuffle_order
        self.noise = noise
        self.method = method
        self.restarts = restarts
        self.max_evals = max_evals
        self.record_fidelity = record_fidelity
        self.random_state = random_state

    def fit(self, hamiltonian, init_params=None):
        op, circuit, init = self._setup(hamiltonian, init_params)
        cfg = SweepConfig(
            max_sweeps=self.max_sweeps,
            energy_tolerance=self.energy_tolerance,
            shuffle_order=self.shuffle_order,
            noise=check_noise(self.noise, self.random_state),
            optimizer=OptimizerConfig(
                method=self.method, restarts=self.restarts, max_evals=self.max_evals, seed=self.random_state
            ),
            record_fidelity=self.record_fidelity,
            seed=self.random_state,
        )
        return self._finish(circuit, run_vqe(circuit, init, op, cfg))


class SGDEstimator(_CircuitEstimator):
    """Brick-circuit VQE optimized by full-batch gradient descent."""

    def __init__(
        self,
        n_layers=3,
        family="generic",
        max_steps=5000,
        learning_rate=0.05,
        energy_tolerance=0.0,
        noise="exact",
        record_fidelity=False,
        random_state=0,
    ):
        self.n_layers = n_layers
        self.family = family
        self.max_steps = max_steps
        self.learning_rate = learning_rate
        self.energy_tolerance = energy_tolerance
        self.noise = noise
        self.record_fidelity = record_fidelity
        self.random_state = random_state

    def fit(self, hamiltonian, init_params=None):
        op, circuit, init = self._setup(hamiltonian, init_params)
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        cfg = SGDConfig(
            max_steps=self.max_steps,
            learning_rate=self.learning_rate,
            energy_tolerance=self.energy_tolerance,
            noise=check_noise(self.noise, self.random_state),
            record_fidelity=self.record_fidelity,
        )
        return self._finish(circuit, run_sgd(circuit, init, op, cfg))


class TUBOSEstimator(_CircuitEstimator):
    """Imaginary-time evolution of a brick circuit (``method='tubos'`` or ``'tsgd'``)."""

    def __init__(
        self,
        n_layers=3,
        family="generic",
        beta_over_n=0.1,
        n_steps=20,
        r=10,
        noise="exact",
        method="tubos",
        learning_rate=0.05,
        random_state=0,
    ):
        self.n_layers = n_layers
        self.family = family
        self.beta_over_n = beta_over_n
        self.n_steps = n_steps
        self.r = r
        self.noise = noise
        self.method = method
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, hamiltonian, init_params=None):
        op, circuit, init = self._setup(hamiltonian, init_params)
        cfg = TimeEvoConfig(
            beta_over_n=self.beta_over_n,
            n_steps=self.n_steps,
            r=self.r,
            noise=check_noise(self.noise, self.random_state),
            optimizer=OptimizerConfig(restarts=1, seed=self.random_state),
            seed=self.random_state,
            learning_rate=self.learning_rate,
        )
        return self._finish(circuit, run_tubos(circuit, init, op, cfg, method=self.method))
