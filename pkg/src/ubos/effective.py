"""Effective Hamiltonians of single gate slots, measurement noise and
expectation-value accounting.

For slot ``j`` with basis ``R^a`` the derivative states are
``|psi^a> = U_after R^a U_before |0>`` and the circuit energy as a function
of that gate's expansion ``t`` is ``t^dag H~ t`` with
``H~[a, b] = <psi^a| H |psi^b>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .gates import GateFamily, OperatorBasis, pauli_coefficients
from .pauli import PauliString, PauliSumOperator, pauli_product
from .simulator import Circuit, apply_gate, reduced_operator, run_from, zero_state

NOISE_MODES = ("exact", "gaussian", "shots")


@dataclass(frozen=True)
class NoiseSpec:
    """How measured matrix elements deviate from their exact values.

    ``gaussian`` adds N(0, sigma) to every independent real component of
    ``H~``; ``shots`` replaces each (element, Hamiltonian term, re/im)
    component by a ``shots``-sample ancilla estimate.
    """

    mode: str = "exact"
    sigma: float = 0.0
    shots: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise ValueError(f"noise mode must be one of {NOISE_MODES}, got {self.mode!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact" or (self.mode == "gaussian" and self.sigma == 0)

    def rng(self, *key: int) -> np.random.Generator:
        """Generator keyed by ``(seed, *key)`` so draws do not depend on call order."""
        return np.random.default_rng([self.seed, *[int(k) for k in key]])

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "NoiseSpec":
        """``exact``, ``gaussian:<sigma>`` or ``shots:<s>``."""
        text = text.strip().lower()
        if text == "exact":
            return cls("exact", seed=seed)
        mode, _, value = text.partition(":")
        if mode == "gaussian" and value:
            return cls("gaussian", sigma=float(value), seed=seed)
        if mode == "shots" and value:
            return cls("shots", shots=int(value), seed=seed)
        raise ValueError(f"cannot parse noise spec {text!r}")

    def __str__(self) -> str:
        if self.mode == "gaussian":
            return f"gaussian:{self.sigma:g}"
        if self.mode == "shots":
            return f"shots:{self.shots}"
        return "exact"


@dataclass
class EVCounter:
    """Running count of measured expectation values.

    Each ``record`` call is one epoch measuring ``n_h_meas`` quantities for
    each of ``n_operators`` Hamiltonian terms.
    """

    n_epochs: int = 0
    n_h_meas: int = 0
    n_operators: int = 0
    total: int = 0
    history: list[int] = field(default_factory=list, repr=False)

    def record(self, n_h_meas: int, n_operators: int, epochs: int = 1) -> None:
        self.n_epochs += epochs
        self.n_h_meas = n_h_meas
        self.n_operators = n_operators
        self.total += epochs * n_h_meas * n_operators
        self.history.append(self.total)

    def add(self, n: int) -> None:
        """Count extra expectation values outside the epoch bookkeeping."""
        self.total += n
        self.history.append(self.total)


@dataclass(eq=False)
class EffectiveHamiltonian:
    matrix: np.ndarray
    basis: OperatorBasis
    slot: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def to_text(self) -> str:
        return matrix_to_text(self.matrix)


def matrix_to_text(m: np.ndarray) -> str:
    """Row-major dump, one row per line, entries ``re,im`` separated by spaces."""
    return "\n".join(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) for row in np.asarray(m)) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    rows = []
    for line in text.strip().splitlines():
        rows.append([complex(*map(float, entry.split(","))) for entry in line.split()])
    return np.array(rows, dtype=complex)


def _hermitian_from_upper(m: np.ndarray) -> np.ndarray:
    upper = np.triu(m, 1)
    out = upper + upper.conj().T
    out[np.diag_indices_from(out)] = np.real(np.diag(m))
    return out


def derivative_batch(circuit: Circuit, unitaries, j: int, left: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """``(k, 2**n)`` derivative states given the state ``left`` entering slot ``j``."""
    qubits = circuit.slots[j].qubits
    batch = np.stack([apply_gate(left, r, qubits) for r in basis.elements])
    return run_from(batch, circuit, unitaries, j + 1, circuit.n_slots)


def _check_slot(circuit: Circuit, j: int, basis: OperatorBasis) -> None:
    if not 0 <= j < circuit.n_slots:
        raise IndexError(f"slot {j} out of range for {circuit.n_slots} slots")
    width = 2 ** len(circuit.slots[j].qubits)
    if basis.dim != width:
        raise ValueError(f"basis acts on dimension {basis.dim}, slot {j} needs {width}")


def h_tilde_from_states(states: np.ndarray, op: PauliSumOperator) -> np.ndarray:
    """Exact ``H~[a, b] = <psi^a| H |psi^b>``."""
    if states.shape[-1] != 2**op.n_qubits:
        raise ValueError("derivative states and Hamiltonian act on different dimensions")
    return _hermitian_from_upper(states.conj() @ op.apply(states).T)


def h_tilde_term_components(states: np.ndarray, op: PauliSumOperator) -> np.ndarray:
    """``(n_terms, k, k)`` transition elements of each unit-weight Pauli term."""
    return np.array([states.conj() @ op.apply_term(i, states).T for i in range(op.n_terms)])


def build_h_tilde(
    circuit: Circuit,
    params,
    j: int,
    op: PauliSumOperator,
    basis: OperatorBasis | None = None,
    noise: NoiseSpec | None = None,
    counter: EVCounter | None = None,
    *,
    key: Sequence[int] = (),
    unitaries=None,
    left: np.ndarray | None = None,
) -> EffectiveHamiltonian:
    """Measure the effective Hamiltonian of slot ``j``.

    ``key`` extends the noise seed (the engine passes the update index) so
    that reruns reproduce the same noise draws.  ``unitaries`` and ``left``
    let callers reuse work they already did.
    """
    basis = basis or circuit.slots[j].family.basis
    _check_slot(circuit, j, basis)
    noise = noise or NoiseSpec()
    if op.n_qubits != circuit.n_qubits:
        raise ValueError(f"Hamiltonian acts on {op.n_qubits} qubits, circuit on {circuit.n_qubits}")
    if unitaries is None:
        unitaries = circuit.unitaries(params)
    if left is None:
        left = run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, j)
    h, _ = measure_slot(circuit, unitaries, j, left, op, noise, key, basis)
    if counter is not None:
        counter.record(basis.n_unique_elements, op.n_terms)
    return h


def measure_slot(circuit, unitaries, j, left, op, noise, key=(), basis=None):
    """``(EffectiveHamiltonian, exact derivative states)`` of slot ``j``."""
    basis = basis or circuit.slots[j].family.basis
    states = derivative_batch(circuit, unitaries, j, left, basis)
    if noise.mode == "shots":
        comps = h_tilde_term_components(states, op)
        matrix = shot_noisy_h_tilde(comps, op.coefficients, noise.shots, noise.rng(j, *key))
    else:
        matrix = h_tilde_from_states(states, op)
        if noise.mode == "gaussian" and noise.sigma > 0:
            matrix = add_gaussian_noise(matrix, noise.sigma, noise.rng(j, *key))
    return EffectiveHamiltonian(matrix, basis, j), states


def build_s_tilde(
    circuit: Circuit,
    params,
    j: int,
    basis: OperatorBasis | None = None,
    counter: EVCounter | None = None,
    *,
    unitaries=None,
    left: np.ndarray | None = None,
) -> np.ndarray:
    """Overlap matrix ``S~[a, b] = <psi^a|psi^b>``.

    Later gates cancel, so only the state entering the slot matters: ``S~``
    follows from the ``4**m`` Pauli expectation values on the slot's qubits.
    """
    basis = basis or circuit.slots[j].family.basis
    _check_slot(circuit, j, basis)
    if unitaries is None:
        unitaries = circuit.unitaries(params)
    if left is None:
        left = run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, j)
    qubits = circuit.slots[j].qubits
    m = len(qubits)
    rho = reduced_operator(left, left, qubits)
    paulis = {}
    for label in _pauli_labels(m):
        paulis[label] = complex(np.sum(PauliString(label).to_matrix() * rho))
    if counter is not None:
        counter.add(len(paulis))

    if all(lab.startswith("P") for lab in basis.labels) and len(basis.labels[0]) == m + 1:
        strings = [PauliString("".join("IXYZ"[int(c)] for c in lab[1:])) for lab in basis.labels]
        k = len(strings)
        s = np.empty((k, k), dtype=complex)
        for a in range(k):
            for b in range(k):
                phase, prod = pauli_product(strings[a], strings[b])
                s[a, b] = phase * paulis[prod.ops]
        return _hermitian_from_upper(s)

    # general basis: expand R_a^dag R_b in Paulis and reuse the same expectation values
    k = basis.size
    s = np.empty((k, k), dtype=complex)
    dim = 2**m
    for a in range(k):
        for b in range(k):
            prod = basis.elements[a].conj().T @ basis.elements[b]
            s[a, b] = sum(
                np.trace(PauliString(lab).to_matrix() @ prod) / dim * val for lab, val in paulis.items()
            )
    return _hermitian_from_upper(s)


@lru_cache(maxsize=None)
def _pauli_labels(m: int) -> tuple[str, ...]:
    import itertools

    return tuple("".join(p) for p in itertools.product("IXYZ", repeat=m))


def add_gaussian_noise(h, sigma: float, rng: np.random.Generator):
    """Add N(0, sigma) to each diagonal entry and to the real and imaginary
    parts of each upper-triangle entry; the lower triangle mirrors it."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    m = np.asarray(getattr(h, "matrix", h), dtype=complex)
    k = m.shape[0]
    noise = np.zeros((k, k), dtype=complex)
    iu = np.triu_indices(k, 1)
    noise[np.diag_indices(k)] = rng.normal(0.0, sigma, k) if sigma > 0 else 0.0
    if sigma > 0:
        noise[iu] = rng.normal(0.0, sigma, len(iu[0])) + 1j * rng.normal(0.0, sigma, len(iu[0]))
    noise = noise + np.triu(noise, 1).conj().T
    out = _hermitian_from_upper(m) + noise
    if isinstance(h, EffectiveHamiltonian):
        return EffectiveHamiltonian(out, h.basis, h.slot)
    return out


def shot_estimate(true_value, s: int, rng: np.random.Generator):
    """Estimate ``v`` from ``s`` ancilla readouts with P(0) = (1 + v) / 2.

    Accepts scalars or arrays; the estimator is unbiased with variance
    ``(1 - v**2) / s``.
    """
    v = np.asarray(true_value, dtype=float)
    if s < 1:
        raise ValueError("shots must be >= 1")
    if np.any(np.abs(v) > 1 + 1e-9):
        raise ValueError("ancilla expectation values must lie in [-1, 1]")
    p = np.clip((1 + v) / 2, 0.0, 1.0)
    est = 2.0 * rng.binomial(s, p) / s - 1.0
    return float(est) if np.ndim(est) == 0 else est


def shot_noisy_h_tilde(comps: np.ndarray, coefficients: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Recombine per-term components after sampling each re/im part with ``shots`` readouts."""
    n_terms, k, _ = comps.shape
    iu = np.triu_indices(k)
    upper = comps[:, iu[0], iu[1]]
    re = shot_estimate(upper.real, shots, rng)
    im = shot_estimate(upper.imag, shots, rng)
    diag = iu[0] == iu[1]
    im[:, diag] = 0.0
    vals = coefficients @ (re + 1j * im)
    out = np.zeros((k, k), dtype=complex)
    out[iu] = vals
    return _hermitian_from_upper(out)


# --- energy functional from energies alone ----------------------------------


def _quadratic_features(t: np.ndarray) -> np.ndarray:
    """Feature row ``f`` with ``t^dag H t = f . x`` for
    ``x = [H_aa, Re H_ab (a<b), Im H_ab (a<b)]``."""
    k = t.shape[-1]
    iu = np.triu_indices(k, 1)
    w = np.conj(t[..., iu[0]]) * t[..., iu[1]]
    return np.concatenate([np.abs(t) ** 2, 2 * w.real, -2 * w.imag], axis=-1)


def _features_to_matrix(x: np.ndarray, k: int) -> np.ndarray:
    iu = np.triu_indices(k, 1)
    n_off = len(iu[0])
    m = np.zeros((k, k), dtype=complex)
    m[np.diag_indices(k)] = x[:k]
    m[iu] = x[k : k + n_off] + 1j * x[k + n_off :]
    return m + np.triu(m, 1).conj().T


def _t_products(family: GateFamily, points: np.ndarray) -> np.ndarray:
    t = np.array([pauli_coefficients(family, p) for p in points])
    k = t.shape[1]
    iu = np.triu_indices(k, 1)
    w = t[:, iu[0]] * np.conj(t[:, iu[1]])
    return np.concatenate([np.abs(t) ** 2, w.real, w.imag], axis=1)


def rank_of_T(family: GateFamily, n_probe_points: int | None = None, rng: np.random.Generator | None = None) -> int:
    """Number of linearly independent functions among ``Re/Im[t_a conj(t_b)]``.

    Evaluated at random parameter points; singular values above ``1e-8`` of
    the largest count.
    """
    k = family.basis.size
    n_funcs = k * k
    if n_probe_points is None:
        n_probe_points = 3 * n_funcs
    if n_probe_points < 2 * n_funcs:
        raise ValueError(f"need at least {2 * n_funcs} probe points, got {n_probe_points}")
    rng = rng or np.random.default_rng(0)
    points = rng.uniform(0, 2 * np.pi, (n_probe_points, family.param_count))
    sv = np.linalg.svd(_t_products(family, points), compute_uv=False)
    return int(np.sum(sv > 1e-8 * sv[0]))


@lru_cache(maxsize=None)
def _cached_rank(family: GateFamily) -> int:
    return rank_of_T(family)


@dataclass(eq=False)
class EnergyFunctional:
    """Energy of one gate as a function of its parameters, ``t^dag H t``."""

    matrix: np.ndarray
    family: GateFamily
    rank: int
    residual_rms: float

    def __call__(self, params) -> float:
        t = pauli_coefficients(self.family, params)
        return float(np.real(np.vdot(t, self.matrix @ t)))

    def predict(self, points) -> np.ndarray:
        return np.array([self(p) for p in np.atleast_2d(points)])


def reconstruct_from_energies(family: GateFamily, samples: Sequence[tuple[Sequence[float], float]]) -> EnergyFunctional:
    """Least-squares ``H~`` from ``(params, energy)`` pairs.

    When the samples cannot pin down every entry the minimum-norm solution is
    returned; it still reproduces the energy everywhere on the manifold.
    """
    if not samples:
        raise ValueError("no samples")
    points = np.array([np.asarray(p, dtype=float) for p, _ in samples])
    energies = np.array([float(e) for _, e in samples])
    k = family.basis.size
    t = np.array([pauli_coefficients(family, p) for p in points])
    design = _quadratic_features(t)
    needed = _cached_rank(family)
    sv = np.linalg.svd(design, compute_uv=False)
    got = int(np.sum(sv > 1e-8 * sv[0]))
    if got < needed:
        raise ValueError(f"samples give {got} independent equations, {needed} are needed")
    x, *_ = np.linalg.lstsq(design, energies, rcond=1e-10)
    resid = design @ x - energies
    return EnergyFunctional(_features_to_matrix(x, k), family, got, float(np.sqrt(np.mean(resid**2))))
