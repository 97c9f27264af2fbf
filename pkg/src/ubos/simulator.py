"""Dense statevector simulation of gate circuits.

States are plain complex numpy arrays of length ``2**n`` (or ``(B, 2**n)``
batches); qubit 0 is the most significant index bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gates import GateFamily
from .pauli import PauliSumOperator


@dataclass(frozen=True)
class GateSlot:
    index: int
    qubits: tuple[int, ...]
    family: GateFamily


@dataclass(frozen=True)
class Circuit:
    """Ordered gate slots acting on ``n_qubits`` starting from ``|0...0>``."""

    n_qubits: int
    slots: tuple[GateSlot, ...]
    layers: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        for j, slot in enumerate(self.slots):
            if slot.index != j:
                raise ValueError(f"slot {j} carries index {slot.index}")
            if len(slot.qubits) != slot.family.n_qubits:
                raise ValueError(
                    f"slot {j}: family {slot.family.name} acts on {slot.family.n_qubits} qubits, "
                    f"got {slot.qubits}"
                )
            if len(set(slot.qubits)) != len(slot.qubits):
                raise ValueError(f"slot {j}: repeated qubit in {slot.qubits}")
            if any(not 0 <= q < self.n_qubits for q in slot.qubits):
                raise ValueError(f"slot {j}: qubits {slot.qubits} out of range")

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @classmethod
    def from_gates(cls, n_qubits: int, gates: Sequence[tuple[Sequence[int], GateFamily]]) -> "Circuit":
        slots = tuple(GateSlot(j, tuple(q), fam) for j, (q, fam) in enumerate(gates))
        return cls(n_qubits, slots)

    def random_params(self, rng: np.random.Generator) -> list[np.ndarray]:
        return [s.family.random_params(rng) for s in self.slots]

    def identity_params(self) -> list[np.ndarray]:
        return [s.family.identity_params() for s in self.slots]

    def unitaries(self, params) -> list[np.ndarray]:
        check_params(self, params)
        return [s.family.unitary(p) for s, p in zip(self.slots, params)]


def brick_pairs(n_qubits: int, layers: int) -> list[tuple[int, int]]:
    pairs = []
    for layer in range(layers):
        start = layer % 2
        pairs.extend((q, q + 1) for q in range(start, n_qubits - 1, 2))
    return pairs


def build_brick_circuit(n_qubits: int, layers: int, family: GateFamily) -> Circuit:
    """Nearest-neighbour brick pattern: even layers on ``(0,1), (2,3), ...``,
    odd layers on ``(1,2), (3,4), ...``; no wraparound."""
    if n_qubits < 2:
        raise ValueError("a brick circuit needs at least 2 qubits")
    if layers < 1:
        raise ValueError("a brick circuit needs at least 1 layer")
    if family.n_qubits != 2:
        raise ValueError(f"brick circuits take two-qubit families, {family.name} acts on {family.n_qubits}")
    slots = tuple(GateSlot(j, pair, family) for j, pair in enumerate(brick_pairs(n_qubits, layers)))
    return Circuit(n_qubits, slots, layers)


def check_params(circuit: Circuit, params) -> None:
    if len(params) != circuit.n_slots:
        raise ValueError(f"expected {circuit.n_slots} parameter vectors, got {len(params)}")
    for slot, p in zip(circuit.slots, params):
        if np.shape(p) != (slot.family.param_count,):
            raise ValueError(
                f"slot {slot.index}: {slot.family.name} takes {slot.family.param_count} parameters, "
                f"got shape {np.shape(p)}"
            )


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def _n_qubits_of(psi: np.ndarray) -> int:
    dim = psi.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def apply_gate(psi: np.ndarray, matrix: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a ``2**k x 2**k`` matrix to ``qubits`` of a state or batch of states.

    The matrix need not be unitary.
    """
    psi = np.asarray(psi, dtype=complex)
    n = _n_qubits_of(psi)
    k = len(qubits)
    if any(not 0 <= q < n for q in qubits) or len(set(qubits)) != k:
        raise ValueError(f"invalid qubits {tuple(qubits)} for {n} qubits")
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (2**k, 2**k):
        raise ValueError(f"matrix shape {matrix.shape} does not act on {k} qubits")
    t = psi.reshape((-1,) + (2,) * n)
    axes = [q + 1 for q in qubits]
    out = np.tensordot(matrix.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(psi.shape)


def apply_two_qubit(psi: np.ndarray, matrix: np.ndarray, qubits: tuple[int, int]) -> np.ndarray:
    if len(qubits) != 2:
        raise ValueError("apply_two_qubit needs exactly two qubits")
    return apply_gate(psi, matrix, qubits)


def reduced_operator(bra: np.ndarray, ket: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """``M[x, y] = sum_r conj(bra[x, r]) ket[y, r]`` with ``x, y`` indexing ``qubits``.

    Then ``<bra| (O on qubits) |ket> = sum_xy O[x, y] M[x, y]``.
    """
    n = _n_qubits_of(ket)
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    order = list(qubits) + rest
    b = np.transpose(np.asarray(bra).reshape((2,) * n), order).reshape(2**k, -1)
    c = np.transpose(np.asarray(ket).reshape((2,) * n), order).reshape(2**k, -1)
    return b.conj() @ c.T


def run_from(psi: np.ndarray, circuit: Circuit, unitaries: Sequence[np.ndarray], start: int, stop: int) -> np.ndarray:
    for j in range(start, stop):
        psi = apply_gate(psi, unitaries[j], circuit.slots[j].qubits)
    return psi


def run_circuit(circuit: Circuit, params) -> np.ndarray:
    """``U_{K-1} ... U_1 U_0 |0...0>``."""
    unitaries = circuit.unitaries(params)
    return run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, circuit.n_slots)


def forward_states(circuit: Circuit, unitaries: Sequence[np.ndarray]) -> list[np.ndarray]:
    """States before each slot; entry ``K`` is the output state."""
    states = [zero_state(circuit.n_qubits)]
    for j, slot in enumerate(circuit.slots):
        states.append(apply_gate(states[-1], unitaries[j], slot.qubits))
    return states


def derivative_state(circuit: Circuit, params, j: int, basis_op: np.ndarray) -> np.ndarray:
    """Circuit output with slot ``j``'s unitary replaced by ``basis_op`` (not normalized)."""
    if not 0 <= j < circuit.n_slots:
        raise IndexError(f"slot {j} out of range for {circuit.n_slots} slots")
    unitaries = circuit.unitaries(params)
    unitaries[j] = np.asarray(basis_op, dtype=complex)
    return run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, circuit.n_slots)


def derivative_states(circuit: Circuit, params, j: int, basis_elements: np.ndarray) -> np.ndarray:
    """All derivative states of slot ``j`` at once, shape ``(k, 2**n)``."""
    if not 0 <= j < circuit.n_slots:
        raise IndexError(f"slot {j} out of range for {circuit.n_slots} slots")
    unitaries = circuit.unitaries(params)
    left = run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, j)
    return _derivative_batch(circuit, unitaries, j, left, basis_elements)


def _derivative_batch(circuit, unitaries, j, left, basis_elements):
    qubits = circuit.slots[j].qubits
    batch = np.stack([apply_gate(left, r, qubits) for r in basis_elements])
    return run_from(batch, circuit, unitaries, j + 1, circuit.n_slots)


def transition_element(phi: np.ndarray, op: PauliSumOperator, psi: np.ndarray) -> complex:
    """``<phi| H |psi>``."""
    phi, psi = np.asarray(phi), np.asarray(psi)
    if phi.shape != psi.shape:
        raise ValueError(f"dimension mismatch: {phi.shape} vs {psi.shape}")
    return complex(np.vdot(phi, op.apply(psi)))


def energy(circuit: Circuit, params, op: PauliSumOperator) -> float:
    return op.expectation(run_circuit(circuit, params))


def fidelity(phi: np.ndarray, psi: np.ndarray) -> float:
    """``|<phi|psi>|**2``, clipped to ``[0, 1]``."""
    phi, psi = np.asarray(phi), np.asarray(psi)
    if phi.shape != psi.shape:
        raise ValueError(f"dimension mismatch: {phi.shape} vs {psi.shape}")
    return float(min(1.0, abs(np.vdot(phi, psi)) ** 2))
