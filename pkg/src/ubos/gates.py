"""Parameterized gate manifolds and their operator-basis expansions.

Every family maps a real parameter vector to a unitary ``U`` and expands it
as ``U = sum_a t[a] * basis[a]``.  The coefficient vector ``t`` is what the
effective-Hamiltonian machinery works with.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .pauli import PAULI_MATRICES, PauliString

_SIGMA = [PAULI_MATRICES[p] for p in "IXYZ"]
_XX = np.kron(_SIGMA[1], _SIGMA[1])
_YY = np.kron(_SIGMA[2], _SIGMA[2])
_ZZ = np.kron(_SIGMA[3], _SIGMA[3])
_CARTAN = (_XX, _YY, _ZZ)

# name -> (n_qubits, param_count)
BASE_KINDS = {
    "generic": (2, 15),
    "u3": (1, 3),
    "cu3": (2, 3),
    "fsim": (2, 2),
    "u3xu3": (2, 6),
}

FAMILY_NAMES = ("generic", "u3", "cu3", "cu3-r", "fsim", "fsim-r", "u3xu3")

CU3_PAULI_SUPPORT = ("00", "01", "02", "03", "30", "31", "32", "33")
FSIM_PAULI_SUPPORT = ("00", "03", "11", "12", "21", "22", "30", "33")


# --- base unitaries and their parameter derivatives -------------------------


def u3(theta: float, lam: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c],
        ]
    )


def _u3_grad(theta, lam, phi):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    el, ep, elp = np.exp(1j * lam), np.exp(1j * phi), np.exp(1j * (lam + phi))
    d_theta = np.array([[-s / 2, -el * c / 2], [ep * c / 2, -elp * s / 2]])
    d_lam = np.array([[0, -1j * el * s], [0, 1j * elp * c]])
    d_phi = np.array([[0, 0], [1j * ep * s, 1j * elp * c]])
    return [d_theta, d_lam, d_phi]


def cartan_core(k: Sequence[float]) -> np.ndarray:
    """``exp(-i (k0 XX + k1 YY + k2 ZZ))``; the three generators commute."""
    out = np.eye(4, dtype=complex)
    for km, pm in zip(k, _CARTAN):
        out = out @ (np.cos(km) * np.eye(4) - 1j * np.sin(km) * pm)
    return out


def kak_unitary(params: Sequence[float]) -> np.ndarray:
    """``(A0 x A1) exp(-i k.Sigma) (B0 x B1)`` from 15 angles.

    Layout: ``[A0(3), A1(3), B0(3), B1(3), k(3)]``, each single-qubit factor
    a :func:`u3` triple ``(theta, lam, phi)``.
    """
    p = np.asarray(params, dtype=float)
    if p.shape != (15,):
        raise ValueError(f"KAK unitary needs 15 parameters, got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("KAK parameters must be finite")
    a = np.kron(u3(*p[0:3]), u3(*p[3:6]))
    b = np.kron(u3(*p[6:9]), u3(*p[9:12]))
    return a @ cartan_core(p[12:15]) @ b


def _kak_grad(p):
    a0, a1, b0, b1 = (u3(*p[i : i + 3]) for i in (0, 3, 6, 9))
    ga0, ga1, gb0, gb1 = (_u3_grad(*p[i : i + 3]) for i in (0, 3, 6, 9))
    a, b = np.kron(a0, a1), np.kron(b0, b1)
    core = cartan_core(p[12:15])
    grads = []
    grads += [np.kron(g, a1) @ core @ b for g in ga0]
    grads += [np.kron(a0, g) @ core @ b for g in ga1]
    grads += [a @ core @ np.kron(g, b1) for g in gb0]
    grads += [a @ core @ np.kron(b0, g) for g in gb1]
    grads += [a @ (-1j * pm @ core) @ b for pm in _CARTAN]
    return grads


def cu3(theta: float, lam: float, phi: float) -> np.ndarray:
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u3(theta, lam, phi)
    return out


def _cu3_grad(theta, lam, phi):
    grads = []
    for g in _u3_grad(theta, lam, phi):
        m = np.zeros((4, 4), dtype=complex)
        m[2:, 2:] = g
        grads.append(m)
    return grads


def fsim(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, np.exp(-1j * phi)],
        ]
    )


def _fsim_grad(theta, phi):
    c, s = np.cos(theta), np.sin(theta)
    d_theta = np.zeros((4, 4), dtype=complex)
    d_theta[1:3, 1:3] = [[-s, -1j * c], [-1j * c, -s]]
    d_phi = np.zeros((4, 4), dtype=complex)
    d_phi[3, 3] = -1j * np.exp(-1j * phi)
    return [d_theta, d_phi]


def _u3xu3(p):
    return np.kron(u3(*p[:3]), u3(*p[3:]))


def _u3xu3_grad(p):
    left, right = u3(*p[:3]), u3(*p[3:])
    return [np.kron(g, right) for g in _u3_grad(*p[:3])] + [
        np.kron(left, g) for g in _u3_grad(*p[3:])
    ]


_UNITARY = {
    "generic": kak_unitary,
    "u3": lambda p: u3(*p),
    "cu3": lambda p: cu3(*p),
    "fsim": lambda p: fsim(*p),
    "u3xu3": _u3xu3,
}

_GRAD = {
    "generic": _kak_grad,
    "u3": lambda p: _u3_grad(*p),
    "cu3": lambda p: _cu3_grad(*p),
    "fsim": lambda p: _fsim_grad(*p),
    "u3xu3": _u3xu3_grad,
}


# --- bases ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Linearly independent operators ``R^a`` spanning a gate manifold."""

    elements: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=complex)
        if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
            raise ValueError("basis elements must be a (k, d, d) array")
        if len(self.labels) != elements.shape[0]:
            raise ValueError("one label per basis element")
        object.__setattr__(self, "elements", elements)
        flat = elements.reshape(len(elements), -1)
        if np.linalg.matrix_rank(flat, tol=1e-10) != len(elements):
            raise ValueError("basis elements are linearly dependent")

    @property
    def size(self) -> int:
        return self.elements.shape[0]

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def n_unique_elements(self) -> int:
        """Independent entries of a Hermitian ``size x size`` matrix."""
        k = self.size
        return k * (k + 1) // 2

    @cached_property
    def projector(self) -> np.ndarray:
        """``(k, d*d)`` left inverse of the stacked, flattened elements."""
        flat = self.elements.reshape(self.size, -1).T
        return np.linalg.pinv(flat)

    @cached_property
    def _flat(self) -> np.ndarray:
        return self.elements.reshape(self.size, -1).T

    def expand(self, matrix: np.ndarray, atol: float = 1e-9) -> np.ndarray:
        """Coefficients ``t`` with ``sum_a t[a] R^a == matrix``."""
        vec = np.asarray(matrix, dtype=complex).reshape(-1)
        t = self.projector @ vec
        residual = np.linalg.norm(self._flat @ t - vec)
        if residual > atol:
            raise ValueError(f"matrix is outside the basis span (residual {residual:.2e})")
        return t

    def combine(self, t: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(t), self.elements, axes=1)


def pauli_basis(n_qubits: int, support: Sequence[str] | None = None) -> OperatorBasis:
    """Pauli strings on ``n_qubits``; labels use digits, ``"03"`` is ``I x Z``."""
    if support is None:
        support = ["".join(d) for d in itertools.product("0123", repeat=n_qubits)]
    elements, labels = [], []
    for label in support:
        ops = "".join("IXYZ"[int(c)] for c in label)
        elements.append(PauliString(ops).to_matrix())
        labels.append("P" + label)
    return OperatorBasis(np.array(elements), tuple(labels))


def _cu3_reduced_basis() -> OperatorBasis:
    eye2 = np.eye(2)
    lower = [
        eye2,
        np.diag([1.0, -1.0]),
        np.array([[0.0, 1.0], [1.0, 0.0]]),
        np.array([[0.0, -1.0], [1.0, 0.0]]),
        -eye2,
    ]
    elements = []
    for block in lower:
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = block
        elements.append(m)
    return OperatorBasis(np.array(elements), ("R0", "R1", "R2", "R3", "R4"))


def _fsim_reduced_basis() -> OperatorBasis:
    elements = [fsim(0, 0), fsim(0, np.pi), fsim(np.pi, 0), fsim(np.pi / 2, 0)]
    elements = [np.round(e.real, 15) + 1j * np.round(e.imag, 15) for e in elements]
    return OperatorBasis(np.array(elements), ("R0", "R1", "R2", "R3"))


# --- families ---------------------------------------------------------------


@dataclass(frozen=True)
class BlockPart:
    """One constituent gate of a block: a base kind with some angles frozen."""

    kind: str
    fixed: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        n_params = BASE_KINDS[self.kind][1]
        fixed = tuple(sorted((int(i), float(v)) for i, v in dict(self.fixed).items()))
        for i, _ in fixed:
            if not 0 <= i < n_params:
                raise ValueError(f"{self.kind} has no parameter {i}")
        object.__setattr__(self, "fixed", fixed)

    @property
    def n_qubits(self) -> int:
        return BASE_KINDS[self.kind][0]

    @property
    def free_indices(self) -> tuple[int, ...]:
        frozen = {i for i, _ in self.fixed}
        return tuple(i for i in range(BASE_KINDS[self.kind][1]) if i not in frozen)

    def full_params(self, free: Sequence[float]) -> np.ndarray:
        p = np.zeros(BASE_KINDS[self.kind][1])
        for i, v in self.fixed:
            p[i] = v
        p[list(self.free_indices)] = free
        return p


@dataclass(frozen=True, eq=False)
class GateFamily:
    """A parameterized gate manifold together with the basis used to expand it."""

    name: str
    kind: str
    parts: tuple[BlockPart, ...]
    basis: OperatorBasis = field(repr=False)

    @property
    def n_qubits(self) -> int:
        return sum(p.n_qubits for p in self.parts)

    @property
    def param_count(self) -> int:
        return sum(len(p.free_indices) for p in self.parts)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def _split(self, params):
        p = np.asarray(params, dtype=float).reshape(-1)
        if p.shape[0] != self.param_count:
            raise ValueError(
                f"{self.name} takes {self.param_count} parameters, got {p.shape[0]}"
            )
        out, offset = [], 0
        for part in self.parts:
            n = len(part.free_indices)
            out.append(part.full_params(p[offset : offset + n]))
            offset += n
        return out

    def unitary(self, params) -> np.ndarray:
        mats = [_UNITARY[part.kind](p) for part, p in zip(self.parts, self._split(params))]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    def unitary_grads(self, params) -> list[np.ndarray]:
        """``dU/dparam_i`` for every free parameter, in parameter order."""
        full = self._split(params)
        mats = [_UNITARY[part.kind](p) for part, p in zip(self.parts, full)]
        grads = []
        for i, (part, p) in enumerate(zip(self.parts, full)):
            part_grads = _GRAD[part.kind](p)
            for idx in part.free_indices:
                factors = list(mats)
                factors[i] = part_grads[idx]
                g = factors[0]
                for m in factors[1:]:
                    g = np.kron(g, m)
                grads.append(g)
        return grads

    def identity_params(self) -> np.ndarray:
        """Parameters mapping to the identity, when the family contains it."""
        return np.zeros(self.param_count)

    def random_params(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, np.pi, size=self.param_count)


def gate_family(name: str) -> GateFamily:
    """Look up one of the built-in families.

    ``generic`` (KAK-parameterized two-qubit unitary, 16 Pauli strings),
    ``u3`` (4 single-qubit Paulis), ``cu3`` / ``fsim`` (8 Pauli strings),
    ``cu3-r`` / ``fsim-r`` (5 / 4 gate-shaped operators), ``u3xu3`` (16).
    """
    name = name.lower()
    if name == "generic":
        return GateFamily(name, "generic", (BlockPart("generic"),), pauli_basis(2))
    if name == "u3":
        return GateFamily(name, "u3", (BlockPart("u3"),), pauli_basis(1))
    if name == "cu3":
        return GateFamily(name, "cu3", (BlockPart("cu3"),), pauli_basis(2, CU3_PAULI_SUPPORT))
    if name == "cu3-r":
        return GateFamily(name, "cu3", (BlockPart("cu3"),), _cu3_reduced_basis())
    if name == "fsim":
        return GateFamily(name, "fsim", (BlockPart("fsim"),), pauli_basis(2, FSIM_PAULI_SUPPORT))
    if name == "fsim-r":
        return GateFamily(name, "fsim", (BlockPart("fsim"),), _fsim_reduced_basis())
    if name == "u3xu3":
        return GateFamily(name, "u3xu3", (BlockPart("u3xu3"),), pauli_basis(2))
    raise ValueError(f"unknown gate family {name!r}; choose from {FAMILY_NAMES}")


def family_unitary(family: GateFamily, params) -> np.ndarray:
    return family.unitary(params)


def family_basis(family: GateFamily) -> OperatorBasis:
    return family.basis


def pauli_coefficients(family: GateFamily, params) -> np.ndarray:
    """Expansion coefficients ``t`` of the family's unitary in its basis."""
    return family.basis.expand(family.unitary(params))


def coefficient_gradients(family: GateFamily, params) -> np.ndarray:
    """``(k, param_count)`` matrix of ``dt[a]/dparam_i``."""
    grads = family.unitary_grads(params)
    flat = np.array([g.reshape(-1) for g in grads]).T
    return family.basis.projector @ flat


# --- restricted-manifold anchors and block families -------------------------

_ANCHOR_ANGLES = (0.0, np.pi, np.pi / 2, 3 * np.pi / 2)


def _manifold_rank(part: BlockPart, rng: np.random.Generator, n_samples: int = 64) -> int:
    free = part.free_indices
    vecs = [
        _UNITARY[part.kind](part.full_params(rng.uniform(0, 2 * np.pi, len(free)))).reshape(-1)
        for _ in range(n_samples)
    ]
    return int(np.linalg.matrix_rank(np.array(vecs), tol=1e-9))


def anchor_basis(part: BlockPart, seed: int = 0) -> OperatorBasis:
    """Basis of gate-shaped operators spanning the span of a restricted manifold.

    With no frozen angles this is the kind's own Pauli basis.  Otherwise the
    manifold is evaluated on a grid of the free angles (0, pi, pi/2, 3pi/2,
    in that priority) and points are kept greedily while they raise the rank.
    """
    if not part.fixed:
        return gate_family(part.kind).basis
    target = _manifold_rank(part, np.random.default_rng(seed))
    chosen: list[np.ndarray] = []
    labels: list[str] = []
    for point in itertools.product(_ANCHOR_ANGLES, repeat=len(part.free_indices)):
        u = _UNITARY[part.kind](part.full_params(point))
        trial = chosen + [u]
        if np.linalg.matrix_rank(np.array([m.reshape(-1) for m in trial]), tol=1e-9) == len(trial):
            chosen.append(u)
            labels.append("AB"[len(labels)] if target <= 2 else f"R{len(labels)}")
        if len(chosen) == target:
            break
    return OperatorBasis(np.array(chosen), tuple(labels))


def block_subspace_basis(parts: Sequence[BlockPart | tuple]) -> OperatorBasis:
    """Tensor-product basis for a block of gates acting on disjoint qubits.

    Each part is a :class:`BlockPart` or a ``(kind, {index: value})`` tuple
    naming the frozen angles.  Elements are ordered lexicographically over the
    parts' anchor bases, so two fSim parts with frozen swap angles give
    ``A x A, A x B, B x A, B x B``.
    """
    parts = [p if isinstance(p, BlockPart) else BlockPart(p[0], tuple(dict(p[1]).items())) for p in parts]
    if not parts:
        raise ValueError("a block needs at least one gate")
    anchors = [anchor_basis(p) for p in parts]
    if len(anchors) == 1:
        return anchors[0]
    elements, labels = [], []
    for combo in itertools.product(*[range(a.size) for a in anchors]):
        m = np.ones((1, 1), dtype=complex)
        for a, i in zip(anchors, combo):
            m = np.kron(m, a.elements[i])
        elements.append(m)
        labels.append("".join(a.labels[i] for a, i in zip(anchors, combo)))
    return OperatorBasis(np.array(elements), tuple(labels))


def block_family(parts: Sequence[BlockPart | tuple], name: str = "block") -> GateFamily:
    parts = tuple(
        p if isinstance(p, BlockPart) else BlockPart(p[0], tuple(dict(p[1]).items())) for p in parts
    )
    basis = block_subspace_basis(parts)
    return GateFamily(name, "block", parts, basis)


def fsim_pair_coefficients(phi_a: float, phi_b: float) -> np.ndarray:
    """Closed-form expansion of ``fSim(., phi_a) x fSim(., phi_b)`` over ``A/B`` anchors."""
    ea, eb = np.exp(-1j * phi_a), np.exp(-1j * phi_b)
    plus_a, minus_a = (1 + ea) / 2, (1 - ea) / 2
    plus_b, minus_b = (1 + eb) / 2, (1 - eb) / 2
    return np.array([plus_a * plus_b, plus_a * minus_b, minus_a * plus_b, minus_a * minus_b])


def family_from_config(config: Mapping | str) -> GateFamily:
    """Build a family from a name or a ``{"kind": "block", "parts": [...]}`` mapping."""
    if isinstance(config, str):
        return gate_family(config)
    if "kind" not in config:
        raise ValueError("family config needs a 'kind' entry")
    if config["kind"] == "block":
        return block_family([(p["kind"], {int(k): v for k, v in p.get("fixed", {}).items()}) for p in config["parts"]])
    return gate_family(config["kind"])
