"""Pauli strings, weighted Pauli sums and the XXZ chain Hamiltonian.

Qubit 0 is the most significant bit of a basis-state index, so a string
``"XZ"`` is the matrix ``kron(X, Z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

PAULI_LABELS = "IXYZ"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: _MUL[(a, b)] = (phase, c) with a.b = phase * c
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

DEFAULT_QUBIT_CAP = 16
DENSE_CUTOFF = 10


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli operators, e.g. ``PauliString("XIZ")``."""

    ops: str

    def __post_init__(self):
        ops = str(self.ops).upper()
        if not ops:
            raise ValueError("a Pauli string needs at least one qubit")
        bad = set(ops) - set(PAULI_LABELS)
        if bad:
            raise ValueError(f"invalid Pauli labels {sorted(bad)} in {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    def __str__(self) -> str:
        return self.ops

    def __len__(self) -> int:
        return len(self.ops)

    @classmethod
    def from_sites(cls, n_qubits: int, sites: dict[int, str]) -> "PauliString":
        ops = ["I"] * n_qubits
        for q, label in sites.items():
            if not 0 <= q < n_qubits:
                raise ValueError(f"site {q} out of range for {n_qubits} qubits")
            ops[q] = label
        return cls("".join(ops))

    @property
    def x_mask(self) -> int:
        n = self.n_qubits
        return sum(1 << (n - 1 - q) for q, p in enumerate(self.ops) if p in "XY")

    @property
    def z_mask(self) -> int:
        n = self.n_qubits
        return sum(1 << (n - 1 - q) for q, p in enumerate(self.ops) if p in "ZY")

    @property
    def n_y(self) -> int:
        return self.ops.count("Y")

    def to_matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for p in self.ops:
            out = np.kron(out, PAULI_MATRICES[p])
        return out


def pauli_product(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, r)`` such that ``a @ b == phase * r`` as matrices."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"length mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    phase = 1 + 0j
    ops = []
    for pa, pb in zip(a.ops, b.ops):
        ph, pc = _MUL[(pa, pb)]
        phase *= ph
        ops.append(pc)
    return complex(phase), PauliString("".join(ops))


class PauliSumOperator:
    """Hermitian operator ``sum_k c_k P_k`` with real coefficients.

    Parameters
    ----------
    terms : iterable of (float, PauliString or str)
    """

    def __init__(self, terms: Iterable[tuple[float, PauliString | str]]):
        parsed = []
        for coef, string in terms:
            if not isinstance(string, PauliString):
                string = PauliString(string)
            coef = float(np.real_if_close(coef))
            if not np.isfinite(coef):
                raise ValueError(f"non-finite coefficient on {string}")
            parsed.append((coef, string))
        if not parsed:
            raise ValueError("operator has no terms")
        n = parsed[0][1].n_qubits
        if any(s.n_qubits != n for _, s in parsed):
            raise ValueError("all Pauli strings must act on the same number of qubits")
        self.terms: tuple[tuple[float, PauliString], ...] = tuple(parsed)
        self.n_qubits = n

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"PauliSumOperator(n_qubits={self.n_qubits}, n_terms={len(self.terms)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSumOperator):
            return NotImplemented
        return self.terms == other.terms

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def norm_bound(self) -> float:
        """Upper bound on the spectral radius, ``sum |c_k|``."""
        return float(np.sum(np.abs(self.coefficients)))

    @cached_property
    def _flip_tables(self) -> tuple[np.ndarray, np.ndarray]:
        # group terms by X-flip mask: (H psi)[c] = sum_x d_x[c] psi[c ^ x]
        n = self.n_qubits
        idx = np.arange(2**n, dtype=np.int64)
        groups: dict[int, np.ndarray] = {}
        for coef, s in self.terms:
            x, z = s.x_mask, s.z_mask
            parity = _popcount_parity((idx ^ x) & z)
            diag = coef * (1j**s.n_y) * (1 - 2 * parity)
            groups[x] = groups.get(x, 0) + diag
        masks = np.array(sorted(groups), dtype=np.int64)
        diags = np.array([groups[int(m)] for m in masks], dtype=complex)
        return masks, diags

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``H @ psi`` for a state (``(2**n,)``) or a batch (``(B, 2**n)``)."""
        psi = np.asarray(psi)
        dim = 2**self.n_qubits
        if psi.shape[-1] != dim:
            raise ValueError(f"state dimension {psi.shape[-1]} does not match {dim}")
        masks, diags = self._flip_tables
        idx = np.arange(dim)
        out = np.zeros(psi.shape, dtype=complex)
        for x, d in zip(masks, diags):
            if x == 0:
                out += d * psi
            else:
                out += d * psi[..., idx ^ x]
        return out

    def apply_term(self, k: int, psi: np.ndarray) -> np.ndarray:
        """Apply only the (unit-weight) Pauli string of term ``k``."""
        _, s = self.terms[k]
        dim = 2**self.n_qubits
        idx = np.arange(dim, dtype=np.int64)
        x, z = s.x_mask, s.z_mask
        diag = (1j**s.n_y) * (1 - 2 * _popcount_parity((idx ^ x) & z))
        return diag * np.asarray(psi)[..., idx ^ x]

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        return self.apply(np.eye(dim, dtype=complex)).T

    def expectation(self, psi: np.ndarray) -> float:
        psi = np.asarray(psi)
        return float(np.real(np.vdot(psi, self.apply(psi))))

    def to_text(self) -> str:
        return "\n".join(f"{float(c)!r} {s}" for c, s in self.terms) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSumOperator":
        terms = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected '<coefficient> <string>', got {line!r}")
            try:
                coef = float(parts[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
            terms.append((coef, PauliString(parts[1])))
        return cls(terms)


def _popcount_parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return parity


def build_xxz(n_sites: int, boundary: str = "open") -> PauliSumOperator:
    """XXZ chain with unit longitudinal field:
    ``sum_j Z_j + sum_<jk> (Z_j Z_k + X_j X_k + Y_j Y_k)``.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"boundary must be 'open' or 'periodic', got {boundary!r}")
    terms = [(1.0, PauliString.from_sites(n_sites, {j: "Z"})) for j in range(n_sites)]
    bonds = [(j, j + 1) for j in range(n_sites - 1)]
    if boundary == "periodic" and n_sites > 2:
        bonds.append((n_sites - 1, 0))
    for a, b in bonds:
        for p in "ZXY":
            terms.append((1.0, PauliString.from_sites(n_sites, {a: p, b: p})))
    return PauliSumOperator(terms)


def apply_operator(op: PauliSumOperator, psi: np.ndarray) -> np.ndarray:
    return op.apply(psi)


def ground_state(
    op: PauliSumOperator,
    *,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
    dense_cutoff: int = DENSE_CUTOFF,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``op``.

    Dense diagonalization up to ``dense_cutoff`` qubits, shifted power
    iteration on ``(lambda I - H)`` with ``lambda = sum |c_k|`` beyond.
    """
    n = op.n_qubits
    if n > qubit_cap:
        raise ValueError(f"{n} qubits exceeds the ground-state cap of {qubit_cap}")
    if n <= dense_cutoff:
        w, v = np.linalg.eigh(op.to_matrix())
        return float(w[0]), v[:, 0]

    shift = op.norm_bound
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    psi /= np.linalg.norm(psi)
    energy = np.inf
    for _ in range(max_iter):
        h_psi = op.apply(psi)
        energy = float(np.real(np.vdot(psi, h_psi)))
        residual = np.linalg.norm(h_psi - energy * psi)
        if residual < tol**0.5:
            return energy, psi
        psi = shift * psi - h_psi
        psi /= np.linalg.norm(psi)
    raise RuntimeError(f"power iteration did not converge in {max_iter} iterations")
