import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from ubos.pauli import (
    PauliString,
    PauliSumOperator,
    apply_operator,
    build_xxz,
    ground_state,
    pauli_product,
)

def test_product_table():
    assert pauli_product(PauliString("X"), PauliString("X")) == (1, PauliString("I"))
    assert pauli_product(PauliString("X"), PauliString("Y")) == (1j, PauliString("Z"))
    assert pauli_product(PauliString("Y"), PauliString("X")) == (-1j, PauliString("Z"))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_product_matches_dense(data):
    n = data.draw(st.integers(1, 3))
    a = PauliString(data.draw(st.text("IXYZ", min_size=n, max_size=n)))
    b = PauliString(data.draw(st.text("IXYZ", min_size=n, max_size=n)))
    phase, r = pauli_product(a, b)
    np.testing.assert_allclose(phase * r.to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-14)


def test_product_associative_up_to_phase():
    for a, b, c in itertools.product(["X", "Y", "Z", "I"], repeat=3):
        p1, ab = pauli_product(PauliString(a), PauliString(b))
        p2, left = pauli_product(ab, PauliString(c))
        q1, bc = pauli_product(PauliString(b), PauliString(c))
        q2, right = pauli_product(PauliString(a), bc)
        assert left == right
        assert np.isclose(p1 * p2, q1 * q2)


def test_big_endian_kron():
    np.testing.assert_allclose(
        PauliString("XZ").to_matrix(), np.kron(PauliString("X").to_matrix(), PauliString("Z").to_matrix())
    )


@pytest.mark.parametrize("bad", ["", "XA", "X Z"])
def test_invalid_string(bad):
    with pytest.raises(ValueError):
        PauliString(bad)


def test_mixed_widths_rejected():
    with pytest.raises(ValueError):
        PauliSumOperator([(1.0, "XI"), (1.0, "Z")])


def test_xxz_terms():
    assert [str(s) for _, s in build_xxz(1).terms] == ["Z"]
    strs = sorted(str(s) for _, s in build_xxz(2).terms)
    assert strs == sorted(["ZI", "IZ", "ZZ", "XX", "YY"])
    ring = build_xxz(3, "periodic")
    assert ring.n_terms == 3 + 9
    with pytest.raises(ValueError):
        build_xxz(0)
    with pytest.raises(ValueError):
        build_xxz(3, "twisted")


def test_apply_simple():
    z = PauliSumOperator([(1.0, "Z")])
    x = PauliSumOperator([(1.0, "X")])
    np.testing.assert_allclose(apply_operator(z, np.array([1, 0], complex)), [1, 0])
    np.testing.assert_allclose(apply_operator(x, np.array([1, 0], complex)), [0, 1])


@pytest.mark.parametrize("n", [2, 3, 5])
def test_apply_matches_dense(n, rng):
    op = build_xxz(n, "periodic")
    psi = random_state(n, rng)
    np.testing.assert_allclose(op.apply(psi), op.to_matrix() @ psi, atol=1e-12)
    batch = np.stack([psi, random_state(n, rng)])
    np.testing.assert_allclose(op.apply(batch)[1], op.to_matrix() @ batch[1], atol=1e-12)


def test_ground_state_small():
    e, psi = ground_state(build_xxz(2))
    assert abs(e + 3) < 1e-12
    e, psi = ground_state(PauliSumOperator([(1.0, "Z")]))
    assert abs(e + 1) < 1e-12
    assert abs(abs(psi[1]) - 1) < 1e-12


def test_ground_state_eight_sites_dense_oracle():
    op = build_xxz(8)
    e, psi = ground_state(op)
    assert abs(e - np.linalg.eigvalsh(op.to_matrix())[0]) < 1e-8
    assert abs(op.expectation(psi) - e) < 1e-8


def test_ground_state_power_iteration_branch():
    op = build_xxz(6)
    e_dense = np.linalg.eigvalsh(op.to_matrix())[0]
    e, psi = ground_state(op, dense_cutoff=4)
    assert abs(e - e_dense) < 1e-6
    assert abs(np.linalg.norm(psi) - 1) < 1e-12


def test_ground_state_cap():
    with pytest.raises(ValueError):
        ground_state(build_xxz(5), qubit_cap=4)


def test_text_round_trip():
    op = build_xxz(3, "periodic")
    assert PauliSumOperator.from_text(op.to_text()) == op
    with pytest.raises(ValueError, match="line 2"):
        PauliSumOperator.from_text("1.0 ZZ\nnonsense\n")
