import numpy as np
import pytest

from ubos.effective import (
    EVCounter,
    NoiseSpec,
    add_gaussian_noise,
    build_h_tilde,
    build_s_tilde,
    matrix_from_text,
    matrix_to_text,
    rank_of_T,
    reconstruct_from_energies,
    shot_estimate,
)
from ubos.gates import FAMILY_NAMES, block_family, gate_family, pauli_coefficients
from ubos.pauli import PauliSumOperator, build_xxz
from ubos.simulator import Circuit, build_brick_circuit, derivative_states, energy

GENERIC = gate_family("generic")


def _mixed_circuit(n, layers, rng):
    """Brick circuit with a random two-qubit family per slot plus a U3 on qubit 0."""
    two = [f for f in FAMILY_NAMES if gate_family(f).n_qubits == 2]
    gates = []
    base = build_brick_circuit(n, layers, GENERIC)
    for slot in base.slots:
        gates.append((slot.qubits, gate_family(rng.choice(two))))
    gates.append(((0,), gate_family("u3")))
    return Circuit.from_gates(n, gates)


def test_oracle_identity_all_families(rng):
    op = build_xxz(4, "periodic")
    c = _mixed_circuit(4, 3, rng)
    params = c.random_params(rng)
    e = energy(c, params, op)
    for j, slot in enumerate(c.slots):
        h = build_h_tilde(c, params, j, op)
        t = pauli_coefficients(slot.family, params[j])
        assert abs(np.vdot(t, h.matrix @ t) - e) < 1e-10


def test_h_tilde_matches_naive_sandwich(rng):
    op = build_xxz(3)
    c = build_brick_circuit(3, 2, GENERIC)
    p = c.random_params(rng)
    states = derivative_states(c, p, 1, GENERIC.basis.elements)
    naive = states.conj() @ op.to_matrix() @ states.T
    np.testing.assert_allclose(build_h_tilde(c, p, 1, op).matrix, naive, atol=1e-12)


def test_h_tilde_single_gate_z0():
    c = Circuit.from_gates(2, [((0, 1), GENERIC)])
    h = build_h_tilde(c, c.identity_params(), 0, PauliSumOperator([(1.0, "ZI")]))
    labels = GENERIC.basis.labels
    assert h.matrix[labels.index("P00"), labels.index("P00")] == 1
    assert h.matrix[labels.index("P10"), labels.index("P10")] == -1


def test_h_tilde_hermitian_and_counted(rng):
    op = build_xxz(4)
    c = build_brick_circuit(4, 2, GENERIC)
    counter = EVCounter()
    h = build_h_tilde(c, c.random_params(rng), 2, op, counter=counter)
    np.testing.assert_allclose(h.matrix, h.matrix.conj().T)
    assert counter.total == 136 * op.n_terms
    assert counter.n_epochs == 1


def test_h_tilde_rejects_wrong_width(rng):
    c = build_brick_circuit(4, 2, GENERIC)
    with pytest.raises(ValueError):
        build_h_tilde(c, c.random_params(rng), 0, build_xxz(3))


def test_fsim_reduced_counts(rng):
    fam = gate_family("fsim-r")
    c = build_brick_circuit(4, 2, fam)
    counter = EVCounter()
    h = build_h_tilde(c, c.random_params(rng), 0, build_xxz(4), counter=counter)
    assert h.size == 4
    assert counter.n_h_meas == 10


def test_noise_reproducible_and_keyed(rng):
    op = build_xxz(4)
    c = build_brick_circuit(4, 2, GENERIC)
    p = c.random_params(rng)
    noise = NoiseSpec("gaussian", sigma=0.1, seed=3)
    a = build_h_tilde(c, p, 1, op, noise=noise, key=(5,)).matrix
    b = build_h_tilde(c, p, 1, op, noise=noise, key=(5,)).matrix
    d = build_h_tilde(c, p, 1, op, noise=noise, key=(6,)).matrix
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, d)
    np.testing.assert_allclose(a, a.conj().T)


def test_shot_h_tilde_close_to_exact(rng):
    op = build_xxz(3)
    c = build_brick_circuit(3, 2, GENERIC)
    p = c.random_params(rng)
    exact = build_h_tilde(c, p, 0, op).matrix
    noisy = build_h_tilde(c, p, 0, op, noise=NoiseSpec("shots", shots=100000)).matrix
    np.testing.assert_allclose(noisy, noisy.conj().T)
    assert np.abs(noisy - exact).max() < 0.1


def test_s_tilde(rng):
    c = build_brick_circuit(4, 3, GENERIC)
    p = c.random_params(rng)
    counter = EVCounter()
    s = build_s_tilde(c, p, 3, counter=counter)
    assert counter.total == 16
    np.testing.assert_allclose(np.diag(s), 1, atol=1e-12)
    assert np.linalg.eigvalsh(s).min() > -1e-10
    states = derivative_states(c, p, 3, GENERIC.basis.elements)
    np.testing.assert_allclose(s, states.conj() @ states.T, atol=1e-12)


def test_s_tilde_single_gate():
    c = Circuit.from_gates(2, [((0, 1), GENERIC)])
    s = build_s_tilde(c, c.identity_params(), 0)
    el = GENERIC.basis.elements
    expected = np.array([[(a.conj().T @ b)[0, 0] for b in el] for a in el])
    np.testing.assert_allclose(s, expected, atol=1e-14)


def test_s_tilde_reduced_basis(rng):
    fam = gate_family("cu3-r")
    c = build_brick_circuit(3, 2, fam)
    p = c.random_params(rng)
    states = derivative_states(c, p, 1, fam.basis.elements)
    np.testing.assert_allclose(build_s_tilde(c, p, 1), states.conj() @ states.T, atol=1e-12)


def test_gaussian_noise():
    h = np.diag([1.0, 2.0, 3.0]).astype(complex)
    np.testing.assert_array_equal(add_gaussian_noise(h, 0.0, np.random.default_rng(0)), h)
    rng = np.random.default_rng(0)
    draws = np.array([add_gaussian_noise(h, 0.2, rng) for _ in range(10000)]) - h
    for m in draws[:10]:
        np.testing.assert_array_equal(m, m.conj().T)
    assert abs(draws[:, 0, 0].real.std() / 0.2 - 1) < 0.05
    assert abs(draws[:, 0, 1].real.std() / 0.2 - 1) < 0.05
    assert abs(draws[:, 0, 1].imag.std() / 0.2 - 1) < 0.05
    with pytest.raises(ValueError):
        add_gaussian_noise(h, -1, rng)


def test_shot_estimate_basic():
    rng = np.random.default_rng(0)
    assert shot_estimate(1.0, 7, rng) == 1.0
    assert shot_estimate(-1.0, 7, rng) == -1.0
    est = shot_estimate(np.zeros(20000), 50, rng)
    assert abs(est.mean()) < 3 * np.sqrt(1 / 50 / 20000)
    assert abs(est.var() * 50 - 1) < 0.05
    with pytest.raises(ValueError):
        shot_estimate(1.5, 10, rng)
    with pytest.raises(ValueError):
        shot_estimate(0.1, 0, rng)


def test_noise_spec_parse():
    assert NoiseSpec.parse("exact").is_exact
    assert NoiseSpec.parse("gaussian:0.01").sigma == 0.01
    assert NoiseSpec.parse("shots:100").shots == 100
    assert str(NoiseSpec.parse("gaussian:0.1")) == "gaussian:0.1"
    for bad in ("gaussian", "loud", "shots:0", "gaussian:-1"):
        with pytest.raises(ValueError):
            NoiseSpec.parse(bad)


def test_matrix_text_round_trip(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    np.testing.assert_array_equal(matrix_from_text(matrix_to_text(m)), m)


def test_rank_of_T():
    assert rank_of_T(GENERIC) == 226
    assert rank_of_T(block_family([("u3", {1: 0.0, 2: 0.0})])) == 3
    assert rank_of_T(gate_family("fsim-r")) <= 16
    with pytest.raises(ValueError):
        rank_of_T(GENERIC, n_probe_points=100)


def _random_hermitian(k, rng):
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return (a + a.conj().T) / 2


def _samples(family, h, n, rng, sigma=0.0):
    out = []
    for _ in range(n):
        p = family.random_params(rng)
        t = pauli_coefficients(family, p)
        out.append((p, float(np.real(np.vdot(t, h @ t))) + sigma * rng.normal()))
    return out


def test_reconstruct_exact(rng):
    h = _random_hermitian(16, rng)
    f = reconstruct_from_energies(GENERIC, _samples(GENERIC, h, 300, rng))
    held = _samples(GENERIC, h, 50, rng)
    pred = f.predict([p for p, _ in held])
    assert np.abs(pred - [e for _, e in held]).max() < 1e-8
    assert f.rank == 226


def test_reconstruct_constant(rng):
    h = 2.5 * np.eye(16)
    f = reconstruct_from_energies(GENERIC, _samples(GENERIC, h, 260, rng))
    for _ in range(10):
        assert abs(f(GENERIC.random_params(rng)) - 2.5) < 1e-9


def test_reconstruct_noisy(rng):
    h = _random_hermitian(16, rng)
    f = reconstruct_from_energies(GENERIC, _samples(GENERIC, h, 5 * 226, rng, sigma=1e-3))
    held = _samples(GENERIC, h, 50, rng)
    resid = f.predict([p for p, _ in held]) - [e for _, e in held]
    assert np.sqrt(np.mean(resid**2)) <= 5e-3


def test_reconstruct_too_few_samples(rng):
    with pytest.raises(ValueError):
        reconstruct_from_energies(GENERIC, _samples(GENERIC, np.eye(16), 100, rng))
    with pytest.raises(ValueError):
        reconstruct_from_energies(GENERIC, [])


def test_counter_formula():
    c = EVCounter()
    c.record(136, 29, epochs=3)
    assert c.total == 3 * 136 * 29
    c.add(16)
    assert c.history == [3 * 136 * 29, 3 * 136 * 29 + 16]
