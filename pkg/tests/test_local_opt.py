import numpy as np
import pytest

from ubos.effective import build_h_tilde, build_s_tilde
from ubos.gates import FAMILY_NAMES, fsim, gate_family, pauli_coefficients
from ubos.local_opt import (
    METHODS,
    OptimizerConfig,
    fast_coefficients,
    gate_energy,
    generalized_lower_bound,
    maximize_overlap,
    minimize_gate,
)
from ubos.pauli import PauliSumOperator, build_xxz
from ubos.simulator import Circuit, build_brick_circuit, energy

GENERIC = gate_family("generic")


def _random_hermitian(k, rng):
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return (a + a.conj().T) / 2


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_fast_coefficients_match_reference(name, rng):
    fam = gate_family(name)
    for _ in range(20):
        p = fam.random_params(rng)
        np.testing.assert_allclose(fast_coefficients(fam, p), pauli_coefficients(fam, p), atol=1e-12)


def test_gate_energy(rng):
    h = _random_hermitian(16, rng)
    e0 = np.zeros(16, complex)
    e0[0] = 1
    assert abs(gate_energy(e0, h) - h[0, 0].real) < 1e-15
    t = pauli_coefficients(GENERIC, GENERIC.random_params(rng))
    assert abs(gate_energy(t, np.eye(16)) - 1) < 1e-12
    naive = sum(np.conj(t[a]) * h[a, b] * t[b] for a in range(16) for b in range(16))
    assert abs(gate_energy(t, h) - naive.real) < 1e-12
    with pytest.raises(ValueError):
        gate_energy(t, h + 1j * np.eye(16) * 0 + np.triu(np.ones((16, 16)), 1))


def test_single_gate_ground_state():
    c = Circuit.from_gates(2, [((0, 1), GENERIC)])
    op = PauliSumOperator([(1.0, "ZI"), (1.0, "IZ")])
    h = build_h_tilde(c, c.identity_params(), 0, op)
    res = minimize_gate(h, GENERIC, GENERIC.identity_params(), rng=np.random.default_rng(0))
    assert abs(res.value + 2) < 1e-8
    assert abs(energy(c, [res.params], op) - res.value) < 1e-10


@pytest.mark.parametrize("method", METHODS)
def test_methods_never_worse_than_warm_start(method, rng):
    op = build_xxz(4)
    c = build_brick_circuit(4, 2, GENERIC)
    p = c.random_params(rng)
    h = build_h_tilde(c, p, 1, op)
    start = gate_energy(pauli_coefficients(GENERIC, p[1]), h.matrix)
    res = minimize_gate(h, GENERIC, p[1], OptimizerConfig(method=method, restarts=2), rng=rng)
    assert res.value <= start + 1e-12
    assert len(res.start_values) == 2 and res.start_values[0] <= start + 1e-12
    assert abs(gate_energy(pauli_coefficients(GENERIC, res.params), h.matrix) - res.value) < 1e-10


def test_fsim_matches_grid_scan(rng):
    fam = gate_family("fsim-r")
    c = build_brick_circuit(4, 2, fam)
    p = c.random_params(rng)
    h = build_h_tilde(c, p, 1, build_xxz(4)).matrix
    basis = fam.basis

    def scan(thetas, phis):
        best = (np.inf, None)
        for th in thetas:
            for ph in phis:
                t = basis.expand(fsim(th, ph))
                val = np.real(np.vdot(t, h @ t))
                if val < best[0]:
                    best = (val, (th, ph))
        return best

    grid = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    coarse, (th0, ph0) = scan(grid, grid)
    d = grid[1]
    fine, _ = scan(np.linspace(th0 - d, th0 + d, 101), np.linspace(ph0 - d, ph0 + d, 101))
    res = minimize_gate(h, fam, p[1], OptimizerConfig(restarts=8), rng=rng)
    assert res.value <= coarse + 1e-12
    assert abs(res.value - fine) < 1e-4


def test_shape_validation(rng):
    with pytest.raises(ValueError):
        minimize_gate(np.eye(4), GENERIC, GENERIC.identity_params())
    with pytest.raises(ValueError):
        minimize_gate(np.eye(16), GENERIC, np.zeros(3))
    with pytest.raises(ValueError):
        maximize_overlap(np.ones(3), GENERIC, GENERIC.identity_params())
    with pytest.raises(ValueError):
        maximize_overlap(np.full(16, np.nan), GENERIC, GENERIC.identity_params())
    with pytest.raises(ValueError):
        OptimizerConfig(method="bfgs")
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=0)


def test_generalized_lower_bound(rng):
    h = _random_hermitian(6, rng)
    assert abs(generalized_lower_bound(h, np.eye(6)) - np.linalg.eigvalsh(h)[0]) < 1e-12
    c = Circuit.from_gates(2, [((0, 1), GENERIC)])
    op = PauliSumOperator([(1.0, "ZI"), (1.0, "IZ")])
    p = c.identity_params()
    bound = generalized_lower_bound(build_h_tilde(c, p, 0, op), build_s_tilde(c, p, 0))
    assert bound <= -2 + 1e-10
    with pytest.raises(ValueError):
        generalized_lower_bound(h, -np.eye(6))


def test_lower_bound_below_constrained_minimum(rng):
    op = build_xxz(4)
    c = build_brick_circuit(4, 3, GENERIC)
    p = c.random_params(rng)
    h = build_h_tilde(c, p, 2, op)
    bound = generalized_lower_bound(h, build_s_tilde(c, p, 2))
    res = minimize_gate(h, GENERIC, p[2], rng=rng)
    assert bound <= res.value + 1e-9


def test_overlap_warm_start_optimal(rng):
    p = GENERIC.random_params(rng)
    v = pauli_coefficients(GENERIC, p)
    res = maximize_overlap(v, GENERIC, p, rng=rng)
    assert abs(res.value - 1) < 1e-12


def test_overlap_identity_target(rng):
    v = np.zeros(16, complex)
    v[0] = 1
    res = maximize_overlap(v, GENERIC, GENERIC.random_params(rng), rng=rng)
    assert abs(res.value - 1) < 1e-8
    # coarse scan: no grid point beats the optimum
    grid_best = max(
        abs(pauli_coefficients(GENERIC, rng.uniform(0, np.pi, 15))[0]) for _ in range(2000)
    )
    assert grid_best <= res.value + 1e-12


def test_overlap_scale_invariant(rng):
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    p = GENERIC.random_params(rng)
    a = maximize_overlap(v, GENERIC, p, rng=np.random.default_rng(1))
    b = maximize_overlap(3 * v, GENERIC, p, rng=np.random.default_rng(1))
    assert abs(b.value - 3 * a.value) < 1e-6
    assert maximize_overlap(np.zeros(16), GENERIC, p).value == 0


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_fast_gradients_match_reference(name, rng):
    from ubos.gates import block_family, coefficient_gradients
    from ubos.local_opt import fast_coefficient_gradients

    fams = [gate_family(name), block_family([("fsim", {0: 0.4}), ("fsim", {0: 1.3})])]
    for fam in fams:
        for _ in range(5):
            p = fam.random_params(rng)
            np.testing.assert_allclose(fast_coefficient_gradients(fam, p), coefficient_gradients(fam, p), atol=1e-12)
