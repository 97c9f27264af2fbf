import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ubos.estimators import SGDEstimator, TUBOSEstimator, UBOSEstimator, check_hamiltonian
from ubos.pauli import PauliSumOperator, build_xxz


def test_check_hamiltonian():
    op = build_xxz(3)
    assert check_hamiltonian(op) is op
    assert check_hamiltonian(op.to_text()) == op
    assert check_hamiltonian([(c, str(s)) for c, s in op.terms]) == op
    with pytest.raises(TypeError):
        check_hamiltonian(42)


def test_params_round_trip():
    est = UBOSEstimator(n_layers=5, noise="gaussian:0.01")
    assert est.get_params()["n_layers"] == 5
    c = clone(est)
    assert c.get_params() == est.get_params()
    est.set_params(max_sweeps=3)
    assert est.max_sweeps == 3


def test_ubos_fit():
    op = build_xxz(4)
    est = UBOSEstimator(n_layers=2, max_sweeps=5, random_state=1).fit(op)
    assert est.energy_ == pytest.approx(op.expectation(est.state()))
    assert est.score(op) == pytest.approx(-est.energy_)
    assert est.n_evs_ == est.record_.evs[-1] > 0
    again = UBOSEstimator(n_layers=2, max_sweeps=5, random_state=1).fit(op)
    assert again.energy_ == est.energy_


def test_fit_from_given_params():
    op = build_xxz(4)
    est = SGDEstimator(n_layers=2, max_steps=5).fit(op)
    follow = SGDEstimator(n_layers=2, max_steps=5).fit(op, init_params=est.params_)
    assert follow.record_.energies[0] == pytest.approx(est.energy_)
    with pytest.raises(ValueError):
        SGDEstimator(n_layers=2).fit(op, init_params=est.params_[:1])


def test_tubos_fit():
    op = build_xxz(4)
    est = TUBOSEstimator(n_layers=2, n_steps=3, r=2).fit(op)
    assert len(est.record_.extras["step_fidelity"]) == 3
    assert est.energy_ < est.record_.energies[0]


def test_validation_errors():
    op = build_xxz(4)
    with pytest.raises(NotFittedError):
        UBOSEstimator().state()
    with pytest.raises(ValueError):
        UBOSEstimator(n_layers=0).fit(op)
    with pytest.raises(ValueError):
        UBOSEstimator(family="mystery").fit(op)
    with pytest.raises(ValueError):
        UBOSEstimator(noise="loud").fit(op)
    with pytest.raises(ValueError):
        SGDEstimator(learning_rate=-1).fit(op)
    with pytest.raises(ValueError):
        UBOSEstimator().fit(PauliSumOperator([(1.0, "Z")]))
