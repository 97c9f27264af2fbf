"""Full optimizations: UBOS sweeps, the gradient-descent baseline, TUBOS
imaginary-time stepping and the barren-plateau comparison."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .effective import (
    EVCounter,
    NoiseSpec,
    measure_slot,
    shot_estimate,
)
from .local_opt import (
    OptimizerConfig,
    fast_coefficient_gradients,
    fast_coefficients,
    fast_unitary,
    maximize_overlap,
    minimize_gate,
)
from .pauli import PauliSumOperator, ground_state
from .simulator import Circuit, apply_gate, check_params, reduced_operator, run_from, zero_state


@dataclass
class SweepConfig:
    """Settings for a UBOS run.

    ``stop_below`` ends the run as soon as the exact energy reaches it;
    noisy runs also stop once the best energy has not improved for
    ``plateau_window`` sweeps.
    """

    max_sweeps: int = 50
    energy_tolerance: float = 1e-8
    shuffle_order: bool = True
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    record_fidelity: bool = False
    seed: int = 0
    plateau_window: int = 5
    stop_below: float | None = None

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass
class SGDConfig:
    max_steps: int = 5000
    learning_rate: float = 0.05
    energy_tolerance: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    record_fidelity: bool = False
    stop_below: float | None = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class TimeEvoConfig:
    """Imaginary-time stepping with ``(1 - beta_over_n * H)`` per step and
    ``r`` sweeps of overlap maximization per step."""

    beta_over_n: float = 0.1
    n_steps: int = 20
    r: int = 10
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(restarts=1))
    shuffle_order: bool = True
    seed: int = 0
    learning_rate: float = 0.05

    def __post_init__(self):
        if self.beta_over_n < 0:
            raise ValueError("beta_over_n must be >= 0")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")


@dataclass
class UpdateRow:
    update: int
    evs: int
    energy: float
    fidelity: float | None = None


@dataclass
class RunRecord:
    """Trace of an optimization, one row per gate update (or SGD step)."""

    method: str
    rows: list[UpdateRow] = field(default_factory=list)
    params: list[np.ndarray] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    extras: dict = field(default_factory=dict)

    def append(self, evs: int, energy: float, fidelity: float | None = None) -> None:
        if not math.isfinite(energy):
            raise FloatingPointError(f"non-finite energy {energy}")
        self.rows.append(UpdateRow(len(self.rows), int(evs), float(energy), fidelity))

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.rows])

    @property
    def evs(self) -> np.ndarray:
        return np.array([r.evs for r in self.rows])

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([np.nan if r.fidelity is None else r.fidelity for r in self.rows])

    @property
    def final_energy(self) -> float:
        return self.rows[-1].energy

    def iter_ndjson(self) -> Iterable[str]:
        for r in self.rows:
            yield json.dumps(
                {"update_index": r.update, "cumulative_evs": r.evs, "energy": r.energy, "fidelity": r.fidelity}
            )

    def to_ndjson(self) -> str:
        return "".join(line + "\n" for line in self.iter_ndjson())

    @classmethod
    def from_ndjson(cls, text: str, method: str = "") -> "RunRecord":
        rec = cls(method)
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                rec.rows.append(UpdateRow(d["update_index"], d["cumulative_evs"], d["energy"], d["fidelity"]))
        return rec


def _unitaries(circuit: Circuit, params) -> list[np.ndarray]:
    check_params(circuit, params)
    return [fast_unitary(s.family, p) for s, p in zip(circuit.slots, params)]


def _copy_params(params) -> list[np.ndarray]:
    return [np.array(p, dtype=float) for p in params]


def _reference(op: PauliSumOperator, record_fidelity: bool):
    if not record_fidelity:
        return None
    return ground_state(op)[1]


def _fid(state, ref):
    if ref is None:
        return None
    return float(min(1.0, abs(np.vdot(ref, state)) ** 2))


# --- UBOS -------------------------------------------------------------------


def ubos_gate_update(circuit, params, unitaries, j, op, noise, optimizer, counter=None, key=(), left=None):
    """Re-optimize slot ``j`` in place; returns ``(new_state, OptResult)``."""
    family = circuit.slots[j].family
    if left is None:
        left = run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, j)
    h, states = measure_slot(circuit, unitaries, j, left, op, noise, key)
    if counter is not None:
        counter.record(family.basis.n_unique_elements, op.n_terms)
    rng = np.random.default_rng([optimizer.seed, *[int(k) for k in key], j])
    res = minimize_gate(h, family, params[j], optimizer, rng=rng)
    params[j] = np.asarray(res.params, dtype=float)
    unitaries[j] = fast_unitary(family, params[j])
    t = fast_coefficients(family, params[j])
    return t @ states, res


def sweep_order(circuit: Circuit, shuffle: bool, seed: int, sweep: int) -> list[int]:
    order = list(range(circuit.n_slots))
    if shuffle:
        np.random.default_rng([seed, sweep]).shuffle(order)
    return order


def ubos_sweep(
    circuit: Circuit,
    params,
    op: PauliSumOperator,
    cfg: SweepConfig | None = None,
    counter: EVCounter | None = None,
    *,
    sweep: int = 0,
    on_update: Callable[[int, np.ndarray], None] | None = None,
):
    """Update every slot once; returns ``(params, energies after each update)``."""
    cfg = cfg or SweepConfig()
    params = _copy_params(params)
    unitaries = _unitaries(circuit, params)
    energies = []
    for position, j in enumerate(sweep_order(circuit, cfg.shuffle_order, cfg.seed, sweep)):
        key = (sweep, position)
        state, _ = ubos_gate_update(circuit, params, unitaries, j, op, cfg.noise, cfg.optimizer, counter, key)
        energies.append(op.expectation(state))
        if on_update is not None:
            on_update(j, state)
    return params, energies


def run_vqe(circuit: Circuit, init_params, op: PauliSumOperator, cfg: SweepConfig | None = None) -> RunRecord:
    cfg = cfg or SweepConfig()
    ref = _reference(op, cfg.record_fidelity)
    counter = EVCounter()
    record = RunRecord("ubos")
    params = _copy_params(init_params)
    state = run_from(zero_state(circuit.n_qubits), circuit, _unitaries(circuit, params), 0, circuit.n_slots)
    record.append(0, op.expectation(state), _fid(state, ref))

    def on_update(j, state):
        record.append(counter.total, op.expectation(state), _fid(state, ref))

    prev = record.final_energy
    best, stale = prev, 0
    for sweep in range(cfg.max_sweeps):
        params, _ = ubos_sweep(circuit, params, op, cfg, counter, sweep=sweep, on_update=on_update)
        record.sweeps = sweep + 1
        cur = record.final_energy
        if cfg.stop_below is not None and cur <= cfg.stop_below:
            record.converged = True
            break
        if abs(prev - cur) < cfg.energy_tolerance:
            record.converged = True
            break
        if not cfg.noise.is_exact:
            if cur < best - cfg.energy_tolerance:
                best, stale = cur, 0
            else:
                stale += 1
                if stale >= cfg.plateau_window:
                    record.converged = True
                    break
        prev = cur
    record.params = params
    return record


# --- gradients and SGD ------------------------------------------------------


def _noisy_components(comps, coefficients, noise, rng):
    """Combine per-term transition values ``(n_terms, ...)`` after noise."""
    if noise.mode == "shots":
        re = shot_estimate(comps.real, noise.shots, rng)
        im = shot_estimate(comps.imag, noise.shots, rng)
        return np.tensordot(coefficients, re + 1j * im, axes=1)
    vals = np.tensordot(coefficients, comps, axes=1)
    if noise.mode == "gaussian" and noise.sigma > 0:
        vals = vals + rng.normal(0, noise.sigma, vals.shape) + 1j * rng.normal(0, noise.sigma, vals.shape)
    return vals


def transition_gradients(circuit: Circuit, params, op: PauliSumOperator, noise: NoiseSpec | None = None, key=()):
    """``g[j][a] = <psi| H |psi_j^a>`` for every slot, by one backward pass."""
    noise = noise or NoiseSpec()
    unitaries = _unitaries(circuit, params)
    lefts = [zero_state(circuit.n_qubits)]
    for j, slot in enumerate(circuit.slots[:-1]):
        lefts.append(apply_gate(lefts[-1], unitaries[j], slot.qubits))
    psi = apply_gate(lefts[-1], unitaries[-1], circuit.slots[-1].qubits)
    per_term = noise.mode == "shots"
    lam = np.array([op.apply_term(i, psi) for i in range(op.n_terms)]) if per_term else op.apply(psi)
    grads = [None] * circuit.n_slots
    for j in range(circuit.n_slots - 1, -1, -1):
        slot = circuit.slots[j]
        basis = slot.family.basis.elements
        if per_term:
            envs = np.array([reduced_operator(l, lefts[j], slot.qubits) for l in lam])
            comps = np.einsum("axy,kxy->ka", basis, envs)
            grads[j] = _noisy_components(comps, op.coefficients, noise, noise.rng(j, *key))
        else:
            env = reduced_operator(lam, lefts[j], slot.qubits)
            vals = np.einsum("axy,xy->a", basis, env)
            grads[j] = _noisy_components(vals[None, :], np.ones(1), noise, noise.rng(j, *key))
        lam = apply_gate(lam, unitaries[j].conj().T, slot.qubits)
    return grads, psi


def energy_gradient(circuit: Circuit, params, op: PauliSumOperator, noise: NoiseSpec | None = None, key=()):
    """Per-slot ``dE/dparams = 2 Re(sum_a dt_a/dparam <psi|H|psi^a>)``."""
    g, psi = transition_gradients(circuit, params, op, noise, key)
    out = []
    for slot, p, gj in zip(circuit.slots, params, g):
        dt = fast_coefficient_gradients(slot.family, p)
        out.append(2 * np.real(gj @ dt))
    return out, psi


def sgd_step(
    circuit: Circuit,
    params,
    op: PauliSumOperator,
    learning_rate: float = 0.05,
    counter: EVCounter | None = None,
    noise: NoiseSpec | None = None,
    key=(),
):
    """One full-batch gradient step on every gate simultaneously."""
    grads, _ = energy_gradient(circuit, params, op, noise, key)
    if counter is not None:
        counter.record(sum(s.family.basis.size for s in circuit.slots), op.n_terms)
    return [np.asarray(p, dtype=float) - learning_rate * g for p, g in zip(params, grads)]


def sgd_gate_update(circuit: Circuit, params, op: PauliSumOperator, j: int, learning_rate: float = 0.05, noise=None, key=()):
    """Gradient step on slot ``j`` only."""
    grads, _ = energy_gradient(circuit, params, op, noise, key)
    out = _copy_params(params)
    out[j] = out[j] - learning_rate * grads[j]
    return out


def run_sgd(circuit: Circuit, init_params, op: PauliSumOperator, cfg: SGDConfig | None = None) -> RunRecord:
    cfg = cfg or SGDConfig()
    ref = _reference(op, cfg.record_fidelity)
    counter = EVCounter()
    record = RunRecord("sgd")
    params = _copy_params(init_params)
    state = run_from(zero_state(circuit.n_qubits), circuit, _unitaries(circuit, params), 0, circuit.n_slots)
    prev = op.expectation(state)
    record.append(0, prev, _fid(state, ref))
    for step in range(cfg.max_steps):
        params = sgd_step(circuit, params, op, cfg.learning_rate, counter, cfg.noise, key=(step,))
        state = run_from(zero_state(circuit.n_qubits), circuit, _unitaries(circuit, params), 0, circuit.n_slots)
        cur = op.expectation(state)
        record.append(counter.total, cur, _fid(state, ref))
        record.sweeps = step + 1
        if cfg.stop_below is not None and cur <= cfg.stop_below:
            record.converged = True
            break
        if abs(prev - cur) < cfg.energy_tolerance:
            record.converged = True
            break
        prev = cur
    record.params = params
    return record


# --- TUBOS ------------------------------------------------------------------


def _overlap_vector(circuit, unitaries, j, target, components=None, weights=None, noise=None, key=()):
    """``v[a] = <psi'^a| target>`` for slot ``j`` of the moving circuit."""
    slot = circuit.slots[j]
    left = run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, j)
    basis = slot.family.basis.elements
    if components is None:
        lam = target
        for i in range(circuit.n_slots - 1, j, -1):
            lam = apply_gate(lam, unitaries[i].conj().T, circuit.slots[i].qubits)
        env = reduced_operator(lam, left, slot.qubits)
        vals = np.conj(np.einsum("axy,xy->a", basis, env))
        if noise is not None and noise.mode == "gaussian" and noise.sigma > 0:
            rng = noise.rng(j, *key)
            vals = vals + rng.normal(0, noise.sigma, vals.shape) + 1j * rng.normal(0, noise.sigma, vals.shape)
        return vals
    lam = components
    for i in range(circuit.n_slots - 1, j, -1):
        lam = apply_gate(lam, unitaries[i].conj().T, circuit.slots[i].qubits)
    envs = np.array([reduced_operator(l, left, slot.qubits) for l in lam])
    comps = np.conj(np.einsum("axy,kxy->ka", basis, envs))
    return _noisy_components(comps, weights, noise, noise.rng(j, *key))


def tubos_step(
    circuit: Circuit,
    prev_params,
    op: PauliSumOperator,
    cfg: TimeEvoConfig | None = None,
    counter: EVCounter | None = None,
    *,
    step: int = 0,
    method: str = "tubos",
    trace: list | None = None,
):
    """Advance one imaginary-time step; returns the new parameters.

    Starting from the previous parameters, each of ``r`` sweeps maximizes
    ``|<psi(new)| 1 - beta/n H |psi(prev)>|`` gate by gate (``tubos``) or takes
    one ascent step of that magnitude per gate (``tsgd``).
    """
    cfg = cfg or TimeEvoConfig()
    prev = run_from(zero_state(circuit.n_qubits), circuit, _unitaries(circuit, prev_params), 0, circuit.n_slots)
    eps = cfg.beta_over_n
    noise = cfg.noise
    if noise.mode == "shots":
        components = np.array([prev] + [op.apply_term(i, prev) for i in range(op.n_terms)])
        weights = np.concatenate([[1.0], -eps * op.coefficients])
        target = None
    else:
        components = weights = None
        target = prev - eps * op.apply(prev)
    params = _copy_params(prev_params)
    unitaries = _unitaries(circuit, params)
    for sweep in range(cfg.r):
        for position, j in enumerate(sweep_order(circuit, cfg.shuffle_order, cfg.seed, step * cfg.r + sweep)):
            key = (step, sweep, position)
            family = circuit.slots[j].family
            v = _overlap_vector(circuit, unitaries, j, target, components, weights, noise, key)
            if counter is not None:
                counter.record(family.basis.size, op.n_terms + 1)
            if method == "tubos":
                rng = np.random.default_rng([cfg.optimizer.seed, *key])
                res = maximize_overlap(v, family, params[j], cfg.optimizer, rng=rng)
                params[j] = np.asarray(res.params, dtype=float)
                value = res.value
            else:
                t = fast_coefficients(family, params[j])
                dt = fast_coefficient_gradients(family, params[j])
                f = np.vdot(t, v)
                grad = np.real(np.conj(f) * (dt.conj().T @ v)) / max(abs(f), 1e-300)
                params[j] = params[j] + cfg.learning_rate * grad
                value = abs(np.vdot(fast_coefficients(family, params[j]), v))
            unitaries[j] = fast_unitary(family, params[j])
            if trace is not None:
                trace.append(float(value))
    return params


def run_tubos(circuit: Circuit, init_params, op: PauliSumOperator, cfg: TimeEvoConfig | None = None, method: str = "tubos") -> RunRecord:
    """Imaginary-time evolution of the circuit state.

    ``extras`` holds the exact reference trajectory (repeated application of
    ``1 - beta/n H`` to the initial state), the per-step fidelity against the
    exact normalized one-step target, and the overlap objective trace of each
    step.
    """
    if method not in ("tubos", "tsgd"):
        raise ValueError("method must be 'tubos' or 'tsgd'")
    cfg = cfg or TimeEvoConfig()
    counter = EVCounter()
    record = RunRecord(method)
    params = _copy_params(init_params)
    state = run_from(zero_state(circuit.n_qubits), circuit, _unitaries(circuit, params), 0, circuit.n_slots)
    record.append(0, op.expectation(state))
    exact = state.copy()
    reference = [op.expectation(exact)]
    step_fidelity, traces = [], []
    for step in range(cfg.n_steps):
        target = state - cfg.beta_over_n * op.apply(state)
        target /= np.linalg.norm(target)
        trace: list[float] = []
        params = tubos_step(circuit, params, op, cfg, counter, step=step, method=method, trace=trace)
        state = run_from(zero_state(circuit.n_qubits), circuit, _unitaries(circuit, params), 0, circuit.n_slots)
        fid = float(min(1.0, abs(np.vdot(target, state)) ** 2))
        record.append(counter.total, op.expectation(state), fid)
        step_fidelity.append(fid)
        traces.append(trace)
        exact = exact - cfg.beta_over_n * op.apply(exact)
        exact /= np.linalg.norm(exact)
        reference.append(op.expectation(exact))
        record.sweeps += cfg.r
    record.params = params
    record.extras = {"reference_energies": reference, "step_fidelity": step_fidelity, "objective_traces": traces}
    return record


def exact_imaginary_time(op: PauliSumOperator, psi0: np.ndarray, beta_over_n: float, n_steps: int) -> list[float]:
    """Energies along ``psi <- (1 - beta/n H) psi / norm``."""
    psi = np.asarray(psi0, dtype=complex) / np.linalg.norm(psi0)
    out = [op.expectation(psi)]
    for _ in range(n_steps):
        psi = psi - beta_over_n * op.apply(psi)
        psi /= np.linalg.norm(psi)
        out.append(op.expectation(psi))
    return out


# --- barren plateau ----------------------------------------------------------


def barren_plateau_experiment(
    site_list: Sequence[int],
    layers: int,
    n_ansatze: int,
    noise_levels: Sequence[float] = (),
    rng: np.random.Generator | int | None = None,
    *,
    family=None,
    optimizer: OptimizerConfig | None = None,
    learning_rate: float = 0.05,
    boundary: str = "open",
) -> list[dict]:
    """Gradient statistics and single-step energy changes at the middle gate.

    For every system size: the per-parameter gradient variance over random
    initializations, the mean energy change of one UBOS update of the middle
    gate (exact and with Gaussian-noised ``H~``), and the mean change of one
    gradient step on that gate (exact and with Gaussian-noised gradients).
    """
    from .gates import gate_family
    from .pauli import build_xxz
    from .simulator import build_brick_circuit

    family = family or gate_family("generic")
    optimizer = optimizer or OptimizerConfig()
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(seed) if not isinstance(rng, np.random.Generator) else rng
    table = []
    for n in site_list:
        op = build_xxz(n, boundary)
        circuit = build_brick_circuit(n, layers, family)
        mid = circuit.n_slots // 2
        grads, ubos_de = [], {0.0: []}
        sgd_de = {0.0: []}
        for s in noise_levels:
            ubos_de[s], sgd_de[s] = [], []
        for trial in range(n_ansatze):
            params = circuit.random_params(rng)
            unitaries = _unitaries(circuit, params)
            g, psi = energy_gradient(circuit, params, op)
            e0 = op.expectation(psi)
            grads.append(g[mid])
            for sigma in [0.0, *noise_levels]:
                noise = NoiseSpec("gaussian", sigma=sigma, seed=trial) if sigma > 0 else NoiseSpec()
                p = _copy_params(params)
                u = list(unitaries)
                state, _ = ubos_gate_update(circuit, p, u, mid, op, noise, optimizer, key=(n, trial))
                ubos_de[sigma].append(op.expectation(state) - e0)
                p2 = sgd_gate_update(circuit, params, op, mid, learning_rate, noise, key=(n, trial))
                e2 = op.expectation(run_from(zero_state(n), circuit, _unitaries(circuit, p2), 0, circuit.n_slots))
                sgd_de[sigma].append(e2 - e0)
        grads = np.array(grads)
        table.append(
            {
                "n_sites": n,
                "middle_slot": mid,
                "grad_variance": grads.var(axis=0, ddof=1),
                "grad_mean_abs": np.abs(grads).mean(axis=0),
                "ubos_dE": {s: float(np.mean(v)) for s, v in ubos_de.items()},
                "sgd_dE": {s: float(np.mean(v)) for s, v in sgd_de.items()},
            }
        )
    return table
