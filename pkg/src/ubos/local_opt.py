"""Classical optimization of a single gate against its effective Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.optimize

from . import _kernels
from .gates import GateFamily, coefficient_gradients

METHODS = ("nelder_mead", "gradient_on_h_tilde", "powell")


@dataclass
class OptimizerConfig:
    """Settings for the per-gate classical optimizer.

    ``restarts`` counts the warm start; the remaining starts are drawn
    uniformly from ``[0, pi)`` for every parameter.
    """

    method: str = "nelder_mead"
    restarts: int = 4
    max_evals: int = 4000
    tolerance: float = 1e-10
    seed: int = 0
    step: float = 0.1
    learning_rate: float = 0.05

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")


@dataclass
class OptResult:
    params: np.ndarray
    value: float
    evals_used: int
    start_index: int
    converged: bool = True
    start_values: list[float] = field(default_factory=list)


@lru_cache(maxsize=None)
def compiled_family(family: GateFamily):
    """Flatten a family into the array form used by the compiled kernels."""
    kinds, offsets, template, free_pos = [], [0], [], []
    for part in family.parts:
        n_full = len(part.full_params(np.zeros(len(part.free_indices))))
        base = offsets[-1]
        kinds.append(_kernels.KIND_CODES[part.kind])
        full = part.full_params(np.zeros(len(part.free_indices)))
        template.extend(full)
        free_pos.extend(base + i for i in part.free_indices)
        offsets.append(base + n_full)
    return (
        np.array(kinds, dtype=np.int64),
        np.array(offsets, dtype=np.int64),
        np.array(template, dtype=float),
        np.array(free_pos, dtype=np.int64),
        np.ascontiguousarray(family.basis.projector, dtype=complex),
    )


def fast_coefficients(family: GateFamily, params) -> np.ndarray:
    return _kernels.coefficients(np.asarray(params, dtype=float), *compiled_family(family))


def fast_unitary(family: GateFamily, params) -> np.ndarray:
    kinds, offsets, template, free_pos, _ = compiled_family(family)
    return _kernels.family_unitary(np.asarray(params, dtype=float), kinds, offsets, template, free_pos)


def fast_coefficient_gradients(family: GateFamily, params) -> np.ndarray:
    """Compiled ``coefficient_gradients``: ``(k, n_params)`` matrix of ``dt/dparam``."""
    return _kernels.coefficient_gradients(np.asarray(params, dtype=float), *compiled_family(family))


def _matrix(h) -> np.ndarray:
    return np.asarray(getattr(h, "matrix", h), dtype=complex)


def gate_energy(t, h, atol: float = 1e-10) -> float:
    """``t^dag H t``; raises if the quadratic form has an imaginary part."""
    t = np.asarray(t, dtype=complex)
    m = _matrix(h)
    if m.shape != (t.shape[0], t.shape[0]):
        raise ValueError(f"H~ shape {m.shape} does not match {t.shape[0]} coefficients")
    value = np.vdot(t, m @ t)
    if abs(value.imag) > atol * max(1.0, abs(value.real)):
        raise ValueError(f"t^dag H t has imaginary part {value.imag:.3e}; H~ is not Hermitian")
    return float(value.real)


def _start_points(family, warm_start, cfg, rng):
    starts = [np.asarray(warm_start, dtype=float).copy()]
    for _ in range(cfg.restarts - 1):
        starts.append(family.random_params(rng))
    return starts


def _run_method(x0, mode, target, family, cfg):
    arrays = compiled_family(family)
    if cfg.method == "nelder_mead":
        x, f, evals, ok = _kernels.nelder_mead(
            x0, cfg.step, cfg.tolerance, cfg.max_evals, mode, target, *arrays
        )
        return x, float(f), int(evals), bool(ok)

    def fun(x):
        return _kernels.objective(np.asarray(x, dtype=float), mode, target, *arrays)

    if cfg.method == "powell":
        res = scipy.optimize.minimize(
            fun, x0, method="Powell", options={"maxfev": cfg.max_evals, "ftol": cfg.tolerance}
        )
        x, f = res.x, float(res.fun)
        if f > fun(x0):
            x, f = x0, float(fun(x0))
        return x, f, int(res.nfev), bool(res.success)

    # fixed-step descent on the analytic gradient of the classical objective
    x = x0.copy()
    best_x, best_f = x.copy(), float(fun(x))
    prev = best_f
    evals, ok = 1, False
    while evals < cfg.max_evals:
        t = fast_coefficients(family, x)
        dt = coefficient_gradients(family, x)
        if mode == _kernels.MODE_ENERGY:
            grad = 2 * np.real(np.conj(t) @ target @ dt)
        else:
            f = np.vdot(t, target[0])
            grad = -np.real(np.conj(f) * (dt.conj().T @ target[0])) / max(abs(f), 1e-300)
        x = x - cfg.learning_rate * grad
        cur = float(fun(x))
        evals += 1
        if cur < best_f:
            best_x, best_f = x.copy(), cur
        if abs(prev - cur) < cfg.tolerance:
            ok = True
            break
        prev = cur
    return best_x, best_f, evals, ok


def _optimize(mode, target, family, warm_start, cfg, rng):
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    best = None
    total, values = 0, []
    for i, x0 in enumerate(_start_points(family, warm_start, cfg, rng)):
        x, f, evals, ok = _run_method(x0, mode, target, family, cfg)
        total += evals
        values.append(f)
        # strict '<' keeps the lowest start index on ties
        if best is None or f < best[1]:
            best = (x, f, i, ok)
    x, f, i, ok = best
    return OptResult(np.asarray(x), f, total, i, ok, values)


def minimize_gate(h, family: GateFamily, warm_start, cfg: OptimizerConfig | None = None, rng=None) -> OptResult:
    """Minimize ``t(params)^dag H~ t(params)`` over the family's parameters.

    The warm start is always the first candidate, so with an exact ``H~`` the
    returned value never exceeds the warm-start energy.
    """
    cfg = cfg or OptimizerConfig()
    m = _matrix(h)
    k = family.basis.size
    if m.shape != (k, k):
        raise ValueError(f"H~ is {m.shape}, family {family.name} has a {k}-element basis")
    if np.shape(warm_start) != (family.param_count,):
        raise ValueError(f"warm start must have {family.param_count} parameters")
    return _optimize(_kernels.MODE_ENERGY, np.ascontiguousarray(m), family, warm_start, cfg, rng)


def maximize_overlap(v, family: GateFamily, warm_start, cfg: OptimizerConfig | None = None, rng=None) -> OptResult:
    """Maximize ``|sum_a conj(t[a]) v[a]|``; ``value`` is the achieved magnitude."""
    cfg = cfg or OptimizerConfig()
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape[0] != family.basis.size:
        raise ValueError(f"overlap vector has {v.shape[0]} entries, basis has {family.basis.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("overlap vector must be finite")
    warm = np.asarray(warm_start, dtype=float)
    if not np.any(v):
        return OptResult(warm.copy(), 0.0, 0, 0, True, [0.0])
    res = _optimize(_kernels.MODE_OVERLAP, np.ascontiguousarray(v[None, :]), family, warm, cfg, rng)
    res.value = -res.value
    res.start_values = [-x for x in res.start_values]
    return res


def generalized_lower_bound(h, s, rtol: float = 1e-10) -> float:
    """Smallest eigenvalue of ``H~ t = E S~ t`` on the range of ``S~``.

    ``S~`` is a Gram matrix and usually singular; directions with eigenvalue
    below ``rtol * max`` are projected out (``H~`` vanishes on them too).
    """
    hm, sm = _matrix(h), _matrix(s)
    sm = (sm + sm.conj().T) / 2
    w, vecs = np.linalg.eigh(sm)
    scale = max(abs(w).max(), 1e-300)
    if w.min() < -1e-8 * scale:
        raise ValueError(f"S~ is indefinite (smallest eigenvalue {w.min():.3e})")
    keep = w > rtol * scale
    basis = vecs[:, keep] / np.sqrt(w[keep])
    reduced = basis.conj().T @ hm @ basis
    return float(scipy.linalg.eigvalsh((reduced + reduced.conj().T) / 2)[0])
