"""Command-line experiment runner.

Every command writes its result table(s) as CSV plus ``manifest.txt`` into the
output directory (``--output``, else ``$UBOS_OUTPUT_DIR``, else ``results``).
The manifest uses the same ``key = value`` format as ``--config`` files, so a
run can be repeated with ``ubos <command> --config <dir>/manifest.txt``.
"""

from __future__ import annotations

import argparse
import csv
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .effective import NoiseSpec, rank_of_T
from .engine import (
    SGDConfig,
    SweepConfig,
    TimeEvoConfig,
    barren_plateau_experiment,
    energy_gradient,
    run_sgd,
    run_tubos,
    run_vqe,
    ubos_gate_update,
    ubos_sweep,
)
from .gates import FAMILY_NAMES, gate_family
from .local_opt import METHODS, OptimizerConfig
from .pauli import build_xxz, ground_state
from .simulator import build_brick_circuit, run_from, zero_state

OUTPUT_ENV = "UBOS_OUTPUT_DIR"
COMMANDS = ("vqe", "sgd", "tubos", "barren", "noise-scan", "single-gate", "rank", "compare")
NOT_REACHED = "not reached"


class ConfigError(ValueError):
    pass


def _int_list(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _bool(text):
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# dest -> (type, default, range check or None)
OPTIONS = {
    "sites": (int, 8, lambda v: 2 <= v <= 16),
    "layers": (int, 7, lambda v: v >= 1),
    "family": (str, "generic", lambda v: v in FAMILY_NAMES),
    "boundary": (str, "open", lambda v: v in ("open", "periodic")),
    "noise": (str, "exact", None),
    "seeds": (_int_list, [0], lambda v: len(v) > 0 and min(v) >= 0),
    "method": (str, "nelder_mead", lambda v: v in METHODS),
    "restarts": (int, 4, lambda v: v >= 1),
    "max_evals": (int, 4000, lambda v: v >= 1),
    "max_sweeps": (int, 50, lambda v: v >= 1),
    "energy_tolerance": (float, 1e-8, lambda v: v >= 0),
    "shuffle": (_bool, True, None),
    "record_fidelity": (_bool, True, None),
    "target": (float, 0.0, lambda v: v >= 0),
    "max_steps": (int, 5000, lambda v: v >= 1),
    "learning_rate": (float, 0.05, lambda v: v > 0),
    "beta_over_n": (float, 0.1, lambda v: v >= 0),
    "steps": (int, 20, lambda v: v >= 0),
    "r": (int, 10, lambda v: v >= 1),
    "evolution": (str, "tubos", lambda v: v in ("tubos", "tsgd")),
    "sigmas": (_float_list, [1e-3, 1e-2, 1e-1], lambda v: len(v) > 0 and min(v) >= 0),
    "site_list": (_int_list, [4, 8, 12], lambda v: len(v) > 0 and min(v) >= 2),
    "ansatze": (int, 100, lambda v: v >= 2),
    "slot": (int, -1, None),
    "warm_sweeps": (int, 2, lambda v: v >= 0),
}

COMMAND_OPTIONS = {
    "vqe": ["sites", "layers", "family", "boundary", "noise", "seeds", "method", "restarts", "max_evals",
            "max_sweeps", "energy_tolerance", "shuffle", "record_fidelity", "target"],
    "sgd": ["sites", "layers", "family", "boundary", "noise", "seeds", "max_steps", "learning_rate",
            "energy_tolerance", "record_fidelity", "target"],
    "tubos": ["sites", "layers", "family", "boundary", "noise", "seeds", "beta_over_n", "steps", "r",
              "evolution", "learning_rate"],
    "noise-scan": ["sites", "layers", "family", "boundary", "sigmas", "seeds", "method", "restarts",
                   "max_evals", "max_sweeps", "energy_tolerance", "shuffle", "record_fidelity"],
    "barren": ["site_list", "layers", "family", "boundary", "sigmas", "ansatze", "seeds", "learning_rate"],
    "single-gate": ["sites", "layers", "family", "boundary", "seeds", "slot", "warm_sweeps", "restarts",
                    "max_evals", "learning_rate"],
    "rank": ["family"],
}


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in ("command", "version"):
            continue
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        conv, _, check = OPTIONS[key]
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
        if check is not None and not check(parsed):
            raise ConfigError(f"{path}:{lineno}: {key} = {value} out of range")
        values[key] = parsed
    return values


def _format_value(v):
    if isinstance(v, list):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def write_manifest(outdir: Path, command: str, cfg: dict) -> Path:
    lines = [f"command = {command}", f"version = {version_string()}"]
    lines += [f"{k} = {_format_value(cfg[k])}" for k in COMMAND_OPTIONS[command]]
    path = outdir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if x is None else (repr(float(x)) if isinstance(x, (float, np.floating)) else x) for x in row])


def read_run_csv(path) -> list[tuple[int, float]]:
    """``(evs, energy_error)`` pairs of a vqe/sgd result file."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "evs" not in rows[0] or "energy_error" not in rows[0]:
        raise ConfigError(f"{path}: not a run table (need evs and energy_error columns)")
    return [(int(r["evs"]), float(r["energy_error"])) for r in rows]


def first_crossing(rows, target_total: float):
    for evs, err in rows:
        if err <= target_total:
            return evs
    return None


def compare_report(run_a, run_b, target: float, n_sites: int) -> dict:
    """First cumulative EV count where each run's energy error per site is at or
    below ``target``, and the ratio ``a / b``."""
    a = first_crossing(read_run_csv(run_a), target * n_sites)
    b = first_crossing(read_run_csv(run_b), target * n_sites)
    ratio = a / b if a is not None and b is not None and b > 0 else None
    return {"evs_a": a, "evs_b": b, "ratio": ratio}


def format_report(rep: dict) -> str:
    fmt = lambda v: NOT_REACHED if v is None else str(v)
    ratio = NOT_REACHED if rep["ratio"] is None else f"{rep['ratio']:.6g}"
    return f"run_a evs: {fmt(rep['evs_a'])}\nrun_b evs: {fmt(rep['evs_b'])}\nratio: {ratio}\n"


# --- commands ---------------------------------------------------------------


def _problem(cfg, n_sites=None):
    n = n_sites or cfg["sites"]
    op = build_xxz(n, cfg["boundary"])
    family = gate_family(cfg["family"])
    if family.n_qubits != 2:
        raise ConfigError(f"family {cfg['family']!r} is not a two-qubit gate")
    circuit = build_brick_circuit(n, cfg["layers"], family)
    return op, circuit, ground_state(op)[0]


def _optimizer(cfg, seed):
    return OptimizerConfig(
        method=cfg.get("method", "nelder_mead"), restarts=cfg["restarts"], max_evals=cfg["max_evals"], seed=seed
    )


def _run_rows(record, e0, fidelity=True):
    return [(r.update, r.evs, r.energy - e0, r.fidelity if fidelity else None) for r in record.rows]


def _ubos_run(cfg, seed, noise: NoiseSpec):
    op, circuit, e0 = _problem(cfg)
    init = circuit.random_params(np.random.default_rng(seed))
    sc = SweepConfig(
        max_sweeps=cfg["max_sweeps"],
        energy_tolerance=cfg["energy_tolerance"],
        shuffle_order=cfg["shuffle"],
        noise=noise,
        optimizer=_optimizer(cfg, seed),
        record_fidelity=cfg["record_fidelity"],
        seed=seed,
        stop_below=e0 + cfg["target"] * op.n_qubits if cfg.get("target") else None,
    )
    return run_vqe(circuit, init, op, sc), e0


RUN_HEADER = ["update", "evs", "energy_error", "fidelity"]


def cmd_vqe(cfg, outdir, pool):
    def job(seed):
        rec, e0 = _ubos_run(cfg, seed, NoiseSpec.parse(cfg["noise"], seed=seed))
        write_csv(outdir / f"vqe_seed{seed}.csv", RUN_HEADER, _run_rows(rec, e0))

    list(pool.map(job, cfg["seeds"]))


def cmd_noise_scan(cfg, outdir, pool):
    def job(item):
        sigma, seed = item
        noise = NoiseSpec("gaussian", sigma=sigma, seed=seed) if sigma > 0 else NoiseSpec()
        rec, e0 = _ubos_run(cfg, seed, noise)
        write_csv(outdir / f"noise_sigma{sigma!r}_seed{seed}.csv", RUN_HEADER, _run_rows(rec, e0))

    list(pool.map(job, [(s, seed) for s in cfg["sigmas"] for seed in cfg["seeds"]]))


def cmd_sgd(cfg, outdir, pool):
    def job(seed):
        op, circuit, e0 = _problem(cfg)
        init = circuit.random_params(np.random.default_rng(seed))
        sc = SGDConfig(
            max_steps=cfg["max_steps"],
            learning_rate=cfg["learning_rate"],
            energy_tolerance=cfg["energy_tolerance"],
            noise=NoiseSpec.parse(cfg["noise"], seed=seed),
            record_fidelity=cfg["record_fidelity"],
            stop_below=e0 + cfg["target"] * op.n_qubits if cfg["target"] else None,
        )
        rec = run_sgd(circuit, init, op, sc)
        write_csv(outdir / f"sgd_seed{seed}.csv", RUN_HEADER, _run_rows(rec, e0))

    list(pool.map(job, cfg["seeds"]))


def cmd_tubos(cfg, outdir, pool):
    def job(seed):
        op, circuit, e0 = _problem(cfg)
        init = circuit.random_params(np.random.default_rng(seed))
        tc = TimeEvoConfig(
            beta_over_n=cfg["beta_over_n"],
            n_steps=cfg["steps"],
            r=cfg["r"],
            noise=NoiseSpec.parse(cfg["noise"], seed=seed),
            optimizer=OptimizerConfig(restarts=1, seed=seed),
            seed=seed,
            learning_rate=cfg["learning_rate"],
        )
        rec = run_tubos(circuit, init, op, tc, method=cfg["evolution"])
        ref = rec.extras["reference_energies"]
        fid = [None] + rec.extras["step_fidelity"]
        rows = [(r.update, r.evs, r.energy - e0, ref[i] - e0, fid[i]) for i, r in enumerate(rec.rows)]
        header = ["step", "evs", "energy_error", "reference_energy_error", "step_fidelity"]
        write_csv(outdir / f"{cfg['evolution']}_seed{seed}.csv", header, rows)

    list(pool.map(job, cfg["seeds"]))


def cmd_barren(cfg, outdir, pool):
    def job(n):
        return barren_plateau_experiment(
            [n],
            cfg["layers"],
            cfg["ansatze"],
            cfg["sigmas"],
            np.random.default_rng([cfg["seeds"][0], n]),
            family=gate_family(cfg["family"]),
            optimizer=OptimizerConfig(seed=cfg["seeds"][0]),
            learning_rate=cfg["learning_rate"],
            boundary=cfg["boundary"],
        )[0]

    table = list(pool.map(job, cfg["site_list"]))
    write_csv(
        outdir / "barren_variance.csv",
        ["n_sites", "param", "grad_variance", "grad_mean_abs"],
        [(t["n_sites"], i, v, a) for t in table for i, (v, a) in enumerate(zip(t["grad_variance"], t["grad_mean_abs"]))],
    )
    rows = []
    for t in table:
        for sigma in t["ubos_dE"]:
            rows.append((t["n_sites"], sigma, t["ubos_dE"][sigma], t["sgd_dE"][sigma]))
    write_csv(outdir / "barren_delta_e.csv", ["n_sites", "sigma", "ubos_dE", "sgd_dE"], rows)


def cmd_single_gate(cfg, outdir, pool):
    """Optimizer comparison on one gate after a few warm-up sweeps."""

    def job(seed):
        op, circuit, e0 = _problem(cfg)
        params = circuit.random_params(np.random.default_rng(seed))
        for sweep in range(cfg["warm_sweeps"]):
            params, _ = ubos_sweep(circuit, params, op, SweepConfig(seed=seed), sweep=sweep)
        j = cfg["slot"] if cfg["slot"] >= 0 else circuit.n_slots // 2
        if j >= circuit.n_slots:
            raise ConfigError(f"slot {j} out of range (circuit has {circuit.n_slots} slots)")
        unitaries = circuit.unitaries(params)
        before = op.expectation(run_from(zero_state(circuit.n_qubits), circuit, unitaries, 0, circuit.n_slots))
        rows = []
        for method in METHODS:
            p = [x.copy() for x in params]
            opt = OptimizerConfig(method=method, restarts=cfg["restarts"], max_evals=cfg["max_evals"], seed=seed)
            state, res = ubos_gate_update(circuit, p, list(unitaries), j, op, NoiseSpec(), opt, key=(seed,))
            rows.append((seed, j, method, before - e0, op.expectation(state) - e0, res.evals_used))
        grads, _ = energy_gradient(circuit, params, op)
        p = [x.copy() for x in params]
        p[j] = p[j] - cfg["learning_rate"] * grads[j]
        after = op.expectation(run_from(zero_state(circuit.n_qubits), circuit, circuit.unitaries(p), 0, circuit.n_slots))
        rows.append((seed, j, "sgd_step", before - e0, after - e0, 1))
        return rows

    rows = [r for chunk in pool.map(job, cfg["seeds"]) for r in chunk]
    write_csv(
        outdir / "single_gate.csv", ["seed", "slot", "method", "energy_error_before", "energy_error_after", "evals"], rows
    )


def cmd_rank(cfg, outdir, pool):
    print(rank_of_T(gate_family(cfg["family"])))


RUNNERS = {
    "vqe": cmd_vqe,
    "sgd": cmd_sgd,
    "tubos": cmd_tubos,
    "noise-scan": cmd_noise_scan,
    "barren": cmd_barren,
    "single-gate": cmd_single_gate,
    "rank": cmd_rank,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ubos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMAND_OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file; command-line flags override it")
        if name != "rank":
            p.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
            p.add_argument("--jobs", type=int, default=1, help="worker threads for independent runs")
        for key in keys:
            flag = "--" + key.replace("_", "-")
            if key == "seeds":
                p.add_argument("--seeds", "--seed", dest="seeds", default=None, help="comma-separated seeds")
            else:
                p.add_argument(flag, dest=key, default=None)
    p = sub.add_parser("compare", help="compare EV counts of two vqe/sgd result files")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--target", type=float, default=1e-2, help="energy error per site")
    p.add_argument("--sites", type=int, required=True)
    return parser


def resolve_config(args) -> dict:
    cfg = {k: OPTIONS[k][1] for k in COMMAND_OPTIONS[args.command]}
    if args.config:
        file_values = read_config(args.config)
        cfg.update({k: v for k, v in file_values.items() if k in cfg})
    for key in COMMAND_OPTIONS[args.command]:
        raw = getattr(args, key)
        if raw is None:
            continue
        conv, _, check = OPTIONS[key]
        try:
            value = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from exc
        if check is not None and not check(value):
            raise ConfigError(f"--{key.replace('_', '-')} = {raw} out of range")
        cfg[key] = value
    if "noise" in cfg:
        try:
            NoiseSpec.parse(cfg["noise"])
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from exc
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            sys.stdout.write(format_report(compare_report(args.run_a, args.run_b, args.target, args.sites)))
            return 0
        cfg = resolve_config(args)
        if args.command == "rank":
            cmd_rank(cfg, None, None)
            return 0
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        outdir = Path(args.output or os.environ.get(OUTPUT_ENV) or "results")
        outdir.mkdir(parents=True, exist_ok=True)
        write_manifest(outdir, args.command, cfg)
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            RUNNERS[args.command](cfg, outdir, pool)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
