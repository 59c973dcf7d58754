"""Command-line interface: discretize, solve, sweep, converge, fit, validate.

Every run writes its fully resolved configuration (no implicit defaults)
both into ``metadata.json`` and as a re-ingestable ``config.echo.ini``,
so any output can be reproduced byte-for-byte from its own echo.
Exit codes: 0 success, 1 runtime/convergence failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    MODE_COLUMNS,
    convergence_study,
    detect_transition,
    fit_exponential,
    fit_log_form,
    fit_power_law,
    mode_rows,
    sweep_alpha,
    write_records_csv,
)
from .ansatz import ModelParams, save_state
from .bath import MeshSpec
from .errors import (
    DomainError,
    FitError,
    OptimizationFailure,
    ParameterError,
    SchemaError,
    SpinBosonError,
)
from .observables import bath_observables, check_symmetry, spin_observables
from .optimizer import AnnealSchedule, OptimizerOptions, multi_start
from .oracle import validation_gate
from .reporting import read_csv_columns, write_csv, write_json

OUTPUT_ROOT_ENV = "SPINBOSON_OUTPUT_ROOT"

# section -> key -> (python type, default); the single source of config truth
CONFIG_SPEC = {
    "model": {"epsilon": (float, 0.0), "delta": (float, 0.01)},
    "bath": {
        "scheme": (str, "log"),
        "s": (float, 1.0),
        "alpha": (float, 0.5),
        "lambda": (float, 1.01),
        "modes": (int, 1000),
    },
    "optimizer": {
        "states": (int, 6),
        "starts": (int, 16),
        "grad_tol": (float, 1e-9),
        "energy_tol": (float, 0.0),
        "max_iters": (int, 50_000),
        "seed": (int, 0),
        "spread": (float, 1.0),
        "workers": (int, 0),  # 0 = all available cores
        "anneal": (str, "off"),
        "degeneracy_tol": (float, 1e-8),
        "log_every": (int, 0),
    },
    "sweep": {"alphas": (str, "0.5:1.3:0.1"), "warm_start": (bool, True)},
    "converge": {"axis": (str, "N"), "values": (str, "1,2,3,4,5,6")},
    "fit": {
        "model": (str, "power"),
        "input": (str, ""),
        "x_col": (str, "x"),
        "y_col": (str, "y"),
        "window": (str, ""),
    },
    "validate": {"n_states": (int, 100), "tol": (float, 1e-9), "gate_seed": (int, 20240810)},
    "output": {"dir": (str, ".")},
}

# argparse dest -> (section, key)
FLAG_MAP = {
    "epsilon": ("model", "epsilon"),
    "delta": ("model", "delta"),
    "scheme": ("bath", "scheme"),
    "s": ("bath", "s"),
    "alpha": ("bath", "alpha"),
    "Lambda": ("bath", "lambda"),
    "M": ("bath", "modes"),
    "N": ("optimizer", "states"),
    "n_starts": ("optimizer", "starts"),
    "grad_tol": ("optimizer", "grad_tol"),
    "energy_tol": ("optimizer", "energy_tol"),
    "max_iters": ("optimizer", "max_iters"),
    "seed": ("optimizer", "seed"),
    "spread": ("optimizer", "spread"),
    "workers": ("optimizer", "workers"),
    "anneal": ("optimizer", "anneal"),
    "degeneracy_tol": ("optimizer", "degeneracy_tol"),
    "log_every": ("optimizer", "log_every"),
    "alphas": ("sweep", "alphas"),
    "warm_start": ("sweep", "warm_start"),
    "axis": ("converge", "axis"),
    "values": ("converge", "values"),
    "fit_model": ("fit", "model"),
    "input": ("fit", "input"),
    "x_col": ("fit", "x_col"),
    "y_col": ("fit", "y_col"),
    "window": ("fit", "window"),
    "n_states": ("validate", "n_states"),
    "tol": ("validate", "tol"),
    "gate_seed": ("validate", "gate_seed"),
    "out": ("output", "dir"),
}


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"cannot parse boolean {text!r}")


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags, all types coerced."""
    resolved = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in CONFIG_SPEC.items()}
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        read = parser.read(args.config)
        if not read:
            raise ParameterError(f"config file {args.config} not found")
        for sec in parser.sections():
            if sec not in CONFIG_SPEC:
                raise ParameterError(f"unknown config section [{sec}]")
            for key, raw in parser.items(sec):
                if key not in CONFIG_SPEC[sec]:
                    raise ParameterError(f"unknown config key {key!r} in [{sec}]")
                typ = CONFIG_SPEC[sec][key][0]
                try:
                    resolved[sec][key] = _parse_bool(raw) if typ is bool else typ(raw)
                except ValueError:
                    raise ParameterError(f"bad value {raw!r} for [{sec}] {key}") from None
    for dest, (sec, key) in FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            resolved[sec][key] = value
    return resolved


def parse_alpha_grid(spec: str) -> np.ndarray:
    """Either 'start:stop:step' (inclusive ends) or a comma list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ParameterError(f"grid spec {spec!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ParameterError("grid step must be > 0")
        return np.arange(start, stop + 0.5 * step, step)
    return np.array([float(p) for p in spec.split(",") if p.strip()])


def parse_anneal(spec: str) -> AnnealSchedule | None:
    spec = spec.strip().lower()
    if spec in ("", "off", "none"):
        return None
    parts = [p for p in spec.split(",") if p.strip()]
    if len(parts) != 5:
        raise ParameterError("anneal spec must be t0,decay,steps,levels,scale or 'off'")
    return AnnealSchedule(
        t_initial=float(parts[0]), decay=float(parts[1]), steps=int(parts[2]),
        levels=int(parts[3]), proposal_scale=float(parts[4]),
    )


def parse_window(spec: str):
    spec = spec.strip()
    if not spec:
        return None
    parts = spec.split(",")
    if len(parts) != 2:
        raise ParameterError("window must be 'lo,hi'")
    return (float(parts[0]), float(parts[1]))


def _outdir(cfg) -> Path:
    out = Path(cfg["output"]["dir"])
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mesh_spec(cfg) -> MeshSpec:
    bath = cfg["bath"]
    ratio = bath["lambda"] if bath["scheme"] == "log" else None
    return MeshSpec(scheme=bath["scheme"], n_modes=bath["modes"], ratio=ratio, s=bath["s"])


def _model(cfg) -> ModelParams:
    return ModelParams(bias=cfg["model"]["epsilon"], tunneling=cfg["model"]["delta"])


def _opts(cfg) -> OptimizerOptions:
    o = cfg["optimizer"]
    workers = o["workers"] if o["workers"] > 0 else (os.cpu_count() or 1)
    return OptimizerOptions(
        grad_tol=o["grad_tol"], energy_tol=o["energy_tol"], max_iters=o["max_iters"],
        n_starts=o["starts"], n_terms=o["states"], anneal=parse_anneal(o["anneal"]),
        seed=o["seed"], spread=o["spread"], workers=workers, log_every=o["log_every"],
    )


def _echo_ini(cfg) -> str:
    parser = configparser.ConfigParser()
    for sec, keys in cfg.items():
        parser[sec] = {k: ("true" if v is True else "false" if v is False else str(v))
                       for k, v in keys.items()}
    import io

    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _write_run_files(outdir: Path, command: str, cfg):
    from .reporting import atomic_write_text

    atomic_write_text(outdir / "config.echo.ini", _echo_ini(cfg))
    write_json(outdir / "metadata.json", {
        "command": command,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": cfg,
    })


def cmd_discretize(cfg) -> int:
    outdir = _outdir(cfg)
    bath = _mesh_spec(cfg).build(cfg["bath"]["alpha"])
    rows = zip(range(bath.n_modes), bath.omegas, bath.couplings, bath.edges_lo, bath.edges_hi)
    write_csv(outdir / "mesh.csv", ("k", "omega_k", "lambda_k", "interval_lo", "interval_hi"), rows)
    _write_run_files(outdir, "discretize", cfg)
    print(outdir / "mesh.csv")
    return 0


def cmd_solve(cfg) -> int:
    outdir = _outdir(cfg)
    params = _model(cfg)
    mesh = _mesh_spec(cfg)
    bath = mesh.build(cfg["bath"]["alpha"])
    opts = _opts(cfg)
    try:
        sol = multi_start(params, bath, opts)
    except OptimizationFailure as exc:
        write_json(outdir / "failure.json", {"error": str(exc), "diagnostics": exc.diagnostics})
        print(f"optimization failed: {exc}", file=sys.stderr)
        return 1

    spin = spin_observables(sol.state)
    sym = check_symmetry(sol, params, bath,
                         degeneracy_tol=cfg["optimizer"]["degeneracy_tol"], opts=opts)
    bundle = bath_observables(sol.state)
    avg = bundle.averages

    save_state(outdir / "state.json", sol.state, seed=opts.seed,
               mesh_fingerprint=bath.fingerprint())
    write_csv(outdir / "modes.csv", MODE_COLUMNS, mode_rows(bath, bundle))
    write_csv(outdir / "correlations.csv", ("k", "l", "cor_x", "cor_p"),
              ((k, l, bundle.cor_x[l][k], bundle.cor_p[l][k])
               for l in sorted(bundle.cor_x) for k in range(bath.n_modes)))
    write_json(outdir / "summary.json", {
        "alpha": cfg["bath"]["alpha"],
        "energy": sol.energy,
        "grad_norm": sol.grad_norm,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "start_index": sol.start_index,
        "seed": opts.seed,
        "sigma_z": spin.sigma_z,
        "sigma_x": spin.sigma_x,
        "sigma_y": spin.sigma_y,
        "entropy_nats": spin.entropy,
        "entropy_bits": spin.entropy_bits,
        "zeta": sym.zeta,
        "parity": sym.parity,
        "degenerate": sym.degenerate,
        "parity_partner_energy": sym.partner_min_energy,
        "weight_up": avg.weight_up,
        "weight_down": avg.weight_down,
        "omega_min": bath.omega_min,
        "mesh_fingerprint": bath.fingerprint(),
    })
    _write_run_files(outdir, "solve", cfg)
    print(f"E = {sol.energy:.12g}  (converged={sol.converged}, zeta={sym.zeta:.4g})")
    return 0


def cmd_sweep(cfg) -> int:
    outdir = _outdir(cfg)
    params = _model(cfg)
    mesh = _mesh_spec(cfg)
    opts = _opts(cfg)
    alphas = parse_alpha_grid(cfg["sweep"]["alphas"])
    modes_dir = outdir / "modes"
    modes_dir.mkdir(parents=True, exist_ok=True)
    records = sweep_alpha(alphas, params, mesh, opts, outdir=modes_dir,
                          warm_start=cfg["sweep"]["warm_start"],
                          degeneracy_tol=cfg["optimizer"]["degeneracy_tol"], log=sys.stderr)
    write_records_csv(outdir / "records.csv", records)
    result = detect_transition(records)
    write_json(outdir / "transition.json", {
        "found": result.found,
        "alpha_c": result.alpha_c,
        "uncertainty": result.uncertainty,
        "last_high": result.last_high,
        "first_low": result.first_low,
        "stat_error": result.stat_error,
        "suspects": list(result.suspects),
        "omega_min": mesh.build(float(alphas[0])).omega_min,
    })
    _write_run_files(outdir, "sweep", cfg)
    if result.found:
        print(f"alpha_c = {result.alpha_c:.6g} +- {result.uncertainty:.6g}")
    else:
        print("no transition bracketed on this grid")
    return 0 if all(r.converged for r in records) else 1


def cmd_converge(cfg) -> int:
    outdir = _outdir(cfg)
    values = [int(v) for v in cfg["converge"]["values"].split(",") if v.strip()]
    study = convergence_study(cfg["bath"]["alpha"], _model(cfg), _mesh_spec(cfg),
                              cfg["converge"]["axis"], values, _opts(cfg), log=sys.stderr)
    write_csv(outdir / "convergence.csv", ("value", "energy", "shift"),
              zip(study.values, study.energies, study.shifts))
    write_json(outdir / "fit.json", _fit_payload(study.fit) if study.fit else None)
    _write_run_files(outdir, "converge", cfg)
    if study.fit:
        print(f"shift ~ {study.fit.params[0]:.4g} * exp(-{study.fit.params[1]:.4g} * {study.axis})")
    if not study.monotone:
        print(f"warning: energy increased at {study.flagged}; points look unconverged",
              file=sys.stderr)
        return 1
    return 0


def _fit_payload(fit):
    return {
        "model": fit.model,
        "params": list(fit.params),
        "residual": fit.residual,
        "window": list(fit.window) if fit.window else None,
        "y_at_zero": fit.y_at_zero,
    }


def cmd_fit(cfg) -> int:
    outdir = _outdir(cfg)
    fit_cfg = cfg["fit"]
    if not fit_cfg["input"]:
        raise ParameterError("fit requires --input CSV")
    data = read_csv_columns(fit_cfg["input"], (fit_cfg["x_col"], fit_cfg["y_col"]))
    xs, ys = data[fit_cfg["x_col"]], data[fit_cfg["y_col"]]
    window = parse_window(fit_cfg["window"])
    model = fit_cfg["model"]
    if model == "power":
        fit = fit_power_law(xs, ys, window=window)
    elif model == "exponential":
        fit = fit_exponential(xs, ys, window=window)
    elif model == "logform":
        if window is not None:
            mask = (xs >= window[0]) & (xs <= window[1])
            xs, ys = xs[mask], ys[mask]
        fit = fit_log_form(xs, ys)
    else:
        raise ParameterError(f"unknown fit model {model!r}")
    write_json(outdir / "fit.json", _fit_payload(fit))
    _write_run_files(outdir, "fit", cfg)
    print(f"{fit.model}: params={tuple(round(p, 10) for p in fit.params)} "
          f"residual={fit.residual:.3e}")
    return 0


def cmd_validate(cfg) -> int:
    outdir = _outdir(cfg)
    v = cfg["validate"]
    report = validation_gate(n_states=v["n_states"], seed=v["gate_seed"], tol=v["tol"])
    for line in report.lines():
        print(line)
    write_json(outdir / "validation.json", {
        "passed": report.passed,
        "tol": report.tol,
        "n_states": report.n_states,
        "max_errors": report.checks,
    })
    _write_run_files(outdir, "validate", cfg)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinboson",
        description="Variational ground states of the Ohmic spin-boson model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, bath=True, model=True, optim=True):
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--out", help="output directory (default '.')")
        if bath:
            p.add_argument("--scheme", choices=["log", "linear"])
            p.add_argument("--s", type=float, help="spectral exponent")
            p.add_argument("--alpha", type=float, help="coupling strength")
            p.add_argument("--Lambda", type=float, help="Wilson mesh parameter (> 1)")
            p.add_argument("--M", type=int, help="number of bath modes")
        if model:
            p.add_argument("--epsilon", type=float, help="energy bias")
            p.add_argument("--delta", type=float, help="tunneling amplitude")
        if optim:
            p.add_argument("--N", type=int, help="coherent superposition states")
            p.add_argument("--n-starts", dest="n_starts", type=int)
            p.add_argument("--grad-tol", dest="grad_tol", type=float)
            p.add_argument("--energy-tol", dest="energy_tol", type=float)
            p.add_argument("--max-iters", dest="max_iters", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--spread", type=float)
            p.add_argument("--workers", type=int, help="parallel restarts (0 = all cores)")
            p.add_argument("--anneal", help="t0,decay,steps,levels,scale or 'off'")
            p.add_argument("--degeneracy-tol", dest="degeneracy_tol", type=float)
            p.add_argument("--log-every", dest="log_every", type=int)

    p = sub.add_parser("discretize", help="emit the bath mesh as CSV")
    add_common(p, model=False, optim=False)

    p = sub.add_parser("solve", help="ground state + observables at one coupling")
    add_common(p)

    p = sub.add_parser("sweep", help="solve over a coupling grid, locate the jump")
    add_common(p)
    p.add_argument("--alphas", help="grid: 'start:stop:step' or comma list")
    p.add_argument("--no-warm-start", dest="warm_start", action="store_false", default=None)

    p = sub.add_parser("converge", help="energy convergence along N or M")
    add_common(p)
    p.add_argument("--axis", choices=["N", "M"])
    p.add_argument("--values", help="comma-separated ascending sizes")

    p = sub.add_parser("fit", help="fit a CSV with a power/exp/log form")
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--out", help="output directory (default '.')")
    p.add_argument("--model", dest="fit_model", choices=["power", "logform", "exponential"])
    p.add_argument("--input", help="input CSV")
    p.add_argument("--x-col", dest="x_col")
    p.add_argument("--y-col", dest="y_col")
    p.add_argument("--window", help="x window 'lo,hi'")

    p = sub.add_parser("validate", help="closed forms vs Fock-space oracle")
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--out", help="output directory (default '.')")
    p.add_argument("--n-states", dest="n_states", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--gate-seed", dest="gate_seed", type=int)

    return parser


COMMANDS = {
    "discretize": cmd_discretize,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "fit": cmd_fit,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ParameterError, SchemaError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OptimizationFailure, FitError, SpinBosonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
