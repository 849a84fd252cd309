"""Command-line front end: run, sweep, validate, effective."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .effective import effective_model, verify_transform
from .measures import coherence_series, concurrence_series, measure_columns, time_average
from .model import ConfigError, config_from_dict, config_to_dict, validate_config
from .oracle import compare_trajectories, oracle_trajectory
from .presets import all_presets
from .propagator import evolve, initial_state, write_trajectory_csv
from .qsd import IntegrationError, IntegratorSettings

EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
RUN_KEYS = ("initial_state", "t_final", "dt", "sample_every", "engine")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise CliError(f"{path}: expected a JSON object")
    return doc


def build_config(doc: dict):
    """Config from a document; Gamma must be 1 since all inputs are in units of Gamma."""
    model_doc = {k: v for k, v in doc.items() if k not in RUN_KEYS}
    res = model_doc.get("reservoir", {})
    gamma_rate = res.get("Gamma") if isinstance(res, dict) else None
    gamma_rate = model_doc.get("reservoir.Gamma", gamma_rate)
    if gamma_rate is not None and float(gamma_rate) != 1.0:
        raise CliError("reservoir.Gamma must be 1: give all rates and frequencies in units of Gamma")
    try:
        cfg = config_from_dict(model_doc)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}") from None
    rep = validate_config(cfg)
    if not rep.ok:
        raise CliError(f"invalid config: {rep}")
    return cfg


def _settings(args, doc, M) -> IntegratorSettings:
    dt = args.dt if args.dt is not None else doc.get("dt", 1e-3 if M == 1 else 5e-3)
    every = args.sample_every if args.sample_every is not None else doc.get("sample_every", 1)
    try:
        return IntegratorSettings(dt=float(dt), sample_every=int(every))
    except ValueError as exc:
        raise CliError(str(exc)) from None


def simulate(cfg, state: str, t_final: float, settings: IntegratorSettings, engine: str):
    try:
        rho0 = initial_state(state, cfg.M)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if engine == "oracle":
        return oracle_trajectory(cfg, rho0, t_final, settings.dt, settings.sample_every)
    try:
        settings.num_steps(t_final)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    try:
        return evolve(cfg, rho0, t_final, settings)
    except IntegrationError as exc:
        raise CliError(f"integration failed: {exc}", EXIT_INTEGRATION) from None


def _metadata(cfg, engine, settings, t_final, state, traj=None, **extra) -> dict:
    meta = {
        "tool": "qnet",
        "version": __version__,
        "engine": engine,
        "config": config_to_dict(cfg),
        "initial_state": state,
        "t_final": t_final,
        "settings": {"dt": settings.dt, "sample_every": settings.sample_every, "scheme": settings.scheme,
                     "quadrature": settings.quadrature},
    }
    if traj is not None:
        meta["diagnostics"] = traj.diagnostics()
        meta["flags"] = traj.flags
    meta.update(extra)
    return meta


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args) -> int:
    doc = _read_json(args.config)
    engine = args.engine or doc.get("engine", "qsd")
    Ns = doc.get("N")
    loop = isinstance(Ns, list)
    out = Path(args.out) if args.out else Path(args.config).with_suffix(".csv")
    for N in Ns if loop else [Ns]:
        cfg = build_config({**doc, "N": N})
        settings = _settings(args, doc, cfg.M)
        t_final = float(args.t_final if args.t_final is not None else doc.get("t_final", 200.0))
        state = doc.get("initial_state", "plus" if cfg.M == 1 else "bell_plus")
        t0 = time.perf_counter()
        traj = simulate(cfg, state, t_final, settings, engine)
        wall = time.perf_counter() - t0
        path = out.with_name(f"{out.stem}_N{N}{out.suffix}") if loop else out
        path.parent.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(traj, path, measure_columns(traj))
        _write_json(path.with_suffix(".json"),
                    _metadata(cfg, engine, settings, t_final, state, traj, wall_seconds=wall))
        print(path)
    return 0


# -- sweeps --------------------------------------------------------------------


def _axis(spec, key):
    ax = spec.get(key)
    try:
        name, lo, hi, n = ax["name"], float(ax["min"]), float(ax["max"]), int(ax["count"])
    except (TypeError, KeyError, ValueError):
        raise CliError(f"sweep: {key} needs name, min, max, count") from None
    if n < 2:
        raise CliError(f"sweep: {key} count must be >= 2")
    if name in RUN_KEYS or name in ("M", "reservoir.kind"):
        raise CliError(f"sweep: {key} cannot vary {name!r}")
    return name, np.linspace(lo, hi, n)


def _sweep_point(task):
    doc, state, horizon, dt, engine, measure = task
    try:
        cfg = build_config(doc)
        traj = simulate(cfg, state, horizon, IntegratorSettings(dt=dt), engine)
        series = coherence_series(traj) if measure == "avg_coherence" else concurrence_series(traj)
        return time_average(series), None
    except Exception as exc:  # noqa: BLE001 - a failing point becomes a NaN row
        return float("nan"), str(exc)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    try:
        return max(1, int(os.environ.get("QNET_WORKERS", "1")))
    except ValueError:
        return 1


def cmd_sweep(args) -> int:
    spec = _read_json(args.spec)
    base = spec.get("base", {})
    if not isinstance(base, dict):
        raise CliError("sweep: base must be an object")
    n1, v1 = _axis(spec, "axis1")
    n2, v2 = _axis(spec, "axis2")
    base = {**base, **spec.get("fixed", {})}
    probe = build_config({**base, n1: float(v1[0]), n2: float(v2[0])})
    measure = spec.get("measure", "avg_coherence" if probe.M == 1 else "avg_concurrence")
    if measure not in ("avg_coherence", "avg_concurrence"):
        raise CliError(f"sweep: unknown measure {measure!r}")
    if measure == "avg_concurrence" and probe.M != 2:
        raise CliError("sweep: avg_concurrence needs M = 2")
    horizon = float(args.t_final if args.t_final is not None else spec.get("horizon", 200.0))
    dt = float(args.dt if args.dt is not None else spec.get("dt", 1e-3 if probe.M == 1 else 5e-3))
    engine = args.engine or spec.get("engine", "qsd")
    state = spec.get("initial_state", "plus" if probe.M == 1 else "bell_plus")
    tasks = [({**base, n1: float(a), n2: float(b)}, state, horizon, dt, engine, measure) for a in v1 for b in v2]
    workers = _workers(args)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    out = Path(args.out) if args.out else Path(args.spec).with_suffix(".csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([n1, n2, measure])
        for (doc, *_), (val, _) in zip(tasks, results):
            w.writerow([repr(doc[n1]), repr(doc[n2]), repr(val)])
    failures = [{n1: d[n1], n2: d[n2], "error": e} for (d, *_), (_, e) in zip(tasks, results) if e]
    meta = {
        "tool": "qnet",
        "version": __version__,
        "engine": engine,
        "base": config_to_dict(probe),
        "axes": {n1: v1.tolist(), n2: v2.tolist()},
        "measure": measure,
        "horizon": horizon,
        "dt": dt,
        "initial_state": state,
        "warnings": len(failures),
        "failures": failures,
    }
    _write_json(out.with_suffix(".json"), meta)
    if failures:
        print(f"warning: {len(failures)} sweep point(s) failed", file=sys.stderr)
    print(out)
    return 0


# -- validate / effective ----------------------------------------------------------


def cmd_validate(args) -> int:
    results = []
    for p in all_presets():
        if args.only and args.only not in p.name:
            continue
        t_final = min(p.t_final, args.t_final) if args.t_final is not None else p.t_final
        rho0 = initial_state(p.state, p.cfg.M)
        t0 = time.perf_counter()
        try:
            q = evolve(p.cfg, rho0, t_final, IntegratorSettings(dt=p.dt))
        except IntegrationError as exc:
            results.append({"name": p.name, "pass": False, "error": str(exc)})
            continue
        wall = time.perf_counter() - t0
        o = oracle_trajectory(p.cfg, rho0, t_final, dt=p.dt)
        dev, at = compare_trajectories(q, o)
        results.append({"name": p.name, "t_final": t_final, "max_deviation": dev, "time_of_max": at,
                        "tolerance": p.tol, "pass": bool(dev <= p.tol), "qsd_seconds": wall,
                        **q.diagnostics()})
    doc = {"version": __version__, "all_pass": all(r["pass"] for r in results), "results": results}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0 if doc["all_pass"] else 1


def cmd_effective(args) -> int:
    doc = _read_json(args.config)
    cfg = build_config(doc)
    try:
        em = effective_model(cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = em.as_dict()
    out["verification"] = verify_transform(cfg, em).as_dict()
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnet", description="Qubits in a leaky coupled-cavity network.")
    ap.add_argument("--version", action="version", version=f"qnet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--engine", choices=("qsd", "oracle"))
        p.add_argument("--dt", type=float)
        p.add_argument("--t-final", type=float)
        p.add_argument("--out")

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config")
    common(p)
    p.add_argument("--sample-every", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="2-D parameter sweep of an averaged measure")
    p.add_argument("spec")
    common(p)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="compare the coefficient engine with the oracle on built-in configs")
    p.add_argument("--t-final", type=float, help="cap the horizon of every config")
    p.add_argument("--only", help="substring filter on config names")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("effective", help="print the tilde-mode transform of an isotropic config")
    p.add_argument("config")
    p.set_defaults(func=cmd_effective)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"qnet: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
