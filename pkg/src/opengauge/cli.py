"""Command-line front end.

Subcommands: ``simulate``, ``classify``, ``bcs``, ``ngmode``, ``wtcheck``.
Exit codes: 0 all checks passed, 1 a check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

SCHEMA_VERSION = 1

# defaults per subcommand; a --config JSON file may override these and
# explicit flags override both
DEFAULTS = {
    "simulate": {"T": None, "dt": 0.05, "gamma": None, "U": None, "mu": None, "init": "block", "seed": 0,
                 "format": "csv"},
    "classify": {"T": None, "dt": 0.05, "gamma": None, "U": None, "mu": None, "init": "block", "seed": 0,
                 "format": "json"},
    "bcs": {"T": 40.0, "dt": 0.1, "gamma": None, "U": None, "delta": 0.05, "mu": 0.5, "grid": 512,
            "cutoff": 3.0, "format": "csv"},
    "ngmode": {"delta": 0.05, "U": None, "gamma": None, "mu": 0.5, "grid": 512, "cutoff": 3.0,
               "qmin": 0.001, "qmax": 0.05, "qsteps": 10, "format": "csv"},
    "wtcheck": {"samples": 1000, "seed": 0, "format": "json"},
}


class InputError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opengauge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, model=False):
        sp_.add_argument("--config", help="JSON file with default parameters")
        sp_.add_argument("--out", help="output file (a .json summary is written next to CSV output)")
        sp_.add_argument("--format", choices=["csv", "json"])
        sp_.add_argument("--seed", type=int)
        if model:
            sp_.add_argument("--model", help="model file (.lgm)")
            sp_.add_argument("--T", type=float)
            sp_.add_argument("--dt", type=float)
            sp_.add_argument("--gamma", type=float, help="replace every dissipator rate")
            sp_.add_argument("--U", type=float)
            sp_.add_argument("--mu", type=float)
            sp_.add_argument("--init", choices=["block", "filled", "generic"],
                             help="initial state: random number-block-diagonal, fully filled, or random")

    for name in ("simulate", "classify"):
        common(sub.add_parser(name), model=True)

    b = sub.add_parser("bcs")
    common(b)
    for flag, typ in [("--T", float), ("--dt", float), ("--gamma", float), ("--U", float), ("--delta", float),
                      ("--mu", float), ("--grid", int), ("--cutoff", float)]:
        b.add_argument(flag, type=typ)

    n = sub.add_parser("ngmode")
    common(n)
    for flag, typ in [("--delta", float), ("--U", float), ("--gamma", float), ("--mu", float), ("--grid", int),
                      ("--cutoff", float), ("--qmin", float), ("--qmax", float), ("--qsteps", int)]:
        n.add_argument(flag, type=typ)

    w = sub.add_parser("wtcheck")
    common(w)
    w.add_argument("--samples", type=int)
    return p


def _config(args) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as f:
                file_cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    return cfg


def _positive(cfg, *keys):
    for k in keys:
        v = cfg.get(k)
        if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InputError(f"--{k} must be positive, got {v!r}")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _emit(cfg, table: str | None, summary: dict):
    summary = {"schema_version": SCHEMA_VERSION, **summary, "config": cfg}
    text_json = _dump_json(summary)
    out = cfg.get("out")
    fmt = cfg.get("format")
    primary = table if (fmt == "csv" and table is not None) else text_json
    if out:
        with open(out, "w", newline="") as f:
            f.write(primary)
        if primary is table:
            with open(os.path.splitext(out)[0] + ".json", "w") as f:
                f.write(text_json)
    else:
        sys.stdout.write(primary)


# ---------------------------------------------------------------------------
# subcommands


def _load_spec(cfg):
    from .opspec import ModelSpec, load_model, validate

    if not cfg.get("model"):
        raise InputError("--model is required")
    spec = load_model(cfg["model"])
    if cfg.get("gamma") is not None:
        if cfg["gamma"] < 0:
            raise InputError("--gamma must be non-negative")
        spec = spec.with_rates(cfg["gamma"])
    if cfg.get("U") is not None or cfg.get("mu") is not None:
        spec = ModelSpec(spec.num_sites, spec.J, spec.U if cfg.get("U") is None else cfg["U"],
                         spec.mu if cfg.get("mu") is None else cfg["mu"], spec.dissipators, spec.boundary)
    problems = validate(spec)
    if problems:
        raise InputError("; ".join(problems))
    return spec


def _initial_state(cfg, L):
    from .fock import filled_state, random_density_matrix
    from .symmetry import default_initial_state

    kind = cfg.get("init", "block")
    if kind == "filled":
        return filled_state(L)
    if kind == "generic":
        return random_density_matrix(4 ** L, np.random.default_rng(cfg.get("seed", 0)))
    return default_initial_state(L, cfg.get("seed", 0))


def _default_T(spec, cfg):
    if cfg.get("T") is not None:
        return cfg["T"]
    rates = [d.rate for d in spec.dissipators if d.rate > 0]
    return 10.0 / max(rates) if rates else 10.0


def cmd_simulate(cfg) -> int:
    from .lindblad import build_liouvillian, continuity_residual, evolve, trajectory_csv

    _positive(cfg, "dt")
    spec = _load_spec(cfg)
    dt = cfg["dt"]
    T = dt * round(_default_T(spec, cfg) / dt)
    cfg["T"] = T
    liou = build_liouvillian(spec)
    traj = evolve(liou, _initial_state(cfg, spec.num_sites), T, dt)
    o = traj.observables
    residual = None
    note = None
    try:
        residual = continuity_residual(traj, spec)
    except NotImplementedError as exc:
        note = str(exc)
    agree = max(np.max(np.abs(o["ON_direct"] - o["ON_vec"])), np.max(np.abs(o["ON_direct"] - o["ON_swap"])))
    checks = {
        "ON_three_way_agreement": bool(agree < 1e-10),
        "trace_preserved": bool(np.max(np.abs(o["trace"] - 1)) < 1e-10 * max(T, 1.0)),
    }
    summary = {
        "command": "simulate",
        "num_steps": len(traj.times) - 1,
        "internal_step": traj.h,
        "N_drift": float(np.max(np.abs(o["N"] - o["N"][0]))),
        "ON_drift": float(np.max(np.abs(o["ON_direct"] - o["ON_direct"][0]))),
        "ON_max_abs": float(np.max(np.abs(o["ON_direct"]))),
        "ON_agreement": float(agree),
        "continuity_residual_max": None if residual is None else float(np.max(residual.max_per_site)),
        "continuity_note": note,
        "checks": checks,
    }
    _emit(cfg, trajectory_csv(traj, residual), summary)
    return 0 if all(checks.values()) else 1


def cmd_classify(cfg) -> int:
    from .symmetry import verify_by_simulation

    _positive(cfg, "dt")
    spec = _load_spec(cfg)
    dt = cfg["dt"]
    T = dt * round(_default_T(spec, cfg) / dt)
    cfg["T"] = T
    report = verify_by_simulation(spec, _initial_state(cfg, spec.num_sites), T, dt)
    _emit(cfg, None, {"command": "classify", **report})
    return 1 if report["simulation"]["verdict"] == "mismatch" else 0


def cmd_bcs(cfg) -> int:
    from .meanfield import coupling_for_gap, evolve_bcs, init_bcs, make_grid, mf_ON, bcs_csv, solve_gap

    _positive(cfg, "T", "dt", "grid", "cutoff", "mu")
    grid = make_grid(int(cfg["grid"]), cfg["cutoff"], cfg["mu"])
    if cfg.get("U") is not None:
        U = cfg["U"]
        delta0 = solve_gap(U, grid)
    else:
        _positive(cfg, "delta")
        delta0 = cfg["delta"]
        U = coupling_for_gap(delta0, grid)
    gamma = 0.1 * U if cfg.get("gamma") is None else cfg["gamma"]
    cfg.update(U=U, gamma=gamma)
    state = init_bcs(delta0, cfg["mu"], grid)
    traj = evolve_bcs(state, U, gamma, cfg["dt"], cfg["T"])
    mf_ON(traj.final)  # cross-checks both O_N forms
    absd = np.abs(traj.delta)
    checks = {"norm_preserved": bool(traj.norm_drift < 1e-8)}
    if gamma == 0:
        checks["stationary_gap"] = bool(np.max(np.abs(absd - absd[0])) < 1e-6)
    else:
        checks["N_decreases"] = bool(traj.N[-1] < traj.N[0])
    dON = np.diff(traj.ON)
    summary = {
        "command": "bcs",
        "delta0": delta0,
        "internal_step": traj.dt,
        "norm_drift": traj.norm_drift,
        "N_initial": traj.N[0], "N_final": traj.N[-1],
        "ON_initial": traj.ON[0], "ON_final": traj.ON[-1],
        "ON_max": float(np.max(traj.ON)),
        "ON_non_decreasing": bool(np.all(dON >= -1e-12)),
        "checks": checks,
    }
    _emit(cfg, bcs_csv(traj), summary)
    return 0 if all(checks.values()) else 1


def cmd_ngmode(cfg) -> int:
    from .collective import diffusion_numeric, dispersion_csv, solve_sound_velocity
    from .meanfield import make_grid, solve_gap
    from .response import density_from_greens

    _positive(cfg, "grid", "cutoff", "mu", "qmin", "qmax", "qsteps")
    if cfg["qmin"] >= cfg["qmax"]:
        raise InputError("--qmin must be below --qmax")
    grid = make_grid(int(cfg["grid"]), cfg["cutoff"], cfg["mu"])
    delta = solve_gap(cfg["U"], grid) if cfg.get("U") is not None else cfg["delta"]
    _positive({"delta": delta}, "delta")
    n = density_from_greens(delta, cfg["mu"], grid)
    gamma = 0.01 * delta / n if cfg.get("gamma") is None else cfg["gamma"]
    cfg.update(delta=delta, gamma=gamma)
    qs = np.linspace(cfg["qmin"], cfg["qmax"], int(cfg["qsteps"]))
    sv = solve_sound_velocity(qs, delta, grid)
    df = diffusion_numeric(qs, gamma, n, delta, grid)
    summary = {
        "command": "ngmode",
        "density": n,
        "v_s_fit": sv.v_s,
        "v_s_analytic": sv.v_s_analytic,
        "D_fit": df.D_fit,
        "D_analytic": df.D_analytic,
        "rel_err": {"v_s": sv.rel_err, "D": df.rel_err},
        "checks": {"v_s_within_1pct": bool(sv.rel_err < 0.01), "D_within_10pct": bool(df.rel_err < 0.1)},
    }
    _emit(cfg, dispersion_csv(sv, df), summary)
    return 0 if all(summary["checks"].values()) else 1


def cmd_wtcheck(cfg) -> int:
    from .response import gauge_sweep, wt_sweep

    _positive(cfg, "samples")
    rng = np.random.default_rng(cfg["seed"])
    res = wt_sweep(int(cfg["samples"]), rng)
    shift, trans = gauge_sweep(int(cfg["samples"]), rng)
    summary = {
        "command": "wtcheck",
        "samples": int(cfg["samples"]),
        "max_residual": float(np.max(res)),
        "gauge_shift_max_delta": shift,
        "transversality_max": trans,
        "checks": {"wt_identity": bool(np.max(res) < 1e-12), "gauge_invariance": bool(shift < 1e-14 and trans < 1e-14)},
    }
    _emit(cfg, None, summary)
    return 0 if all(summary["checks"].values()) else 1


COMMANDS = {"simulate": cmd_simulate, "classify": cmd_classify, "bcs": cmd_bcs, "ngmode": cmd_ngmode,
            "wtcheck": cmd_wtcheck}


def main(argv=None) -> int:
    from .fock import CapacityError
    from .opspec import ParseError

    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = _config(args)
        return COMMANDS[args.command](cfg)
    except ParseError as exc:
        print(f"{cfg.get('model', '<model>')}:{exc}", file=sys.stderr)
        return 2
    except (InputError, CapacityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
