"""Command line front end: one subcommand per experiment, CSV plus JSON sidecar.

    shlab eigen --n 3 --mu 0 --grid 4000 --out results/
    shlab run --config results/eigen.json

Every subcommand accepts ``--config`` (a JSON file; a previous sidecar works),
``--out``, ``--seed`` and ``--threads``; explicit flags override the file and
the SHL_OUT environment variable overrides both for the output directory.
Failures print a JSON error object on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__, _kernels
from .control import divergence_sweep
from .discretize import DEFAULT_Q, assemble, build_grid, h1_norm_annulus
from .domain import VARIANTS, DomainSpec, PotentialSpec, radial_profile
from .errors import ConfigError, ShlabError
from .hardy import DEFAULT_LEVELS, random_test_functions, rayleigh_quotient, refinement_study
from .parabolic import HeatRunConfig, blowup_scan, run_heat
from .spectral import epsilon_sweep, principal_eigenpair

EXIT_USAGE = 2
EXIT_FAILURE = 1

_QUARTER_DECADES = [float(10.0 ** (-k / 4)) for k in range(4, 17)]


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _levels(text):
    out = []
    for item in str(text).split(","):
        M, h = item.split(":")
        out.append([int(M), float(h)])
    return out


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text is None or str(text).lower() == "none" else float(text)


# parameter name -> (flag parser, default)
_BALL = {"n": (int, 3), "R": (float, 1.0)}
_GRID = {"grid": (int, 4000), "q": (float, DEFAULT_Q), "h_min": (_opt_float, None)}

PARAMS = {
    "potential-profile": {
        **_BALL, "variant": (str, "exact"), "N": (_opt_float, None), "eps": (_opt_float, None),
        "samples": (int, 100),
    },
    "hardy": {
        **_BALL, "variant": (str, "double-singular"), "levels": (_levels, [list(x) for x in DEFAULT_LEVELS]),
        "q": (float, DEFAULT_Q), "test_functions": (int, 100),
    },
    "eigen": {
        **_BALL, **_GRID, "mu": (float, 0.0), "variant": (str, "exact"), "N": (_opt_float, None),
        "eps": (_opt_float, None), "tol": (float, 1e-10), "rho": (float, 0.3), "delta": (float, 0.3),
        "write_vector": (_bool, False),
    },
    "eps-sweep": {
        **_BALL, **_GRID, "mu": (float, 0.3), "eps_list": (_float_list, _QUARTER_DECADES),
        "rho": (float, 0.3), "delta": (float, 0.3), "tol": (float, 1e-10),
    },
    "heat": {
        **_BALL, **_GRID, "grid": (int, 2000), "mu": (float, 0.2), "variant": (str, "truncated"),
        "N": (_opt_float, 1e4), "eps": (_opt_float, None), "T": (float, 0.5), "dt": (_opt_float, None),
        "u0": (str, "ones"), "theta": (float, 1.0),
    },
    "blowup-scan": {
        **_BALL, **_GRID, "grid": (int, 2000), "mu": (float, 0.3),
        "N_list": (_float_list, [10.0, 100.0, 1000.0, 10000.0]), "T": (float, 0.5),
        "dt": (_opt_float, None), "u0": (str, "ones"), "growth_factor": (float, 100.0),
        "check_pointwise": (_bool, False),
    },
    "cost-sweep": {
        **_BALL, **_GRID, "mu": (float, 0.3), "eps_list": (_float_list, _QUARTER_DECADES),
        "rho": (float, 0.3), "delta": (float, 0.3), "T": (float, 1.0), "tol": (float, 1e-10),
    },
}
EXPERIMENTS = tuple(PARAMS)
_TOP_KEYS = {"experiment", "parameters", "output", "seed", "threads", "meta"}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="shlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"shlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration (a previous sidecar is accepted)")
        p.add_argument("--out", help="output directory (SHL_OUT overrides)")
        p.add_argument("--seed", type=int, help="seed for randomized test functions")
        p.add_argument("--threads", type=int, help="workers for independent sweep entries")

    run = sub.add_parser("run", help="run the experiment named in --config")
    common(run)
    for name, params in PARAMS.items():
        p = sub.add_parser(name, help=f"{name} experiment")
        common(p)
        for key, (conv, _) in params.items():
            flag = "--grid" if key == "grid" else _flag(key)
            p.add_argument(flag, dest=f"p_{key}", default=None, type=str, metavar=key.upper())
    return parser


def _coerce(experiment, key, value):
    conv = PARAMS[experiment][key][0]
    if value is None:
        return None
    try:
        if conv in (_float_list,) and isinstance(value, list):
            return [float(x) for x in value]
        if conv is _levels and isinstance(value, list):
            return [[int(M), float(h)] for M, h in value]
        if conv is int and isinstance(value, float) and value != int(value):
            raise ValueError("expected an integer")
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def resolve(args, env=None):
    """Merge defaults, config file and flags into a validated configuration."""
    env = os.environ if env is None else env
    file_cfg = load_config(args.config) if args.config else {}
    experiment = args.command if args.command != "run" else file_cfg.get("experiment")
    if args.command == "run" and not args.config:
        raise ConfigError("'run' needs --config")
    if experiment not in PARAMS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {list(EXPERIMENTS)}")
    if file_cfg.get("experiment", experiment) != experiment:
        raise ConfigError(
            f"config is for {file_cfg['experiment']!r}, not {experiment!r}"
        )
    spec = PARAMS[experiment]
    file_params = file_cfg.get("parameters", {}) or {}
    if not isinstance(file_params, dict):
        raise ConfigError("'parameters' must be an object")
    unknown = set(file_params) - set(spec)
    if unknown:
        raise ConfigError(f"unknown parameters for {experiment}: {sorted(unknown)}")
    params = {k: default for k, (_, default) in spec.items()}
    for k, v in file_params.items():
        params[k] = _coerce(experiment, k, v)
    for k in spec:
        v = getattr(args, f"p_{k}", None)
        if v is not None:
            params[k] = _coerce(experiment, k, v)
    seed = args.seed if args.seed is not None else file_cfg.get("seed", 0)
    threads = args.threads if args.threads is not None else file_cfg.get("threads", 1)
    out = args.out if args.out is not None else file_cfg.get("output", ".")
    if env.get("SHL_OUT"):
        out = env["SHL_OUT"]
    if not isinstance(seed, int) or not isinstance(threads, int) or threads < 1:
        raise ConfigError("seed must be an integer and threads a positive integer")
    _validate(experiment, params)
    return {"experiment": experiment, "parameters": params, "output": out,
            "seed": seed, "threads": threads}


def _validate(experiment, p):
    if p["n"] < 3:
        raise ConfigError("n must be at least 3")
    if not p["R"] > 0:
        raise ConfigError("R must be positive")
    v = p.get("variant")
    if experiment == "hardy":
        if v not in ("double-singular", "classical"):
            raise ConfigError("hardy variant must be 'double-singular' or 'classical'")
    elif v is not None and v not in VARIANTS:
        raise ConfigError(f"variant must be one of {list(VARIANTS)}")
    if v == "truncated" and p.get("N") is None:
        raise ConfigError("truncated variant needs N")
    if v == "regularized" and p.get("eps") is None:
        raise ConfigError("regularized variant needs eps")
    if "u0" in p and p["u0"] not in ("ones", "zeros"):
        raise ConfigError("u0 must be 'ones' or 'zeros'")
    if "samples" in p and p["samples"] < 1:
        raise ConfigError("samples must be positive")


def _potential(p, mu=None):
    mu = p.get("mu", 0.0) if mu is None else mu
    return PotentialSpec(p["variant"], mu, N=p.get("N"), eps=p.get("eps"))


def _grid(p):
    h = p["h_min"]
    return build_grid(p["n"], p["R"], p["grid"], "geometric", q=p["q"], h_min=None if h is None else h * p["R"])


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _run_profile(p, cfg, base):
    dspec = DomainSpec.ball(p["n"], p["R"])
    pspec = PotentialSpec(p["variant"], 1.0, N=p["N"], eps=p["eps"])
    R = p["R"]
    k = p["samples"]
    r = R * np.arange(1, k + 1) / k  # ends on the boundary sphere
    psi = np.empty(k)
    inner = r < R
    psi[inner] = radial_profile(p["n"], R, pspec, r[inner], R - r[inner])
    # limit values on the boundary sphere
    if pspec.variant == "exact":
        psi[~inner] = np.inf
    elif pspec.variant == "as-printed":
        psi[~inner] = 0.0
    else:
        psi[~inner] = radial_profile(p["n"], R, pspec, r[~inner], np.zeros((~inner).sum()))
    _write_rows(base + ".csv", ["r", "psi"], zip(r, psi))
    return {"rows": k, "domain": dspec.to_dict(), "potential": pspec.to_dict()}


def _run_hardy(p, cfg, base):
    rep = refinement_study(p["n"], p["variant"], [tuple(x) for x in p["levels"]], p["R"], p["q"])
    rep.write_csv(base + ".csv")
    M, h = p["levels"][-1]
    grid = build_grid(p["n"], p["R"], M, "geometric", q=p["q"], h_min=h * p["R"])
    dspec = DomainSpec.ball(p["n"], p["R"])
    tests = random_test_functions(grid, p["test_functions"], seed=cfg["seed"])
    quotients = [rayleigh_quotient(grid, dspec, p["variant"], u) for u in tests]
    out = rep.to_dict()
    out["min_random_quotient"] = float(min(quotients)) if quotients else None
    out["stated_global_existence_threshold"] = ((p["n"] - 2) / p["n"]) ** 2
    return out


def _run_eigen(p, cfg, base):
    dspec = DomainSpec.ball(p["n"], p["R"])
    grid = _grid(p)
    op = assemble(grid, dspec, _potential(p))
    eig = principal_eigenpair(op, tol=p["tol"])
    h1 = h1_norm_annulus(grid, eig.vector, p["rho"], p["delta"])
    _write_rows(base + ".csv", ["M", "lambda1", "residual", "iterations", "h1_window_norm"],
                [(grid.M, eig.value, eig.residual, eig.iterations, h1.value)])
    if p["write_vector"]:
        _write_rows(base + "_vector.csv", ["r", "phi"], zip(grid.nodes, eig.vector))
    return {"lambda1": eig.value, "residual": eig.residual, "iterations": eig.iterations}


def _run_eps_sweep(p, cfg, base):
    dspec = DomainSpec.ball(p["n"], p["R"])
    rep = epsilon_sweep(dspec, p["mu"], p["eps_list"], window=(p["rho"], p["delta"]), M=p["grid"],
                        q=p["q"], tol=p["tol"], workers=cfg["threads"])
    rep.write_csv(base + ".csv")
    return rep.to_dict()


def _run_heat(p, cfg, base):
    dspec = DomainSpec.ball(p["n"], p["R"])
    hc = HeatRunConfig(dspec, _potential(p), p["T"], p["dt"], p["u0"], None, _grid(p), p["theta"])
    res = run_heat(hc)
    res.trace.write_csv(base + ".csv")
    return {"final_l2_sq": res.final_l2_sq, "dt": res.dt, "steps": res.steps, "blowup": res.blowup}


def _run_blowup(p, cfg, base):
    dspec = DomainSpec.ball(p["n"], p["R"])
    tab = blowup_scan(dspec, p["mu"], p["u0"], p["N_list"], p["T"], p["dt"], _grid(p),
                      p["growth_factor"], check_pointwise=p["check_pointwise"])
    tab.write_csv(base + ".csv")
    return {"header": tab.header(), "final_l2_sq": [_json_num(v) for v in tab.final_l2_sq],
            "status": tab.status}


def _run_cost(p, cfg, base):
    dspec = DomainSpec.ball(p["n"], p["R"])
    rep = divergence_sweep(dspec, p["mu"], p["eps_list"], (p["rho"], p["delta"]), p["T"],
                           p["grid"], p["q"], p["tol"], workers=cfg["threads"])
    rep.write_csv(base + ".csv")
    return rep.to_dict()


RUNNERS = {
    "potential-profile": _run_profile, "hardy": _run_hardy, "eigen": _run_eigen,
    "eps-sweep": _run_eps_sweep, "heat": _run_heat, "blowup-scan": _run_blowup,
    "cost-sweep": _run_cost,
}


def _json_num(v):
    v = float(v)
    return v if np.isfinite(v) else str(v)


def _clean(obj):
    # strict JSON: no NaN/inf literals
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_num(obj)
    return obj


def versions():
    return {"shlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "backend": _kernels.BACKEND}


def execute(cfg):
    """Run a resolved configuration; returns the sidecar dict."""
    out = cfg["output"]
    os.makedirs(out, exist_ok=True)
    base = os.path.join(out, cfg["experiment"])
    t0 = time.perf_counter()
    results = RUNNERS[cfg["experiment"]](cfg["parameters"], cfg, base)
    elapsed = time.perf_counter() - t0
    sidecar = dict(cfg)
    sidecar["meta"] = {"versions": versions(), "timings": {"compute_s": elapsed},
                       "results": results}
    with open(base + ".json", "w") as fh:
        json.dump(_clean(sidecar), fh, indent=2, sort_keys=True, allow_nan=False)
    return sidecar


def _error(exc, experiment, code):
    payload = {"error": {"type": type(exc).__name__, "message": str(exc), "experiment": experiment,
                         "exit_code": code}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    experiment = args.command
    try:
        cfg = resolve(args)
        experiment = cfg["experiment"]
    except ConfigError as exc:
        return _error(exc, experiment, EXIT_USAGE)
    try:
        execute(cfg)
    except ShlabError as exc:
        return _error(exc, experiment, EXIT_FAILURE)
    except (ValueError, ArithmeticError, OSError) as exc:
        return _error(exc, experiment, EXIT_FAILURE)
    print(os.path.join(cfg["output"], experiment + ".csv"))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
