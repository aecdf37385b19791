"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver did not converge,
4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace

import numpy as np

from . import __version__, kernels
from .equilibrium import SolveConfig, fit_affine, solve_affine_bne
from .errors import ConfigError, DomainError, SolverError
from .policy import AffinePolicy, GameParams, min_policy, switching_curve, switching_curve_slope
from .simulation import deviation_gain, make_regular_graph, perturbation_grid, simulate
from .verify import VerifySettings, run_checks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_VERIFY_FAILED = 4

THREADS_ENV = "MTGG_THREADS"

DEFAULTS = {
    "game": {
        "sigma1_sq": 2.0, "sigma2_sq": 1.0, "alpha1_sq": 1.0, "alpha2_sq": 1.0,
        "n_agents": 10, "degree": 4, "diffuse": False,
    },
    "solve": asdict(SolveConfig()),
    "sim": {
        "trials": 10_000, "seed": 0, "policy": "min", "noise_sweep": [],
        "deviation": {"enabled": False, "grid_size": 9, "a2_halfwidth": 0.4,
                      "tau_halfwidth": 2.0, "focal": 0},
    },
    "sweep": {"rho_list": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]},
    "br_curve": {"profile": {"a1": 1.0, "a2": -2.0, "tau": 0.0}, "y2_min": -20.0,
                 "y2_max": 20.0, "points": 401, "asymptote_at": 1000.0},
    "verify": asdict(VerifySettings()),
    "outputs": {"path": None, "format": None},
}


# -- configuration ------------------------------------------------------------

def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            if path.startswith("game") and key == "rho":
                out[key] = val
                continue
            raise ConfigError(where, "unknown field")
        if isinstance(base[key], dict) and isinstance(val, dict) and key != "profile":
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _read_config_source(path):
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".csv") or text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
        raise ConfigError("config", f"{path} carries no embedded config")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON ({exc})") from None
    if isinstance(data, dict) and data.get("tool") == "mtgg" and "config" in data:
        return data["config"]  # an emitted record
    return data


def _num(cfg, section, key, kind=float):
    val = cfg[section][key]
    field = f"{section}.{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(field, f"expected a number, got {val!r}")
    if kind is int:
        if float(val) != int(val):
            raise ConfigError(field, f"expected an integer, got {val!r}")
        return int(val)
    return float(val)


def normalize_config(raw):
    """Fill defaults, resolve ``game.rho`` to a degree and validate every field."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    cfg = _merge(DEFAULTS, raw)
    game = cfg["game"]
    n = _num(cfg, "game", "n_agents", int)
    if "rho" in game:
        rho = _num(cfg, "game", "rho")
        if not 0 < rho < 1:
            raise ConfigError("game.rho", f"density must lie in (0, 1), got {rho}")
        k = rho * n
        if abs(k - round(k)) > 1e-9:
            raise ConfigError("game.rho", f"rho*N = {k} is not an integer")
        game["degree"] = int(round(k))
        del game["rho"]
    for key in ("sigma1_sq", "sigma2_sq", "alpha1_sq", "alpha2_sq"):
        _num(cfg, "game", key)
    _num(cfg, "game", "degree", int)
    if not isinstance(game["diffuse"], bool):
        raise ConfigError("game.diffuse", "expected true or false")
    try:
        build_game(cfg)
    except DomainError as exc:
        raise ConfigError("game", str(exc)) from None
    try:
        build_solve(cfg)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError("solve", str(exc)) from None
    sim = cfg["sim"]
    if _num(cfg, "sim", "trials", int) < 1:
        raise ConfigError("sim.trials", "must be >= 1")
    _seed(sim["seed"], "sim.seed")
    pol = sim["policy"]
    if not (pol in ("min", "solve-first") or (isinstance(pol, dict) and {"a2", "tau"} <= set(pol))):
        raise ConfigError("sim.policy", 'expected "min", "solve-first" or {"a2": .., "tau": ..}')
    for v in sim["noise_sweep"]:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError("sim.noise_sweep", f"noise variances must be positive, got {v!r}")
    for rho in cfg["sweep"]["rho_list"]:
        if isinstance(rho, bool) or not isinstance(rho, (int, float)) or not 0 < rho < 1:
            raise ConfigError("sweep.rho_list", f"density must lie in (0, 1), got {rho!r}")
    bc = cfg["br_curve"]
    if _num(cfg, "br_curve", "points", int) < 2:
        raise ConfigError("br_curve.points", "need at least two points")
    if not _num(cfg, "br_curve", "y2_min") < _num(cfg, "br_curve", "y2_max"):
        raise ConfigError("br_curve.y2_min", "must be below y2_max")
    _profile(bc["profile"], "br_curve.profile")
    try:
        VerifySettings(**cfg["verify"])
    except TypeError as exc:
        raise ConfigError("verify", str(exc)) from None
    fmt = cfg["outputs"]["format"]
    if fmt not in (None, "csv", "json"):
        raise ConfigError("outputs.format", f"expected csv or json, got {fmt!r}")
    return cfg


def _seed(val, field):
    if isinstance(val, bool) or not isinstance(val, int) or not 0 <= val < 2**64:
        raise ConfigError(field, f"seed must be an unsigned 64-bit integer, got {val!r}")
    return val


def _profile(raw, field):
    if raw == "min":
        return min_policy()
    if not isinstance(raw, dict) or not {"a2", "tau"} <= set(raw):
        raise ConfigError(field, 'expected "min" or {"a1": .., "a2": .., "tau": ..}')
    try:
        pol = AffinePolicy(float(raw.get("a1", 1.0)), float(raw["a2"]), float(raw["tau"]))
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(field, str(exc)) from None
    if not pol.a1 > 0:
        raise ConfigError(field, "a1 must be positive")
    return pol


def build_game(cfg, **overrides):
    g = dict(cfg["game"], **overrides)
    return GameParams(float(g["sigma1_sq"]), float(g["sigma2_sq"]), float(g["alpha1_sq"]),
                      float(g["alpha2_sq"]), int(g["n_agents"]), int(g["degree"]), bool(g["diffuse"]))


def build_solve(cfg):
    s = dict(cfg["solve"])
    _seed(s["seed"], "solve.seed")
    return SolveConfig(**s)


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path, seed=None):
    raw = {} if path is None else _read_config_source(path)
    cfg = normalize_config(raw)
    if seed is not None:
        _seed(seed, "--seed")
        cfg["solve"]["seed"] = seed
        cfg["sim"]["seed"] = seed
        cfg["verify"]["seed"] = seed
    return cfg


# -- output ---------------------------------------------------------------------

def _meta(cmd, cfg, seed):
    return {"tool": "mtgg", "version": __version__, "command": cmd, "seed": seed,
            "config_hash": config_hash(cfg), "backend": kernels.BACKEND}


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def render_record(cmd, cfg, seed, result):
    rec = _meta(cmd, cfg, seed)
    rec["config"] = cfg
    rec["result"] = _jsonable(result)
    return json.dumps(rec, indent=2) + "\n"


def render_table(cmd, cfg, seed, columns, rows, extra=None, fmt="csv"):
    if fmt == "json":
        rec = _meta(cmd, cfg, seed)
        rec["config"] = cfg
        rec["columns"] = columns
        rec["rows"] = _jsonable(rows)
        if extra:
            rec["metadata"] = _jsonable(extra)
        return json.dumps(rec, indent=2) + "\n"
    buf = io.StringIO()
    for key, val in _meta(cmd, cfg, seed).items():
        buf.write(f"# {key}: {val}\n")
    for key, val in (extra or {}).items():
        buf.write(f"# {key}: {json.dumps(_jsonable(val))}\n")
    buf.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _emit(text, args, cfg):
    path = args.out or cfg["outputs"]["path"]
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(args, cfg, default):
    return args.format or cfg["outputs"]["format"] or default


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# -- commands ----------------------------------------------------------------

def _solve_record(res):
    return {
        "a2_star": res.a2_star, "tau_star": res.tau_star, "residual_error": res.residual_error,
        "iterations": res.iterations, "converged": res.converged,
        "trajectory": [list(t) for t in res.trajectory],
    }


def cmd_solve(args, cfg):
    res = solve_affine_bne(build_game(cfg), build_solve(cfg))
    rec = _solve_record(res)
    if _fmt(args, cfg, "json") == "csv":
        rows = [[i, a2, tau] for i, (a2, tau) in enumerate(res.trajectory)]
        text = render_table("solve", cfg, cfg["solve"]["seed"], ["iteration", "a2", "tau"], rows,
                            {k: v for k, v in rec.items() if k != "trajectory"})
    else:
        text = render_record("solve", cfg, cfg["solve"]["seed"], rec)
    _emit(text, args, cfg)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


SWEEP_COLUMNS = ["rho", "degree", "a2_star", "tau_star", "residual", "iterations", "converged", "error"]


def sweep_rows(cfg, rho_list, threads=1):
    solve_cfg = build_solve(cfg)
    n = int(cfg["game"]["n_agents"])

    def one(rho):
        try:
            k = rho * n
            if abs(k - round(k)) > 1e-9:
                raise DomainError(f"rho*N = {k} is not an integer")
            res = solve_affine_bne(build_game(cfg, degree=int(round(k))), solve_cfg)
            return [rho, int(round(k)), res.a2_star, res.tau_star, res.residual_error,
                    res.iterations, int(res.converged), ""]
        except (DomainError, SolverError) as exc:
            return [rho, "", "", "", "", "", 0, str(exc)]

    if threads > 1 and len(rho_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, rho_list))
    return [one(r) for r in rho_list]


def cmd_sweep_rho(args, cfg):
    rho_list = cfg["sweep"]["rho_list"]
    if args.rho is not None:
        try:
            rho_list = [float(x) for x in args.rho.split(",") if x.strip()]
        except ValueError:
            raise ConfigError("--rho", f"not a comma-separated list of numbers: {args.rho!r}") from None
        cfg = copy.deepcopy(cfg)
        cfg["sweep"]["rho_list"] = rho_list
        normalize_config(cfg)
    rows = sweep_rows(cfg, rho_list, _threads(args))
    _emit(render_table("sweep-rho", cfg, cfg["solve"]["seed"], SWEEP_COLUMNS, rows,
                       fmt=_fmt(args, cfg, "csv")), args, cfg)
    return EXIT_OK


BR_COLUMNS = ["y2", "g", "slope", "fit_ls", "fit_asymptotic", "ok"]


def br_curve_table(params, profile, y2_min, y2_max, points, asymptote_at=1000.0):
    """Switching-curve samples plus two affine reference lines.

    ``fit_ls`` is the least-squares line over the sampled interval;
    ``fit_asymptotic`` is the tangent line of the curve at ``y2 = asymptote_at``.
    """
    y2 = np.linspace(y2_min, y2_max, points)
    g = np.full(points, np.nan)
    slope = np.full(points, np.nan)
    ok = np.zeros(points, dtype=bool)
    for i, y in enumerate(y2):
        try:
            gi, _ = switching_curve(params, profile, [y])
            g[i] = gi[0]
            slope[i] = switching_curve_slope(params, profile, y, xi=gi[0])
            ok[i] = True
        except SolverError:
            pass
    fit = fit_affine(y2[ok], g[ok])
    ls_slope, ls_icpt = -fit.a2, fit.tau
    ga, _ = switching_curve(params, profile, [asymptote_at])
    as_slope = float(switching_curve_slope(params, profile, asymptote_at, xi=ga[0]))
    as_icpt = float(ga[0] - as_slope * asymptote_at)
    rows = []
    for i in range(points):
        rows.append([float(y2[i]), float(g[i]), float(slope[i]), ls_slope * y2[i] + ls_icpt,
                     as_slope * y2[i] + as_icpt, int(ok[i])])
    meta = {"ls_fit": {"slope": ls_slope, "intercept": ls_icpt, "mse": fit.residual},
            "asymptotic_fit": {"slope": as_slope, "intercept": as_icpt, "at": asymptote_at},
            "profile": [profile.a1, profile.a2, profile.tau]}
    return rows, meta


def cmd_br_curve(args, cfg):
    bc = cfg["br_curve"]
    y2_min = bc["y2_min"] if args.y2_min is None else args.y2_min
    y2_max = bc["y2_max"] if args.y2_max is None else args.y2_max
    points = bc["points"] if args.points is None else args.points
    if args.y2_min is not None or args.y2_max is not None or args.points is not None:
        cfg = copy.deepcopy(cfg)
        cfg["br_curve"].update(y2_min=y2_min, y2_max=y2_max, points=points)
        normalize_config(cfg)
    profile = _profile(bc["profile"], "br_curve.profile")
    rows, meta = br_curve_table(build_game(cfg), profile, float(y2_min), float(y2_max),
                                int(points), float(bc["asymptote_at"]))
    _emit(render_table("br-curve", cfg, cfg["solve"]["seed"], BR_COLUMNS, rows, meta,
                       fmt=_fmt(args, cfg, "csv")), args, cfg)
    return EXIT_OK


def _sim_profile(cfg, params):
    pol = cfg["sim"]["policy"]
    if pol == "solve-first":
        res = solve_affine_bne(params, build_solve(cfg))
        if not res.converged:
            return None, res
        return res.policy, res
    return _profile(pol, "sim.policy"), None


def _sim_row(rep):
    return [rep.trials, rep.mean_payoff_per_agent, rep.mean_payoff_se, rep.coordination_rate,
            rep.coordination_rate_se, rep.task1_share, rep.task1_share_se]


SIM_COLUMNS = ["alpha_sq", "trials", "mean_payoff", "mean_payoff_se", "coordination_rate",
               "coordination_rate_se", "task1_share", "task1_share_se"]


def cmd_simulate(args, cfg):
    sim = cfg["sim"]
    params = build_game(cfg)
    graph = make_regular_graph(params.n_agents, params.degree)
    profile, solved = _sim_profile(cfg, params)
    if profile is None:
        sys.stderr.write("solver did not converge; nothing simulated\n")
        return EXIT_NOT_CONVERGED
    threads = _threads(args)
    trials, seed = int(sim["trials"]), int(sim["seed"])
    extra = {"profile": [profile.a1, profile.a2, profile.tau]}
    if solved is not None:
        extra["solve"] = {k: v for k, v in _solve_record(solved).items() if k != "trajectory"}
    if trials < 2:
        extra["warning"] = "single trial: standard errors are infinite"
        sys.stderr.write("warning: trials=1 gives no spread estimate; standard errors are inf\n")
    rows = []
    noise = sim["noise_sweep"] or [None]
    for a in noise:
        p = params if a is None else replace(params, alpha1_sq=float(a), alpha2_sq=float(a))
        rep = simulate(p, graph, profile, trials, seed, threads)
        rows.append([p.alpha1_sq if a is None else float(a)] + _sim_row(rep))
    dev = sim["deviation"]
    if dev.get("enabled"):
        grid = perturbation_grid(profile, dev["a2_halfwidth"], dev["tau_halfwidth"], dev["grid_size"])
        rep = deviation_gain(params, graph, profile, grid, trials, seed,
                             focal=int(dev["focal"]), threads=threads)
        extra["deviation"] = {"gain": rep.gain, "std_err": rep.std_err, "best": rep.best_label}
    _emit(render_table("simulate", cfg, seed, SIM_COLUMNS, rows, extra,
                       fmt=_fmt(args, cfg, "csv")), args, cfg)
    return EXIT_OK


def cmd_verify(args, cfg):
    settings = VerifySettings(**cfg["verify"])
    results = run_checks(build_game(cfg), settings, build_solve(cfg))
    for r in results:
        sys.stderr.write(r.line() + "\n")
    rec = {"passed": all(r.passed for r in results), "checks": [r.to_dict() for r in results]}
    _emit(render_record("verify", cfg, settings.seed, rec), args, cfg)
    return EXIT_OK if rec["passed"] else EXIT_VERIFY_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "sweep-rho": cmd_sweep_rho,
    "br-curve": cmd_br_curve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config, or an emitted JSON record / CSV to replay")
    common.add_argument("--seed", type=int, help="override every seed in the config")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    parser = argparse.ArgumentParser(prog="mtgg", description="Two-task global game on a regular graph.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve for the affine equilibrium")
    sp = sub.add_parser("sweep-rho", parents=[common], help="solve across graph densities")
    sp.add_argument("--rho", help="comma-separated densities")
    bp = sub.add_parser("br-curve", parents=[common], help="tabulate a best-response switching curve")
    bp.add_argument("--y2-min", type=float)
    bp.add_argument("--y2-max", type=float)
    bp.add_argument("--points", type=int)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo play of a policy profile")
    sub.add_parser("verify", parents=[common], help="run the built-in self-checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except SolverError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
