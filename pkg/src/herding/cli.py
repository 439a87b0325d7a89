"""Command-line front end.

    python -m herding {stationary,integrate,simulate,compare,phase,figure} [options]

A run is described by one JSON document (``--config``); flags override its
fields. Results go to ``--out`` (default: current directory). On failure an
``error.json`` is written there and the process exits with 2 (bad config),
3 (solver did not converge) or 4 (the parameters violate a solver's regime).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from herding import closed_forms, meanfield, simulator, stationary
from herding.distributions import DistributionError, ProbSeq, make_prob_seq, moment1
from herding.meanfield import IntegrationError, MeanFieldState, ModelParams
from herding.policies import CumulativeF, PolicyError, RatioPower, from_config, to_config

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_REGIME = 0, 2, 3, 4

COMMANDS = ("stationary", "integrate", "simulate", "compare", "phase", "figure")

BLOCK_DEFAULTS = {
    "stationary": {"prefix": 50},
    "integrate": {"L": meanfield.DEFAULT_L, "t_end": 100.0, "dt_sample": 1.0, "rtol": 1e-7,
                  "atol": 1e-9, "method": "RK45", "absorbing": True, "prefix": 20, "initial": {}},
    "simulate": {"N": 100, "t_end": 100.0, "dt_sample": 1.0, "seed": 0,
                 "score_cap": simulator.DEFAULT_CAP, "prefix": 20},
    "compare": {"N": 100, "t_end": 100.0, "dt_sample": 1.0, "seed": 0, "L": 500,
                "score_cap": simulator.DEFAULT_CAP, "prefix": 20, "threshold": None},
    "phase": {"ratios": {"start": 0.1, "stop": 1.2, "num": 12}, "gammas": [2.0]},
    "figure": {"gammas": [0.8, 1.5, 2.5], "lambda": 3.0, "mu": 3.0, "x_grid": None},
}
TOP_KEYS = {"params", "theta", "phi", "policy", *COMMANDS}
PARAM_KEYS = {"lambda", "alpha", "mu"}


class ConfigError(ValueError):
    pass


def _preset_mamicroplanete(p: float | None) -> dict:
    if p is None:
        raise ConfigError("preset mamicroplanete needs --p (probability of the large increment)")
    if not 0.0 <= p <= 1.0:
        raise ConfigError("--p must lie in [0, 1]")
    theta = {k: v for k, v in ((5, 1.0 - p), (15, p)) if v > 0}
    return {"params": {"mu": 3.0}, "theta": theta, "phi": {50: 1.0}, "policy": {"type": "score_linear"}}


PRESETS = {"mamicroplanete": _preset_mamicroplanete}


@dataclass
class RunConfig:
    params: ModelParams | None
    theta: ProbSeq
    phi: ProbSeq
    policy: object
    blocks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("theta", "phi", "policy"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _dist(block, name) -> ProbSeq:
    if not isinstance(block, dict) or not block:
        raise ConfigError(f"{name} must be a non-empty score -> probability map")
    try:
        return make_prob_seq({int(k): float(v) for k, v in block.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def build_config(doc: dict, command: str | None = None) -> RunConfig:
    """Validate a merged config document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(doc) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    blocks = {}
    for name, defaults in BLOCK_DEFAULTS.items():
        given = doc.get(name, {}) or {}
        bad = set(given) - set(defaults)
        if bad:
            raise ConfigError(f"unknown keys in {name}: {sorted(bad)}")
        blocks[name] = {**defaults, **given}
    raw_params = doc.get("params", {}) or {}
    bad = set(raw_params) - PARAM_KEYS
    if bad:
        raise ConfigError(f"unknown keys in params: {sorted(bad)}")
    params = None
    if command != "figure":
        missing = PARAM_KEYS - set(raw_params)
        if missing:
            raise ConfigError(f"params missing {sorted(missing)}")
        try:
            params = ModelParams(float(raw_params["lambda"]), float(raw_params["alpha"]),
                                 float(raw_params["mu"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    theta = _dist(doc.get("theta", {1: 1.0}), "theta")
    phi = _dist(doc.get("phi", {1: 1.0}), "phi")
    try:
        policy = from_config(doc.get("policy", {"type": "uniform"}))
    except (PolicyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params, theta, phi, policy, blocks, doc)


def _flag_overrides(args) -> dict:
    out: dict = {}
    params = {k: v for k, v in (("lambda", args.lam), ("alpha", args.alpha), ("mu", args.mu)) if v is not None}
    if params:
        out["params"] = params
    if args.seed is not None:
        out["simulate"] = {"seed": args.seed}
        out["compare"] = {"seed": args.seed}
    if args.players is not None:
        out.setdefault("simulate", {})["N"] = args.players
        out.setdefault("compare", {})["N"] = args.players
    if args.t_end is not None:
        for name in ("integrate", "simulate", "compare"):
            out.setdefault(name, {})["t_end"] = args.t_end
    return out


def load(args) -> RunConfig:
    doc: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; known: {sorted(PRESETS)}")
        doc = PRESETS[args.preset](args.p)
    elif args.p is not None:
        raise ConfigError("--p only applies to a preset")
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        doc = _merge(doc, user)
    doc = _merge(doc, _flag_overrides(args))
    return build_config(doc, args.command)


# ------------------------------------------------------------------- output


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def _write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    path.write_text(text + "\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _echo(cfg: RunConfig) -> dict:
    p = cfg.params
    return {
        "params": None if p is None else {"lambda": p.lam, "alpha": p.alpha, "mu": p.mu},
        "theta": cfg.theta.as_dict(),
        "phi": cfg.phi.as_dict(),
        "policy": to_config(cfg.policy),
    }


# ----------------------------------------------------------------- commands


def cmd_stationary(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    sol = stationary.solve(cfg.params, cfg.policy, cfg.theta, cfg.phi)
    record = {**sol.to_json(cfg.blocks["stationary"]["prefix"]), "config": _echo(cfg)}
    _write_json(out / "solution.json", record)
    _write_rows(out / "r.csv", ["score", "r"], ((i + 1, v) for i, v in enumerate(sol.r)))
    return record


def cmd_integrate(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    b = cfg.blocks["integrate"]
    L = int(b["L"])
    s0 = MeanFieldState.empty(L)
    for score, v in (b["initial"] or {}).items():
        score = int(score)
        if not 1 <= score <= L or float(v) < 0:
            raise ConfigError(f"bad initial value {v!r} at score {score}")
        s0.r[score - 1] = float(v)
    traj = meanfield.integrate(s0, cfg.params, cfg.policy, cfg.theta, cfg.phi, float(b["t_end"]),
                               dt_sample=float(b["dt_sample"]), rtol=float(b["rtol"]),
                               atol=float(b["atol"]), method=b["method"], absorbing=bool(b["absorbing"]))
    meanfield.write_csv(traj, out / "trajectory.csv", int(b["prefix"]))
    summary = {
        "final_mass": float(traj.masses()[-1]),
        "final_escaped_mass": float(traj.escaped[-1]),
        "top_bin": float(traj.r[-1, -1]),
        "clip_events": traj.clip_events,
        "mass_balance_residual": meanfield.mass_balance_residual(traj, cfg.params, cfg.policy,
                                                                 cfg.theta, cfg.phi),
        "cesaro_r1": meanfield.cesaro(traj, traj.r[:, 0]),
        "cesaro_mass": meanfield.cesaro(traj, traj.masses()),
        "config": _echo(cfg),
        **traj.meta,
    }
    _write_json(out / "summary.json", summary)
    return summary


def _sim_block(cfg, name):
    b = cfg.blocks[name]
    N = int(b["N"])
    if N < 1:
        raise ConfigError("N must be at least 1")
    return b, N


def cmd_simulate(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    b, N = _sim_block(cfg, "simulate")
    emp = simulator.simulate(N, cfg.params, cfg.policy, cfg.theta, cfg.phi, float(b["t_end"]),
                             seed=int(b["seed"]), dt_sample=float(b["dt_sample"]),
                             score_cap=int(b["score_cap"]))
    simulator.write_csv(emp, out / "trajectory.csv", int(b["prefix"]))
    simulator.write_sidecar(emp, out / "trajectory.json")
    return emp.stats


def cmd_compare(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    b, N = _sim_block(cfg, "compare")
    t_end, dt = float(b["t_end"]), float(b["dt_sample"])
    emp = simulator.simulate(N, cfg.params, cfg.policy, cfg.theta, cfg.phi, t_end, seed=int(b["seed"]),
                             dt_sample=dt, score_cap=int(b["score_cap"]))
    mf = meanfield.integrate(MeanFieldState.empty(int(b["L"])), cfg.params, cfg.policy, cfg.theta,
                             cfg.phi, t_end, dt_sample=dt)
    rep = simulator.compare_to_meanfield(emp, mf, int(b["prefix"]), b["threshold"])
    _write_rows(out / "compare.csv",
                ["t", "sup_error", "mass_error", "empirical_tail", "meanfield_tail"],
                zip(rep.t, rep.sup_error, rep.mass_error, rep.empirical_tail, rep.meanfield_tail))
    summary = {**rep.summary(), "N": N, "seed": int(b["seed"]), "stats": emp.stats, "config": _echo(cfg)}
    _write_json(out / "compare.json", summary)
    return summary


def _ratio_grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        bad = set(spec) - {"start", "stop", "num"}
        if bad or len(spec) != 3:
            raise ConfigError("phase.ratios needs exactly start, stop, num")
        grid = np.round(np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"])), 12)
    else:
        grid = np.asarray(spec, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ConfigError("phase ratios must be finite and non-negative")
    return grid


def _phase_rows(cfg: RunConfig, pol, ratios):
    """Regime label per alpha/lambda for one policy."""
    theta, phi = cfg.theta, cfg.phi
    if isinstance(pol, CumulativeF):
        bound = moment1(phi) / (moment1(theta) * (pol.slope_at_one - 1.0))
        return [(r, bound, stationary.ERGODIC if r <= bound else stationary.NON_ERGODIC, "cumulative")
                for r in ratios]
    if theta.is_unit_step():
        diag = stationary.ergodicity_bound(pol, phi)
        return [(r, diag.M, diag.classify(r), diag.classification_source) for r in ratios]
    if pol.asymptotics().kind == "unbounded":
        return [(r, 0.0, stationary.UNBOUNDED, "unbounded_weights") for r in ratios]
    bound = stationary.general_bound(pol, theta, phi)
    return [(r, bound, stationary.ERGODIC if r <= bound else stationary.CONDENSED, "general_theta")
            for r in ratios]


def cmd_phase(cfg: RunConfig, out: Path, threads: int = 1) -> list:
    b = cfg.blocks["phase"]
    ratios = _ratio_grid(b["ratios"])
    if b["gammas"] is None:
        policies = [(math.nan, cfg.policy)]
    else:
        policies = [(float(g), RatioPower(float(g))) for g in b["gammas"]]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda item: _phase_rows(cfg, item[1], ratios), policies))
    rows = [(g, r, M, regime, source) for (g, _), block in zip(policies, results)
            for r, M, regime, source in block]
    _write_rows(out / "phase.csv", ["gamma", "alpha_over_lambda", "bound", "regime", "source"], rows)
    return rows


def cmd_figure(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    b = cfg.blocks["figure"]
    gammas = [float(g) for g in b["gammas"]]
    lam, mu = float(b["lambda"]), float(b["mu"])
    if lam <= 0 or mu <= 0:
        raise ConfigError("figure needs positive lambda and mu")
    grid = None if b["x_grid"] is None else np.asarray(b["x_grid"], dtype=float)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        curves = list(pool.map(lambda g: closed_forms.figure_sweep([g], lam, mu, grid), gammas))
    rows = [row for curve in curves for row in curve]
    closed_forms.write_figure_csv(rows, out / "figure.csv")
    meta = {}
    for g in gammas:
        a_max, s_max = closed_forms.figure_endpoints(g, lam, mu)
        meta[repr(g)] = {"regime": closed_forms.trichotomy(g), "alpha_max": a_max, "r_prime_1_max": s_max}
    summary = {"lambda": lam, "mu": mu, "curves": meta}
    _write_json(out / "figure.json", summary)
    return summary


HANDLERS = {
    "stationary": cmd_stationary,
    "integrate": cmd_integrate,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "phase": cmd_phase,
    "figure": cmd_figure,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="herding", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config document")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--preset", help="named parameter preset (mamicroplanete)")
    ap.add_argument("--seed", type=int, help="simulation seed")
    ap.add_argument("--threads", type=int, default=1, help="workers for sweeps")
    ap.add_argument("--players", type=int, help="number of players N")
    ap.add_argument("--t-end", dest="t_end", type=float, help="time horizon")
    ap.add_argument("--p", type=float, help="large-increment probability for the preset")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--mu", type=float)
    return ap


def _classify_error(exc: BaseException) -> int | None:
    if isinstance(exc, stationary.RegimeError):
        return EXIT_REGIME
    if isinstance(exc, (ConfigError, DistributionError, PolicyError)):
        return EXIT_CONFIG
    if isinstance(exc, (stationary.SolverError, IntegrationError, stationary.NoFiniteSolution)):
        return EXIT_SOLVER
    if isinstance(exc, (ValueError, NotImplementedError)):
        return EXIT_CONFIG
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load(args)
        HANDLERS[args.command](cfg, out, args.threads)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _classify_error(exc)
        if code is None:
            raise
        _write_json(out / "error.json", {"command": args.command, "error": type(exc).__name__,
                                         "message": str(exc), "exit_code": code})
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
