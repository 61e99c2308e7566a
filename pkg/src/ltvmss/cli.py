"""Command-line entry point.

Subcommands: analyze, limits, synthesize, simulate, sweep, verify. Every run
writes its outputs plus ``<command>.config.json`` (the fully resolved
configuration) into ``--out``. Exit status: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from typing import Optional

import numpy as np

from .builtins import builtin_system  # noqa: F401  (re-exported for callers)
from .channel import ChannelModel
from .config import RunConfig, channel_from_dict, dumps, load_json_arg, system_from_dict
from .exceptions import ConfigError, FitError, LTVMSSError, NumericalError, ThresholdError
from .limits import critical_erasure_probability, critical_variance, necessary_condition
from .mcsim import analytic_ms_recursion, estimate_ms_rate, simulate_ensemble
from .spectrum import default_horizon, lyapunov_spectrum
from .synthesis import MEAN_SQUARE, STANDARD, build_certificate, check_mss_certificate, synthesize

log = logging.getLogger("ltvmss")

COMMANDS = ("analyze", "limits", "synthesize", "simulate", "sweep", "verify")

DEFAULTS = {
    "analyze": {"horizon": None, "tol": 1e-3, "transient": None},
    "limits": {"horizon": None, "tol": 1e-3, "mu": None},
    "synthesize": {"horizon": 200, "riccati": MEAN_SQUARE, "r_scale": 1.0, "lookahead": None},
    "simulate": {"horizon": 1000, "realizations": 1000, "seed": 42, "noise_variance": 0.0,
                 "x0": None, "workers": 1, "oracle": True, "riccati": MEAN_SQUARE,
                 "r_scale": 1.0, "lookahead": None, "burn_in": 0.2, "fit_tol": 1e-3},
    "sweep": {"param": "p", "start": 0.01, "stop": 0.99, "num": 99, "mu": 1.0, "horizon": 400,
              "spectrum_horizon": None, "riccati": MEAN_SQUARE, "r_scale": 1.0, "lookahead": None,
              "rate": True, "burn_in": 0.2, "fit_tol": 1e-3},
    "verify": {"horizon": 200, "truncation": 200, "riccati": MEAN_SQUARE, "r_scale": 1.0,
               "lookahead": None},
}


# -- argument parsing --------------------------------------------------------


def _common(p):
    src = p.add_argument_group("system / channel")
    src.add_argument("--builtin", help="built-in system: example1, example2, example2-verbatim")
    src.add_argument("--system", help="system description: JSON file path or inline JSON")
    src.add_argument("--dt", type=float, help="sampling step for example1 (default 0.1)")
    src.add_argument("--channel", help="channel description: JSON file path or inline JSON")
    src.add_argument("--p", type=float, help="shorthand for a Bernoulli channel with non-erasure probability p")
    p.add_argument("--config", help="re-run from an echoed <command>.config.json")
    p.add_argument("--out", default="out", help="output directory (default ./out)")


def _riccati_opts(p):
    p.add_argument("--riccati", choices=(MEAN_SQUARE, STANDARD), help="Riccati form used for the gains")
    p.add_argument("--r-scale", type=float, help="R(t) = r_scale * I (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltvmss", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="Lyapunov spectrum (JSON)")
    _common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--transient", type=int)

    p = sub.add_parser("limits", help="critical thresholds and verdict (JSON)")
    _common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--mu", type=float, help="mean connectivity for sigma* when no channel is given (default 1)")

    p = sub.add_parser("synthesize", help="time-varying gains (CSV) and Riccati bounds (JSON)")
    _common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--lookahead", type=int)
    _riccati_opts(p)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble (CSV)")
    _common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-variance", type=float)
    p.add_argument("--x0", help="initial state, comma separated (default all ones)")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-oracle", dest="oracle", action="store_const", const=False)
    p.add_argument("--lookahead", type=int)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--fit-tol", type=float)
    _riccati_opts(p)

    p = sub.add_parser("sweep", help="verdicts and fitted rates over a p or sigma2 grid (CSV)")
    _common(p)
    p.add_argument("--param", choices=("p", "sigma2"))
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int)
    p.add_argument("--mu", type=float, help="mean connectivity for sigma2 sweeps (default 1)")
    p.add_argument("--horizon", type=int, help="moment-recursion horizon for the rate fit")
    p.add_argument("--spectrum-horizon", type=int)
    p.add_argument("--no-rate", dest="rate", action="store_const", const=False)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--fit-tol", type=float)
    _riccati_opts(p)

    p = sub.add_parser("verify", help="Lyapunov certificate report (JSON)")
    _common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--truncation", type=int)
    _riccati_opts(p)
    return parser


def resolve_config(args) -> RunConfig:
    """Turn parsed arguments (or an echoed config file) into a RunConfig."""
    if args.config:
        cfg = RunConfig.from_dict(load_json_arg(args.config, "config"))
        if cfg.command != args.command:
            raise ConfigError(f"config.command: file is for {cfg.command!r}, not {args.command!r}")
        params = dict(DEFAULTS[args.command])
        params.update(cfg.params)
        cfg.params = params
        return cfg

    if bool(args.builtin) == bool(args.system):
        raise ConfigError("system: give exactly one of --builtin or --system")
    if args.builtin:
        system = {"kind": "builtin", "builtin": args.builtin, "dt": 0.1 if args.dt is None else args.dt}
    else:
        system = load_json_arg(args.system, "system")
        if args.dt is not None and isinstance(system, dict):
            system["dt"] = args.dt

    channel = None
    if args.channel and args.p is not None:
        raise ConfigError("channel: give at most one of --channel or --p")
    if args.channel:
        channel = load_json_arg(args.channel, "channel")
    elif args.p is not None:
        channel = {"kind": "bernoulli", "p": args.p}

    params = dict(DEFAULTS[args.command])
    for key in params:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    return RunConfig(args.command, system, channel, params)


# -- output helpers ------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return format(float(v), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, obj):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(dumps(obj))


# -- commands ------------------------------------------------------------------


def _system_and_channel(cfg, need_channel):
    system = system_from_dict(cfg.system)
    channel = channel_from_dict(cfg.channel)
    if need_channel and channel is None:
        raise ConfigError("channel: this command needs --channel or --p")
    return system, channel


def _spectrum(system, params, horizon_key="horizon"):
    horizon = params.get(horizon_key)
    if horizon is None:
        horizon = default_horizon(system)
    return lyapunov_spectrum(system, horizon, params.get("tol", 1e-3), params.get("transient"))


def _gains(system, mu, sigma2, T, params):
    return synthesize(system, mu, sigma2, T, form=params["riccati"], R=params["r_scale"],
                      lookahead=params["lookahead"])


def cmd_analyze(cfg, out):
    system, _ = _system_and_channel(cfg, False)
    spec = _spectrum(system, cfg.params)
    cfg.params["horizon"] = spec.horizon
    cfg.params["transient"] = spec.transient
    report = spec.to_dict()
    _write_json(os.path.join(out, "analyze.json"), report)
    return report


def cmd_limits(cfg, out):
    system, channel = _system_and_channel(cfg, False)
    spec = _spectrum(system, cfg.params)
    cfg.params["horizon"] = spec.horizon
    M = system.n_inputs
    report = {"p_star": critical_erasure_probability(spec, M), "lhs": None, "satisfied": None}
    if channel is not None:
        mu, sigma2 = channel.moments()
        verdict = necessary_condition(spec, mu, sigma2, M)
        report.update(lhs=verdict.lhs, satisfied=verdict.satisfied, margin=verdict.margin,
                      at_boundary=verdict.at_boundary)
    else:
        mu = 1.0 if cfg.params["mu"] is None else cfg.params["mu"]
        cfg.params["mu"] = mu
    report.update(sigma_star=critical_variance(spec, mu, M), mu=mu,
                  regime="necessary-and-sufficient" if M == system.n_states else "necessary-only",
                  M=M, N=system.n_states, N1=spec.N1, exponents=[float(x) for x in spec.exponents])
    _write_json(os.path.join(out, "limits.json"), report)
    return report


def cmd_synthesize(cfg, out):
    system, channel = _system_and_channel(cfg, True)
    mu, sigma2 = channel.moments()
    T = cfg.params["horizon"]
    sched, gains = _gains(system, mu, sigma2, T, cfg.params)
    M, N = system.n_inputs, system.n_states
    header = ["t"] + [f"k{i}_{j}" for i in range(M) for j in range(N)]
    _write_csv(os.path.join(out, "gains.csv"), header,
               ([t] + list(np.asarray(K).ravel()) for t, K in enumerate(gains.K)))
    report = {"alpha1": sched.alpha1, "alpha2": sched.alpha2, "mu": mu, "sigma2": sigma2,
              "riccati": sched.form, "riccati_horizon": sched.T, "discard": sched.discard}
    _write_json(os.path.join(out, "synthesize.json"), report)
    return report


def _x0(system, params):
    if params["x0"] is None:
        x0 = [1.0] * system.n_states
    elif isinstance(params["x0"], str):
        try:
            x0 = [float(v) for v in params["x0"].split(",")]
        except ValueError:
            raise ConfigError(f"x0: expected comma-separated numbers, got {params['x0']!r}") from None
    else:
        x0 = [float(v) for v in params["x0"]]
    if len(x0) != system.n_states:
        raise ConfigError(f"x0: expected {system.n_states} entries, got {len(x0)}")
    params["x0"] = x0
    return np.array(x0)


def cmd_simulate(cfg, out):
    system, channel = _system_and_channel(cfg, True)
    p = cfg.params
    mu, sigma2 = channel.moments()
    x0 = _x0(system, p)
    T = p["horizon"]
    _, gains = _gains(system, mu, sigma2, T, p)
    stats = simulate_ensemble(system, gains, channel, x0, T, p["realizations"], seed=p["seed"],
                              noise_variance=p["noise_variance"], workers=p["workers"])
    oracle = None
    if p["oracle"]:
        oracle = analytic_ms_recursion(system, gains, mu, sigma2, x0, T, p["noise_variance"])
    rows = ((t, stats.msq[t], None if oracle is None else oracle[t], stats.flagged[t]) for t in range(T + 1))
    _write_csv(os.path.join(out, "simulate.csv"), ["t", "msq", "oracle", "flagged_count"], rows)
    report = {"T": T, "n": stats.n, "seed": stats.seed, "flagged_count": stats.flagged_count,
              "tail_mean_msq": float(np.mean(stats.msq[T // 2:]))}
    try:
        rate = estimate_ms_rate(stats, burn_in=p["burn_in"], tol=p["fit_tol"])
        report.update(K_hat=rate.K, beta_hat=rate.beta, fit_residual=rate.residual, ms_stable=rate.stable)
    except FitError as exc:
        report.update(K_hat=None, beta_hat=None, fit_error=str(exc))
    _write_json(os.path.join(out, "simulate.json"), report)
    return report


def cmd_sweep(cfg, out):
    system, _ = _system_and_channel(cfg, False)
    p = cfg.params
    if p["param"] not in ("p", "sigma2"):
        raise ConfigError(f"param: expected 'p' or 'sigma2', got {p['param']!r}")
    if p["num"] < 1:
        raise ConfigError("num: must be >= 1")
    spec = _spectrum(system, {"horizon": p["spectrum_horizon"], "tol": 1e-3})
    p["spectrum_horizon"] = spec.horizon
    M = system.n_inputs
    x0 = np.ones(system.n_states)
    rows = []
    for value in np.linspace(p["start"], p["stop"], p["num"]):
        if p["param"] == "p":
            ch = ChannelModel.bernoulli(value)
        else:
            if value < 0:
                raise ConfigError(f"start/stop: sigma2 grid contains a negative value {value}")
            ch = ChannelModel.gaussian(p["mu"], value)
        mu, sigma2 = ch.moments()
        try:
            v = necessary_condition(spec, mu, sigma2, M)
            lhs, sat = v.lhs, v.satisfied
        except ThresholdError:
            lhs, sat = None, None
        beta = stable = None
        if p["rate"] and mu != 0:
            try:
                _, gains = _gains(system, mu, sigma2, p["horizon"], p)
                traj = analytic_ms_recursion(system, gains, mu, sigma2, x0, p["horizon"])
                rate = estimate_ms_rate(traj, burn_in=p["burn_in"], tol=p["fit_tol"])
                beta, stable = rate.beta, rate.stable
            except (NumericalError, FitError) as exc:
                log.info("rate unavailable at %s=%g: %s", p["param"], value, exc)
        rows.append((value, mu, sigma2, lhs, sat, beta, stable))
    _write_csv(os.path.join(out, "sweep.csv"),
               ["value", "mu", "sigma2", "lhs", "satisfied", "beta_hat", "ms_stable"], rows)
    return {"rows": len(rows), "p_star": critical_erasure_probability(spec, M)}


def cmd_verify(cfg, out):
    system, channel = _system_and_channel(cfg, True)
    p = cfg.params
    mu, sigma2 = channel.moments()
    T, trunc = p["horizon"], p["truncation"]
    sched, gains = _gains(system, mu, sigma2, T + trunc, p)
    report = {"mu": mu, "sigma2": sigma2, "horizon": T, "truncation": trunc,
              "riccati": {"form": sched.form, "alpha1": sched.alpha1, "alpha2": sched.alpha2}}
    try:
        spec = _spectrum(system, {"horizon": None, "tol": 1e-3})
        report["necessary_condition"] = necessary_condition(spec, mu, sigma2, system.n_inputs).to_dict()
    except ThresholdError as exc:
        report["necessary_condition"] = {"error": str(exc)}
    try:
        cert = build_certificate(system, gains, mu, sigma2, trunc)
        check = check_mss_certificate(system, cert, gains, mu, sigma2)
        summary = check.to_dict()
        summary.pop("margins")
        report["certificate"] = {"diverged": False, **summary}
    except NumericalError as exc:
        report["certificate"] = {"diverged": True, "t": exc.t, "message": str(exc), "passed": False}
    _write_json(os.path.join(out, "verify.json"), report)
    return report


_RUNNERS = {
    "analyze": cmd_analyze,
    "limits": cmd_limits,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def run_command(argv: Optional[list] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        report = _RUNNERS[cfg.command](cfg, args.out)
        _write_json(os.path.join(args.out, f"{cfg.command}.config.json"), cfg.to_dict())
    except (ConfigError, ThresholdError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except LTVMSSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(dumps(report))
    return 0


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
