"""Command-line entry point: ``dol <subcommand> ...``.

Every subcommand also accepts ``--config FILE.json``; keys of the JSON
object (dashes or underscores) provide defaults for the flags, and explicit
flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .classify import classify, ratio_trace
from .cones import check_cone_invariance, check_order_preservation, estimate_kappa
from .harness import (
    SCHEMA,
    ConfigError,
    _initial_from,
    _json_default,
    density_sweep,
    perturbation_experiment,
    run_report,
)
from .integrator import evolve, trajectory_to_csv
from .model import ModelError, make_model
from .spectrum import SpectrumError, build_decomp, roots_in_strip


def _model_args(p):
    p.add_argument("--model", default="tanh:2",
                   help="feedback family: tanh:A, wright:A, atan:A or linear:B")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--allow-unbounded", action="store_true",
                   help="accept the linear family")
    p.add_argument("--n", type=int, default=256, help="grid points per unit interval")


def _out_arg(p):
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dol", description="Numerical laboratory for x'(t) = -mu x(t) + f(x(t-1)).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate and export t,x,dxdt as CSV")
    _model_args(p)
    p.add_argument("--phi", default="const:0.5")
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--stride", type=float, default=None, help="CSV stride in time units")
    _out_arg(p)

    p = sub.add_parser("classify", help="finite-horizon oscillation verdict as JSON")
    _model_args(p)
    p.add_argument("--phi", default="const:0.5")
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--stride", type=float, default=0.25)
    _out_arg(p)

    p = sub.add_parser("roots", help="characteristic roots per strip")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--beta", type=float, required=False, default=None)
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _out_arg(p)

    p = sub.add_parser("monotone-test", help="cone invariance / order preservation report")
    _model_args(p)
    p.add_argument("--phi", default="lin:1,0.5")
    p.add_argument("--phitilde", default=None)
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--stride", type=float, default=0.25)
    _out_arg(p)

    p = sub.add_parser("ratio", help="Pi_Q / Pi_L ratio trace of an ordered pair as CSV")
    _model_args(p)
    p.add_argument("--phi", default="const:0.2")
    p.add_argument("--phitilde", default="const:0.3")
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--kmax", type=int, default=3)
    _out_arg(p)

    p = sub.add_parser("sweep", help="randomized density sweep")
    _model_args(p)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--amp", type=float, default=0.5)
    p.add_argument("--stride", type=float, default=0.25)
    p.add_argument("--rerun-horizon", type=float, default=1000.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-pseudo-order", action="store_true")
    _out_arg(p)

    p = sub.add_parser("perturb", help="constant-shift perturbation experiment")
    _model_args(p)
    p.add_argument("--phi", default="rapid:1,0.01",
                   help="initial data; rapid:K,AMP gives a strip-K eigenfunction seed")
    p.add_argument("--epsilons", default="1e-3,1e-2,1e-1")
    p.add_argument("--horizon", type=float, default=300.0)
    _out_arg(p)

    p = sub.add_parser("kappa", help="sampling estimate of the cone radius kappa")
    _model_args(p)
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--nsamples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _out_arg(p)

    p = sub.add_parser("run", help="run a JSON experiment config and write reports")
    p.add_argument("experiment_config", help="path to the experiment JSON")
    p.add_argument("--outdir", default="dol-out")

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="JSON file with flag defaults")
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    sp = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sp._actions}
    defaults = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"unknown config key {key!r} for '{args.command}'")
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        defaults[dest] = val
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _model(args):
    return make_model(args.mu, args.model, allow_unbounded=args.allow_unbounded)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return _dispatch(args)
    except (ConfigError, ModelError, SpectrumError, ValueError) as exc:
        print(f"dol: error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "run":
        return run_report(args.experiment_config, args.outdir)

    if cmd == "roots":
        beta = args.beta
        if beta is None:
            raise ConfigError("roots needs --beta")
        rows = [r for k in range(args.kmax + 1) for r in roots_in_strip(args.mu, beta, k)]
        if args.format == "json":
            _emit(_json({"schema": SCHEMA, "mu": args.mu, "beta": beta,
                         "roots": [r.to_dict() for r in rows]}), args.out)
        else:
            lines = ["k,re,im,residual"]
            lines += [f"{r.strip},{r.lam.real!r},{r.lam.imag!r},{r.residual!r}" for r in rows]
            _emit("\n".join(lines) + "\n", args.out)
        return 0

    m = _model(args)
    if cmd == "simulate":
        traj = evolve(m, _initial_from(args.phi, m, args.n), args.T)
        _emit(trajectory_to_csv(traj, args.stride), args.out)
        return 0
    if cmd == "classify":
        v = classify(m, _initial_from(args.phi, m, args.n), args.horizon, args.stride)
        _emit(_json({"schema": SCHEMA, **v.to_dict()}), args.out)
        return 0
    if cmd == "monotone-test":
        phi = _initial_from(args.phi, m, args.n)
        if args.phitilde:
            rep = check_order_preservation(m, phi, _initial_from(args.phitilde, m, args.n),
                                           args.T, args.stride)
        else:
            rep = check_cone_invariance(m, phi, args.T, args.stride)
        _emit(_json({"schema": SCHEMA, **rep.to_dict()}), args.out)
        return 0 if rep.ok else 2
    if cmd == "ratio":
        d = build_decomp(m.mu, m.beta, args.kmax, args.n)
        tr = ratio_trace(d, m, _initial_from(args.phi, m, args.n),
                         _initial_from(args.phitilde, m, args.n), args.T)
        _emit(tr.to_csv(), args.out)
        return 0
    if cmd == "sweep":
        rep = density_sweep(m, {"kind": "fourier", "modes": args.modes, "amp": args.amp},
                            args.count, args.horizon, args.seed, args.stride, args.n,
                            not args.no_pseudo_order, args.rerun_horizon, args.workers)
        _emit(_json(rep.to_dict()), args.out)
        return 2 if rep.violations else 0
    if cmd == "perturb":
        eps = [float(e) for e in str(args.epsilons).split(",") if e.strip()]
        rep = perturbation_experiment(m, _initial_from(args.phi, m, args.n), eps,
                                      args.horizon, args.phi)
        _emit(_json(rep.to_dict()), args.out)
        return 0
    if cmd == "kappa":
        d = build_decomp(m.mu, m.beta, args.kmax, args.n)
        k = estimate_kappa(d, args.nsamples, args.seed)
        _emit(_json({"schema": SCHEMA, "kappa_hat": k, "kappa_safe": k / 2,
                     "regime": d.regime.value, "nsamples": args.nsamples,
                     "seed": args.seed}), args.out)
        return 0
    raise ConfigError(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
