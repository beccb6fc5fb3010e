"""Command-line entry point ``piezo-lab``.

Exit status: 0 on success, 1 for configuration errors (JSON on stderr),
2 for numerical failures such as a singular shift or non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io, plots, suites
from .config import ConfigError, ExperimentConfig, load_config
from .discretization import assemble, build_mesh, cutoff_frequency, generator, project_initial_data
from .linalg import ConvergenceError, SingularMatrixError
from .spectral import SingularShiftError, abscissa_trend, resolvent_sweep, spectrum
from .timestepper import run
from .verification import (OracleError, TailGuardError, decay_fit, multiplier_check, random_forcing,
                           resolvent_identity_check, static_solve)

NUMERICAL_ERRORS = (SingularShiftError, ConvergenceError, SingularMatrixError, OracleError,
                    TailGuardError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


def _system(cfg: ExperimentConfig, n: int | None = None):
    p = cfg.params
    return assemble(build_mesh(n or cfg.n_elements, p.L), p)


def _simulate(cfg: ExperimentConfig, record_every=None):
    s = _system(cfg)
    x0 = project_initial_data(cfg.initial_condition, s)
    return run(s, x0, dt=cfg.dt, t_end=cfg.t_end, record_every=record_every or cfg.record_every,
               backend=cfg.backend)


def _emit(args, payload: dict, cfg, command: str):
    meta = io.metadata(cfg, command)
    if args.out:
        io.write_json(args.out, payload, meta)
    print(io.to_json(payload))


def _spectrum_payload(cfg):
    gen = generator(_system(cfg))
    rep = spectrum(gen, band=cfg.band)
    return rep, {
        "n_elements": cfg.n_elements,
        "eigenvalues": [complex(z) for z in rep.eigenvalues],
        "spectral_abscissa": rep.spectral_abscissa,
        "resolved_abscissa": rep.resolved_abscissa,
        "cutoff": rep.cutoff,
        "branch_fit": rep.branch_fit.as_dict() if rep.branch_fit else None,
    }


def _sweep(cfg, args):
    lmin = cfg.lmin if args.lmin is None else args.lmin
    lmax = cfg.lmax if args.lmax is None else args.lmax
    points = cfg.points if args.points is None else args.points
    if not (0 <= lmin < lmax) or points < 2:
        raise ConfigError({"lmin/lmax/points": "need 0 <= lmin < lmax and points >= 2"})
    gen = generator(_system(cfg))
    band = tuple(cfg.band)
    cut = cutoff_frequency(gen.system.mesh, cfg.params)
    if band[1] > cut:
        band = None
    return resolvent_sweep(gen, np.linspace(lmin, lmax, points), band=band)


def _window(cfg, args):
    return tuple(args.window) if args.window else tuple(cfg.window)


def cmd_simulate(args, cfg):
    tr = _simulate(cfg)
    summary = {
        "steps": int(len(tr.step_dissipation)),
        "dt": tr.dt,
        "E0": float(tr.step_energy[0]),
        "E_end": float(tr.step_energy[-1]),
        "max_step_residual": float(np.max(np.abs(tr.step_residual()))) if tr.step_dissipation.size else 0.0,
    }
    if args.out:
        io.write_csv(args.out, io.TRAJECTORY_HEADER, io.trajectory_rows(tr), io.metadata(cfg, "simulate"))
    print(io.to_json(summary))


def cmd_spectrum(args, cfg):
    _, payload = _spectrum_payload(cfg)
    meta = io.metadata(cfg, "spectrum")
    if args.out:
        io.write_json(args.out, payload, meta)
    short = {k: v for k, v in payload.items() if k != "eigenvalues"}
    short["count"] = len(payload["eigenvalues"])
    print(io.to_json(short))


def cmd_resolvent(args, cfg):
    sw = _sweep(cfg, args)
    fit = sw.growth_fit.as_dict() if sw.growth_fit else None
    payload = {
        "growth_fit": fit,
        "exponent": fit["exponent"] if fit else None,
        "peaks": [[float(a), float(b)] for a, b in zip(sw.peak_lambdas, sw.peak_norms)],
    }
    meta = io.metadata(cfg, "resolvent")
    if args.out:
        if str(args.out).endswith(".json"):
            payload["lambdas"] = sw.lambdas
            payload["norms"] = sw.norms
            io.write_json(args.out, payload, meta)
        else:
            meta["growth_fit"] = fit
            meta["peaks"] = payload["peaks"]
            io.write_csv(args.out, ("lambda", "norm", "sigma_min"),
                         zip(sw.lambdas, sw.norms, sw.sigma_min), meta)
    print(io.to_json({k: payload[k] for k in ("growth_fit", "exponent")}))


def cmd_abscissa_trend(args, cfg):
    trend = abscissa_trend(cfg.params, cfg.n_list)
    ab = [a for _, a in trend]
    payload = {
        "n_list": [n for n, _ in trend],
        "abscissa": ab,
        "strictly_increasing": bool(all(b > a for a, b in zip(ab, ab[1:]))),
    }
    _emit(args, payload, cfg, "abscissa-trend")


def cmd_decay(args, cfg):
    window = _window(cfg, args)
    if cfg.t_end < window[1]:
        cfg = cfg.replace(t_end=window[1])
    tr = _simulate(cfg)
    rep = spectrum(generator(tr.system), band=None)
    fit = decay_fit(tr, window, abscissa=rep.resolved_abscissa)
    payload = fit.as_dict()
    payload["abscissa"] = rep.resolved_abscissa
    _emit(args, payload, cfg, "decay")


def cmd_multiplier(args, cfg):
    tr = _simulate(cfg, record_every=1)
    _emit(args, multiplier_check(tr).as_dict(), cfg, "multiplier-check")


def cmd_identity(args, cfg):
    lam = args.lam
    out = []
    for n in cfg.n_list:
        s = _system(cfg, n)
        F = random_forcing(s.mesh, np.random.default_rng(cfg.seed))
        out.append(resolvent_identity_check(s, lam, F).as_dict())
    res = [r["residual"] for r in out]
    payload = {"lambda": lam, "reports": out,
               "residual_decreasing": bool(all(b < a for a, b in zip(res, res[1:]))),
               "bound_holds": bool(all(r["bound_holds"] for r in out))}
    _emit(args, payload, cfg, "resolvent-identity")


def cmd_static(args, cfg):
    out = []
    for n in cfg.n_list:
        s = _system(cfg, n)
        r = static_solve(s, random_forcing(s.mesh, np.random.default_rng(cfg.seed)))
        out.append({"n": n, "residual": r.residual, "ratio": r.ratio})
    ratios = [o["ratio"] for o in out]
    payload = {"solves": out, "ratio_variation": (max(ratios) - min(ratios)) / max(ratios)}
    _emit(args, payload, cfg, "static-solve")


def cmd_verify(args, cfg):
    try:
        report = suites.run_suites(cfg, args.suite)
    except KeyError as exc:
        raise ConfigError({"suite": f"unknown suite {exc.args[0]}; choose from all, {', '.join(suites.SUITES)}"})
    _emit(args, report, cfg, "verify")
    return 0 if report["passed"] else 3


def cmd_plot(args, cfg):
    if not args.kind:
        raise ConfigError({"kind": f"--kind is required; one of {list(plots.KINDS)}"})
    if args.kind not in plots.KINDS:
        raise ConfigError({"kind": f"unknown plot kind {args.kind!r}; one of {list(plots.KINDS)}"})
    out = args.out or f"{args.kind}.svg"
    if args.kind == "energy_decay_loglog":
        window = _window(cfg, args)
        if cfg.t_end < window[1]:
            cfg = cfg.replace(t_end=window[1])
        tr = _simulate(cfg)
        fit = decay_fit(tr, window)
        plots.energy_decay_loglog(tr.times, tr.energy, out, fit)
    elif args.kind == "spectrum_scatter":
        rep, _ = _spectrum_payload(cfg)
        plots.spectrum_scatter(rep.eigenvalues, out, rep.cutoff)
    elif args.kind == "resolvent_sweep":
        sw = _sweep(cfg, args)
        plots.resolvent_sweep(sw.lambdas, sw.norms, out, sw.peak_lambdas, sw.peak_norms, sw.growth_fit)
    else:
        trend = abscissa_trend(cfg.params, cfg.n_list)
        plots.abscissa_trend([n for n, _ in trend], [a for _, a in trend], out)
    print(io.to_json({"kind": args.kind, "out": out}))


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "resolvent": cmd_resolvent,
    "abscissa-trend": cmd_abscissa_trend,
    "decay": cmd_decay,
    "multiplier-check": cmd_multiplier,
    "resolvent-identity": cmd_identity,
    "static-solve": cmd_static,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="piezo-lab", description="Piezoelectric beam with tip bodies: simulation and spectra.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output file")
        if name in ("resolvent", "plot"):
            sp.add_argument("--lmin", type=float)
            sp.add_argument("--lmax", type=float)
            sp.add_argument("--points", type=int)
        if name in ("decay", "plot"):
            sp.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))
        if name == "verify":
            sp.add_argument("--suite", default="all")
        if name == "plot":
            sp.add_argument("--kind")
        if name == "resolvent-identity":
            sp.add_argument("--lam", type=float, default=5.0, help="shift lambda (default 5)")
    return parser


def _fail(code: int, payload: dict) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(1, {"error": "usage", "message": str(exc)})
    try:
        cfg = load_config(args.config)
        if getattr(args, "window", None):
            t0, t1 = args.window
            if not (0 < t0 < t1):
                raise ConfigError({"window": "need 0 < T0 < T1"})
        code = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        return _fail(1, exc.as_dict())
    except NUMERICAL_ERRORS as exc:
        return _fail(2, {"error": "numerical", "type": type(exc).__name__, "message": str(exc)})
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
