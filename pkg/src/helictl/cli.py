"""Command-line front end: ``helictl {params,trim,linearize,synth,fly,check}``.

Exit codes: 0 success, 1 a property or certificate failed (or a flight
aborted), 2 bad usage or unreadable input, 3 a numerical step failed
(trim, gamma search, synthesis).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from . import checks, hinf
from .errors import (ConfigParseError, GammaInfeasibleError, HelictlError, SynthesisError,
                     TrimError, ValidationError)
from .linearize import LinearModel, find_trim, jacobians
from .params import load_params
from .scenario import PRESETS, flight_metrics, paper_hover, prepare, run_batch, run_scenario

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
LONG_HOLD = 1200.0


class UsageError(Exception):
    pass


def _load(args):
    return load_params(args.config)


def _need_file(path, what):
    if path is not None and not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def cmd_params(args):
    heli, ctrl, prov = load_params(args.config, with_provenance=True)
    print(prov.report(heli, ctrl), end="")
    return EXIT_OK


def cmd_trim(args):
    heli, _ = _load(args)
    tr = find_trim(heli, psi=math.radians(args.psi))
    print(tr.summary())
    return EXIT_OK


def cmd_linearize(args):
    heli, ctrl = _load(args)
    tr = find_trim(heli, psi=math.radians(args.psi))
    model = jacobians(tr, heli, ctrl)
    model.to_file(args.out)
    for w in model.warnings:
        print(f"warning: step-halving disagreement in {w[0]}[{w[1]},{w[2]}]: "
              f"{w[3]:.6g} vs {w[4]:.6g}", file=sys.stderr)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_synth(args):
    _need_file(args.model, "model file")
    heli, ctrl = _load(args)
    if args.model:
        model = LinearModel.from_file(args.model)
    else:
        model = jacobians(find_trim(heli), heli, ctrl)
    gains = hinf.synthesize(model, ctrl)
    gains.to_file(args.out, comment=f"gamma = {gains.gamma!r}")
    rep = hinf.gamma_formula_report(model)
    norm, cert = hinf.verify_hinf_norm(model, gains)
    lines = [f"gamma (bisection x {ctrl.gamma_margin:g}) = {gains.gamma:.6g}",
             "closed-form estimate = "
             + (f"{rep['gamma']:.6g}" if rep["gamma"] is not None else f"n/a ({rep['reason']})"),
             f"closed-loop slowest pole = {gains.closed_loop_spectrum.real.max():.4f}",
             f"certificate: {cert}"]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.report:
        Path(args.report).write_text(text)
    print(f"wrote {args.out}")
    return EXIT_OK if cert.passed else EXIT_PROPERTY


def _scenario_from_args(args, seed):
    hold = LONG_HOLD if args.long else args.hold
    if args.scenario == "paper_hover":
        return paper_hover(seed=seed, hold=hold, gust_start=args.gust_start,
                           gust_speed=args.gust_speed)
    return PRESETS[args.scenario](seed=seed, duration=hold)


def cmd_fly(args):
    _need_file(args.gains, "gains file")
    heli, ctrl = _load(args)
    if args.gains:
        trim = find_trim(heli)
        gains = hinf.GainSet.from_file(args.gains)
    else:
        trim, _, gains = prepare(heli, ctrl)
    seeds = args.seeds or [args.seed]
    scenarios = [_scenario_from_args(args, s) for s in seeds]
    t0 = time.perf_counter()
    if len(scenarios) == 1:
        logs = [run_scenario(scenarios[0], heli, ctrl, gains, trim)]
    else:
        logs = run_batch(scenarios, heli, ctrl, gains, trim, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    status = EXIT_OK
    for seed, log in zip(seeds, logs):
        out = Path(args.out)
        if len(logs) > 1:
            out = out.with_name(f"{out.stem}_seed{seed}{out.suffix}")
        log.to_csv(out)
        if args.figures:
            fig_dir = Path(args.figures) / (f"seed{seed}" if len(logs) > 1 else "")
            log.write_figure_bundles(fig_dir)
        m = flight_metrics(log, ctrl=ctrl)
        print(f"seed {seed}: {log.status}{' (' + log.error + ')' if log.error else ''}; "
              f"rows {len(log)}; hover RMS {m.hover_rms:.4f} m; heading error "
              f"{m.heading_error_deg:.3f} deg; yaw overshoot {m.yaw_overshoot:.2%}; "
              f"min margin {m.min_margin:.4f}; wrote {out}")
        if not log.completed:
            status = EXIT_PROPERTY
    print(f"simulated in {elapsed:.2f} s")
    return status


def cmd_check(args):
    heli, ctrl = _load(args)
    rows = checks.run_all(heli, ctrl, scenario=not args.skip_scenario)
    text = "\n".join(r.line() for r in rows) + "\n"
    print(text, end="")
    failed = [r for r in rows if not r.passed]
    if failed:
        report = Path(args.report)
        report.write_text(text)
        print(f"{len(failed)} check(s) failed; report written to {report}", file=sys.stderr)
        return EXIT_PROPERTY
    print(f"all {len(rows)} checks passed")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="helictl", description="Helicopter hover control toolkit.")
    ap.add_argument("--config", help="parameter file (default: $HELICTL_CONFIG_DIR/default.cfg "
                                     "or the shipped defaults)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print parameters with their provenance")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("trim", help="solve and print the hover trim")
    p.add_argument("--psi", type=float, default=0.0, help="heading, deg")
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("linearize", help="write the linear attitude model")
    p.add_argument("--psi", type=float, default=0.0, help="heading, deg")
    p.add_argument("--out", default="model.txt")
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("synth", help="synthesize gains, report gamma and the norm certificate")
    p.add_argument("--model", help="linear model file (default: linearize the config)")
    p.add_argument("--out", default="gains.txt")
    p.add_argument("--report", help="also write the gamma/certificate report here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fly", help="run a closed-loop scenario and write its log")
    p.add_argument("--scenario", choices=sorted(PRESETS), default="paper_hover")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--seeds", type=int, nargs="+", help="batch of seeds, one log each")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for --seeds")
    p.add_argument("--hold", type=float, default=60.0, help="hover hold, s")
    p.add_argument("--long", action="store_true", help=f"{LONG_HOLD:g} s hold")
    p.add_argument("--gust-start", type=float, default=20.0, help="s into the hold")
    p.add_argument("--gust-speed", type=float, default=3.0, help="m/s")
    p.add_argument("--gains", help="frozen gain file from 'synth'")
    p.add_argument("--out", default="log.csv")
    p.add_argument("--figures", help="directory for per-figure CSV bundles")
    p.set_defaults(func=cmd_fly)

    p = sub.add_parser("check", help="run the property suite")
    p.add_argument("--skip-scenario", action="store_true", help="skip the closed-loop flight")
    p.add_argument("--report", default="check_report.txt", help="report path on failure")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            _need_file(args.config, "config file")
        return args.func(args)
    except (UsageError, ConfigParseError, ValidationError, FileNotFoundError) as exc:
        print(f"helictl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrimError, GammaInfeasibleError, SynthesisError) as exc:
        print(f"helictl: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HelictlError as exc:
        print(f"helictl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
