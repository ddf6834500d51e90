"""Command-line interface.

Exit codes: 0 success/PASS, 1 FAIL (a threshold was exceeded, or a check
could not be completed), 2 invalid input.

CSV columns
-----------
sweep:       n, i_total_per_sample, i_x_per_sample, i_cond_per_sample, residual
             (last row has n = "limit" and holds the closed-form rates)
simulate:    periodogram_e.csv, analytic_psd_e.csv  -> theta, density
             covariance_e.csv                        -> lag, covariance
             trajectories_<signal>.csv (--export-trajectories) -> trial, t1..tn
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys

from . import __version__
from .config import ConfigError, LoopConfig, load_config
from .errors import InfoflowError, InsufficientDataError, InvalidLoopError
from .gaussian_net import ORACLE_LIMIT, finite_report
from .lti import validate_loop
from .rates import closed_form_rates
from .simulate import (
    SimulationConfig,
    empirical_covariance,
    export_trajectories,
    periodogram_psd,
    rms_relative_error,
    simulate_loop,
    write_covariance_csv,
)
from .spectral import bode_integral_poles, integrate, output_spectrum

SCHEMA = "infoflow.run-report/1"
RESIDUAL_TOL = 1e-8
ORACLE_TOL = 1e-7
PSD_RMS_TOL = 0.05
EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (
        _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
        if epoch
        else _dt.datetime.now(_dt.timezone.utc)
    )
    return when.isoformat(timespec="seconds")


def run_report(command: str, cfg: LoopConfig, results: dict) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "config": cfg.to_dict(),
        "results": results,
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }


def _f(x) -> str:
    return "n/a" if x is None else f"{x:.6f}"


def _emit(report: dict, as_json: bool, lines: list[str], out) -> None:
    if as_json:
        json.dump(report, out, indent=2)
        out.write("\n")
    else:
        out.write("\n".join(lines) + "\n")


def cmd_analyze(cfg: LoopConfig, args, out) -> int:
    rates = closed_form_rates(cfg.loop, cfg.quad)
    try:
        bode = bode_integral_poles(cfg.loop.plant)
    except InfoflowError:
        bode = None
    results = {"rates": rates.to_dict(cfg.loop), "bode_integral_poles": bode}
    lines = [
        "closed-form rates (nats/sample)",
        f"  r_x      = {_f(rates.r_x)}    (log-sensitivity integral)",
        f"  r_cond   = {_f(rates.r_cond)}    (1/2 ln(1 + sigma_w2/sigma_v2))",
        f"  r_total  = {_f(rates.r_total)}    (r_x + r_cond)",
        f"  r_total  = {_f(rates.r_total_psd)}    (entropy-rate difference from spectra)",
        f"  conservation residual = {rates.conservation_residual:.3e}",
        f"  Bode cross-check: sum ln|unstable poles| = {_f(bode)}",
    ]
    _emit(run_report("analyze", cfg, results), args.json, lines, out)
    return EXIT_OK


def _horizon(cfg: LoopConfig, args) -> int:
    n = cfg.horizon if args.n is None else args.n
    if n < 1:
        raise UsageError("horizon n must be >= 1")
    return n


def cmd_finite(cfg: LoopConfig, args, out) -> int:
    n = _horizon(cfg, args)
    rep = finite_report(cfg.loop, n, oracle_limit=args.oracle_limit)
    ps = rep.per_sample
    lines = [
        f"finite horizon n = {n} (nats; per sample in brackets)",
        f"  I(y^n -> e^n)      = {_f(rep.i_total)}  [{_f(ps['i_total'])}]",
        f"  I(x^n -> e^n)      = {_f(rep.i_x)}  [{_f(ps['i_x'])}]",
        f"  I(y^n -> e^n | x0) = {_f(rep.i_cond)}  [{_f(ps['i_cond'])}]",
        f"  residual = {rep.residual:.3e}",
    ]
    if rep.oracle_error:
        lines.append(f"  definition oracle: {rep.oracle_error}")
    elif rep.oracle_max_disagreement is not None:
        lines.append(f"  definition oracle max disagreement = {rep.oracle_max_disagreement:.3e}")
    _emit(run_report("finite", cfg, {"finite": rep.to_dict()}), args.json, lines, out)
    return EXIT_OK


def cmd_verify(cfg: LoopConfig, args, out) -> int:
    n = _horizon(cfg, args)
    rep = finite_report(cfg.loop, n, oracle_limit=args.oracle_limit)
    ok = abs(rep.residual) <= RESIDUAL_TOL
    oracle_ran = n <= args.oracle_limit
    if oracle_ran:
        ok = ok and rep.oracle_error is None and rep.oracle_max_disagreement <= ORACLE_TOL
    lines = [
        f"conservation check at n = {n}",
        f"  I(y^n -> e^n)      = {_f(rep.i_total)}",
        f"  I(x^n -> e^n)      = {_f(rep.i_x)}",
        f"  I(y^n -> e^n | x0) = {_f(rep.i_cond)}",
        f"  residual = {rep.residual:.3e} (tolerance {RESIDUAL_TOL:g})",
    ]
    if rep.oracle_error:
        lines.append(f"  definition oracle failed: {rep.oracle_error}")
    elif oracle_ran:
        lines.append(
            f"  definition oracle max disagreement = {rep.oracle_max_disagreement:.3e} (tolerance {ORACLE_TOL:g})"
        )
    else:
        lines.append(f"  definition oracle skipped (n > {args.oracle_limit})")
    lines.append("PASS" if ok else "FAIL")
    results = {"finite": rep.to_dict(), "pass": ok, "residual_tol": RESIDUAL_TOL, "oracle_tol": ORACLE_TOL}
    _emit(run_report("verify", cfg, results), args.json, lines, out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(cfg: LoopConfig, args, out) -> int:
    ns = args.n_list
    if any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise UsageError("sweep horizons must be >= 1 and strictly ascending")
    rates = closed_form_rates(cfg.loop, cfg.quad)
    fh = open(args.out, "w", newline="") if args.out else out
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["n", "i_total_per_sample", "i_x_per_sample", "i_cond_per_sample", "residual"])
        for n in ns:
            rep = finite_report(cfg.loop, n, oracle_limit=0)
            ps = rep.per_sample
            wr.writerow([n, repr(ps["i_total"]), repr(ps["i_x"]), repr(ps["i_cond"]), repr(rep.residual)])
            fh.flush()
        wr.writerow(
            ["limit", repr(rates.r_total), repr(rates.r_x), repr(rates.r_cond), repr(rates.conservation_residual)]
        )
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_simulate(cfg: LoopConfig, args, out) -> int:
    n = _horizon(cfg, args)
    trials = cfg.trials if args.trials is None else args.trials
    seed = cfg.seed if args.seed is None else args.seed
    os.makedirs(args.out, exist_ok=True)
    batch = simulate_loop(SimulationConfig(cfg.loop, n, trials, seed))
    summary = {"n": n, "trials": trials, "seed": seed, "rng": batch.algorithm}
    lines = [f"simulated {trials} trials of {n} samples (seed {seed})"]

    lag_window = min(args.lag_window, max(0, (n - 1) // 2))
    try:
        cov = empirical_covariance(batch, "e", lag_window)
    except InsufficientDataError as exc:
        summary["covariance"] = None
        lines.append(f"  covariance skipped: {exc}")
    else:
        write_covariance_csv(os.path.join(args.out, "covariance_e.csv"), cov)
        summary["covariance"] = {
            "lag0_empirical": float(cov[0]),
            "lag0_analytic": integrate(output_spectrum(cfg.loop), cfg.quad),
        }
        lines.append(
            f"  Var(e) tail: empirical {cov[0]:.6f}, analytic {summary['covariance']['lag0_analytic']:.6f}"
        )

    ok = True
    try:
        pg = periodogram_psd(batch, "e")
    except InsufficientDataError as exc:
        summary["mode"] = "covariance-only"
        summary["periodogram"] = None
        lines.append(f"  periodogram comparison refused ({exc}); covariance-only mode")
    else:
        analytic = output_spectrum(cfg.loop)
        pg.to_csv(os.path.join(args.out, "periodogram_e.csv"))
        analytic.sample(pg.theta).to_csv(os.path.join(args.out, "analytic_psd_e.csv"))
        rms = rms_relative_error(pg, analytic)
        ok = rms <= PSD_RMS_TOL
        summary["mode"] = "periodogram"
        summary["periodogram"] = {"rms_relative_error": rms, "tolerance": PSD_RMS_TOL, "pass": ok}
        lines.append(f"  periodogram vs |S|^2 (sigma_v2 + sigma_w2): RMS relative error {rms:.4f}")
        lines.append("PASS" if ok else "FAIL")
    if args.export_trajectories:
        export_trajectories(batch, args.out)
    report = run_report("simulate", cfg, {"simulation": summary})
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(report, args.json, lines, out)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="infoflow",
        description="Directed information flows in LTI feedback loops over AWGN channels.",
        epilog="CSV columns" + __doc__.split("CSV columns", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"infoflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="loop configuration file (JSON or YAML)")
        sp.add_argument("--json", action="store_true", help="print the JSON run report instead of a table")
        return sp

    add("analyze", "closed-form asymptotic rates")
    for name, help_ in (("finite", "exact finite-horizon quantities"), ("verify", "conservation check")):
        sp = add(name, help_)
        sp.add_argument("-n", type=int, default=None, help="horizon (default: config horizon)")
        sp.add_argument("--oracle-limit", type=int, default=ORACLE_LIMIT)
    sp = add("sweep", "per-sample quantities over a list of horizons (CSV)")
    sp.add_argument("--n", dest="n_list", type=int, nargs="+", required=True)
    sp.add_argument("--out", default=None, help="CSV path (default: stdout)")
    sp = add("simulate", "Monte Carlo periodogram/covariance check")
    sp.add_argument("--out", required=True, help="output directory for CSV artifacts")
    sp.add_argument("-n", type=int, default=None)
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--lag-window", type=int, default=16)
    sp.add_argument("--export-trajectories", action="store_true")
    return p


COMMANDS = {
    "analyze": cmd_analyze,
    "finite": cmd_finite,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        report = validate_loop(cfg.loop)
        if report:
            raise InvalidLoopError(report)
        return COMMANDS[args.command](cfg, args, out)
    except (ConfigError, InvalidLoopError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfoflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
