"""Command-line front end: ``plap-hartree <command> [options]``.

Commands: ``exponents``, ``convolve``, ``solve``, ``verify``, ``suite``.
Exit codes: 0 success, 1 a check failed, 2 invalid input (configuration,
parameters or profile file), 3 solver did not converge, 4 divergent
integral or positivity loss.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

import numpy as np

from .config import RunConfig, load_config
from .convolution import KernelStore, riesz_convolve
from .errors import (DivergenceError, NonConvergenceError, ParameterError,
                     PositivityLossError, ProfileFormatError)
from .model import ProblemParams, Variant, decay_roots, exponents
from .radial import derivative, read_profile_csv, write_profile_csv
from .solver import solve_ground_state
from .suite import run_suite
from .svg import loglog_svg
from .verify import run_battery

log = logging.getLogger("plap_hartree")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NONCONV, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _common(parser):
    parser.add_argument("--config", help="configuration file (INI sections)")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--kernel-cache", help="kernel cache directory")
    parser.add_argument("--jobs", type=int, help="worker processes for the suite")
    parser.add_argument("--seed", type=int, help="RNG seed for sampled checks")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plap-hartree", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("exponents", help="critical exponents and decay rates")
    _common(p)
    p = sub.add_parser("convolve", help="Riesz potential of a profile")
    _common(p)
    p.add_argument("profile", help="profile CSV")
    p.add_argument("--nu", type=float, help="Riesz exponent (default: sigma)")
    p.add_argument("--power", type=float, default=1.0,
                   help="convolve u^power (default 1)")
    p = sub.add_parser("solve", help="compute the extremal profile")
    _common(p)
    p.add_argument("--potential", help="V profile CSV for the GeneralV variant")
    p = sub.add_parser("verify", help="run the verification battery on a profile")
    _common(p)
    p.add_argument("profile", help="profile CSV")
    p.add_argument("--potential", help="V profile CSV for the GeneralV variant")
    p = sub.add_parser("suite", help="run the acceptance criteria")
    _common(p)
    p.add_argument("--gamma-offset", type=float,
                   help="shift every exponent target (self-test of the runner)")
    return ap


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out:
        cfg.output.dir = args.out
    if args.kernel_cache:
        cfg.output.kernel_cache = args.kernel_cache
    if args.jobs is not None:
        if args.jobs < 1:
            raise ParameterError("--jobs must be >= 1")
        cfg.suite.jobs = args.jobs
    if args.seed is not None:
        cfg.verify.seed = args.seed
    cfg.params.validate()
    os.makedirs(cfg.output.dir, exist_ok=True)
    if not os.access(cfg.output.dir, os.W_OK):
        raise ParameterError(f"output directory {cfg.output.dir!r} is not writable")
    return cfg


def _kernels(cfg):
    return KernelStore(cfg.output.kernel_cache, cfg.output.angular_nodes)


def _potential(path, params):
    if path is None:
        if params.variant is Variant.GENERAL_V:
            raise ParameterError("GeneralV needs --potential <V profile CSV>")
        return None
    return read_profile_csv(path)


def _fmt(x):
    return "" if x is None else f"{x:.10g}"


# ---------------------------------------------------------------------------
# commands


def cmd_exponents(cfg: RunConfig, echo=print) -> int:
    rows = []
    for mu in cfg.mu_ladder():
        pr = ProblemParams(cfg.params.N, cfg.params.p, mu, cfg.params.s, cfg.params.sigma,
                           cfg.params.variant)
        ex = exponents(pr)
        rows.append((mu, ex.gamma1, ex.gamma2))
    ex0 = exponents(cfg.params) if cfg.mu_steps <= 0 else ex
    echo(f"mu_bar = {_fmt(ex0.mu_bar)}")
    echo(f"p_star = {_fmt(ex0.p_star)}")
    echo(f"p_s = {_fmt(ex0.p_s)}")
    echo(f"p_s_sigma = {_fmt(ex0.p_s_sigma)}")
    path = os.path.join(cfg.output.dir, "exponents.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu", "gamma1", "gamma2"])
        for mu, g1, g2 in rows:
            w.writerow([repr(float(mu)), repr(float(g1)), repr(float(g2))])
            echo(f"mu = {mu:.10g}: gamma1 = {g1:.6f}, gamma2 = {g2:.6f}")
    return EXIT_OK


def cmd_convolve(cfg: RunConfig, profile_path, nu=None, power=1.0, echo=print) -> int:
    u = read_profile_csv(profile_path)
    if nu is None:
        nu = cfg.params.sigma if cfg.params.sigma is not None else 2.0 * cfg.params.p
    g = u.with_values(u.values ** power)
    V = riesz_convolve(g, _kernels(cfg).get(u.grid, nu, u.N))
    path = os.path.join(cfg.output.dir, "convolution.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "V"])
        for r, v in zip(V.r, V.values):
            w.writerow([repr(float(r)), repr(float(v))])
    echo(f"wrote {path} (nu = {nu:g}, power = {power:g})")
    return EXIT_OK


def _plot(path, prof, params):
    g1, g2 = decay_roots(params)
    r = prof.r
    du = np.abs(derivative(prof).values)
    i0, i1 = 10, len(r) - 10
    refs = [(f"slope -{g1:.3g}", -g1, r[i0], prof.values[i0]),
            (f"slope -{g2:.3g}", -g2, r[i1], prof.values[i1])]
    if du[i0] > 0:
        refs.append((f"slope -{g1 + 1:.3g}", -(g1 + 1), r[i0], du[i0]))
    if du[i1] > 0:
        refs.append((f"slope -{g2 + 1:.3g}", -(g2 + 1), r[i1], du[i1]))
    loglog_svg(path, [("u", r, prof.values), ("|u'|", r, du)], refs,
               title=f"{params.variant.value} N={params.N} p={params.p:g} mu={params.mu:g}")


def cmd_solve(cfg: RunConfig, potential=None, echo=print) -> int:
    params = cfg.params
    V = _potential(potential, params)
    out = cfg.output.dir
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        prof, rep = solve_ground_state(params, cfg.grid, cfg.solver, _kernels(cfg), V)
        stem = ""
    except NonConvergenceError as exc:
        prof, rep = exc.profile, exc.report
        echo(f"error: {exc}")
        code, stem = EXIT_NONCONV, "partial_"
        if prof is None:
            return code
    write_profile_csv(os.path.join(out, f"{stem}profile.csv"), prof, params.p)
    rep.write(os.path.join(out, f"{stem}history.csv"), os.path.join(out, f"{stem}summary.txt"))
    if np.all(prof.values > 0):
        _plot(os.path.join(out, f"{stem}profile.svg"), prof, params)
    s = rep.summary()
    echo(f"quotient = {s['final_quotient']:.12g}, residual = {s['el_residual']:.3e}, "
         f"gamma_near = {s['fitted_gamma_near']:.6f}, gamma_far = {s['fitted_gamma_far']:.6f}, "
         f"converged = {s['converged']}, {time.perf_counter() - t0:.2f} s")
    return code


def cmd_verify(cfg: RunConfig, profile_path, potential=None, echo=print) -> int:
    u = read_profile_csv(profile_path)
    params = cfg.params
    if u.N != params.N:
        raise ParameterError(f"profile has N={u.N} but the configuration says N={params.N}")
    V = _potential(potential, params)
    rep = run_battery(u, params, exponents(params), cfg.verify, _kernels(cfg), V)
    path = os.path.join(cfg.output.dir, "verify_report.csv")
    rep.to_csv(path)
    for r in rep.rows:
        echo(f"{'pass' if r.passed else 'FAIL'} {r.check}: target {r.target:.6g}, "
             f"measured {r.measured:.6g}, tolerance {r.tolerance:.3g}")
    echo(f"{len(rep.rows) - len(rep.failures())}/{len(rep.rows)} checks passed; report {path}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_suite(cfg: RunConfig, gamma_offset=None, echo=print) -> int:
    if gamma_offset is not None:
        cfg.verify.gamma_offset = gamma_offset
    t0 = time.perf_counter()
    outcome = run_suite(cfg, cfg.output.dir, cfg.suite.jobs, cfg.verify.seed, echo)
    echo(f"suite {'PASSED' if outcome.passed else 'FAILED'} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if outcome.passed else EXIT_CHECK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "exponents":
            return cmd_exponents(cfg)
        if args.command == "convolve":
            return cmd_convolve(cfg, args.profile, args.nu, args.power)
        if args.command == "solve":
            return cmd_solve(cfg, args.potential)
        if args.command == "verify":
            return cmd_verify(cfg, args.profile, args.potential)
        return cmd_suite(cfg, args.gamma_offset)
    except (ParameterError, ProfileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (DivergenceError, PositivityLossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
