"""Command-line front end: ``plasmon-lab <command> [options]``.

Every command writes comma-separated CSV files (header row, ``%.12e`` floats)
into ``--out-dir`` and prints flat ``key=value`` summary lines.  Scans over
k-grids run on a thread pool whose width comes from ``--threads`` or the
``PLASMON_THREADS`` environment variable; results are gathered in grid order,
so outputs do not depend on the pool width.

Exit status: 0 when every check passes, 1 on a numerical failure, 2 on a usage
or configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import evolution as ev
from . import green
from . import spectral as sp
from .config import RunConfig, parse_grid, resolve_profile
from .dielectric import Dielectric, eval_D_laplace
from .equilibria import build_marginal
from .errors import ConfigError, PlasmonLabError

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.12e" % float(v)


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def summary(pairs, path: Path | None = None):
    lines = [f"{k}={_cell(v) if not isinstance(v, str) else v}" for k, v in pairs]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def pmap(fn, items, threads):
    """Ordered parallel map; the result list follows the order of ``items``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _guard(fn):
    """Run fn, turning a library error into (None, message) so scans can report it."""
    def wrapped(x):
        try:
            return fn(x), ""
        except PlasmonLabError as exc:
            return None, f"{type(exc).__name__}: {exc}"
    return wrapped


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_threshold(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    backends = ("quad", "trapezoid") if args.backend == "both" else (args.backend,)
    rows = []
    for b in backends:
        th = sp.solve_threshold(cfg.interaction, m, backend=b)
        rows.append((th.kappa0, th.residual, b))
    write_csv(cfg.output_dir / "threshold.csv", ("kappa0", "residual", "backend"), rows)
    pairs = [("profile", cfg.source), ("kappa0", rows[0][0]), ("residual", rows[0][1]),
             ("degenerate", str(not m.compact))]
    if len(rows) == 2:
        pairs.append(("backend_diff", abs(rows[0][0] - rows[1][0])))
    summary(pairs)
    return EXIT_OK


def cmd_dispersion(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    w = cfg.interaction
    th = sp.solve_threshold(w, m)
    ks = parse_grid(args.k_grid, "--k-grid")

    def point(k):
        if k == 0 or (m.compact and k <= th.kappa0):
            return sp.solve_tau_star(w, m, k, th)
        return sp.solve_damped_root(w, m, k, threshold=th)

    results = pmap(_guard(point), ks, cfg.threads)
    rows, failures = [], 0
    for k, (p, err) in zip(ks, results):
        if p is None:
            failures += 1
            rows.append((k, math.nan, math.nan, math.nan, math.nan, "failed"))
            print(f"error: k={k:.6g}: {err}", file=sys.stderr)
        else:
            rows.append((k, p.tau_star, p.dtau, p.ddtau, p.re_lambda, p.method))
    write_csv(cfg.output_dir / "dispersion.csv", ("k", "tau_star", "dtau", "ddtau", "re_lambda", "method"), rows)
    summary([("profile", cfg.source), ("kappa0", th.kappa0), ("points", len(rows)), ("failures", failures)])
    return EXIT_NUMERICAL if failures else EXIT_OK


def cmd_damping(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    w = cfg.interaction
    th = sp.solve_threshold(w, m)
    if args.regime == "compact":
        coef = sp.compact_damping_coefficients(w, m, th)
        delta0 = green.default_delta0(m, th)
        ks = parse_grid(args.k_grid, "--k-grid") if args.k_grid else th.kappa0 + delta0 * np.arange(1, 11) / 10

        def law(k):
            rate, nu, theta0 = sp.landau_rate_compact(w, m, k, th, coef)
            return rate, nu
    else:
        ks = parse_grid(args.k_grid or "0.4:0.6:0.05", "--k-grid")

        def law(k):
            return sp.landau_rate_gaussian(w, m, k)

    def point(k):
        rate, nu = law(k)
        root = sp.solve_damped_root(w, m, k, threshold=th)
        return rate, nu, root

    results = pmap(_guard(point), ks, cfg.threads)
    rows, failures = [], 0
    for k, (res, err) in zip(ks, results):
        if res is None:
            failures += 1
            rows.append((k, math.nan, math.nan, 0, math.nan, math.nan, math.nan))
            print(f"error: k={k:.6g}: {err}", file=sys.stderr)
            continue
        rate, nu, root = res
        ratio = root.re_lambda / rate if rate != 0 else math.nan
        rows.append((k, nu, rate, int(np.sign(rate)), root.re_lambda, root.tau_star, ratio))
    write_csv(cfg.output_dir / f"damping_{args.regime}.csv",
              ("k", "nu_star", "re_lambda_asym", "sign", "re_lambda_newton", "im_lambda_newton", "ratio"), rows)
    pairs = [("profile", cfg.source), ("regime", args.regime), ("points", len(rows)), ("failures", failures)]
    if args.regime == "compact":
        pairs += [("kappa0", th.kappa0), ("theta0", coef.theta0), ("kappa_tilde1", coef.kt1)]
    summary(pairs)
    return EXIT_NUMERICAL if failures else EXIT_OK


def cmd_penrose(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    w = cfg.interaction
    th = sp.solve_threshold(w, m)
    ks = parse_grid(args.k_grid, "--k-grid")
    results = pmap(_guard(lambda k: sp.nyquist_certificate(w, m, k, threshold=th)), ks, cfg.threads)
    rows, bad = [], 0
    min_abs = math.inf
    for k, (c, err) in zip(ks, results):
        if c is None:
            bad += 1
            rows.append((k, -1, 0, math.nan, math.nan, math.nan, "inconclusive"))
            print(f"error: k={k:.6g}: {err}", file=sys.stderr)
            continue
        ok = c.passed
        bad += not ok
        if c.enclosed_axis_zeros == 0:
            min_abs = min(min_abs, c.min_abs_D_on_axis)
        rows.append((k, c.winding_number, c.enclosed_axis_zeros, c.min_abs_D_on_axis, c.T, c.indentation_radius,
                     "pass" if ok else "fail"))
    write_csv(cfg.output_dir / "penrose.csv",
              ("k", "winding_number", "enclosed_axis_zeros", "min_abs_D", "T", "indentation_radius", "status"),
              rows)
    summary([("profile", cfg.source), ("kappa0", th.kappa0), ("certificates", len(rows)), ("failed", bad),
             ("min_abs_D_unindented", min_abs)])
    return EXIT_NUMERICAL if bad else EXIT_OK


def cmd_dielectric(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    w = cfg.interaction
    ks = parse_grid(args.k_grid, "--k-grid")
    taus = parse_grid(args.tau_grid, "--tau-grid")
    re = float(args.re_lambda)
    if args.laplace and re < 0:
        raise ConfigError("--laplace needs --re-lambda >= 0")
    path = "laplace_time" if args.laplace else ("interior" if re > 0 else "boundary" if re == 0 else "continued")
    diel = Dielectric(m, w, polynomial_extension=(path == "continued" and m.compact and m.extension is not None))

    def column(k):
        if args.laplace:
            return np.array([eval_D_laplace(w, m, complex(re, t), k).value for t in taus])
        if path == "boundary":
            return np.asarray(diel.D_axis(taus, k), complex)
        return np.asarray(diel.D(re + 1j * taus, k, path=path), complex)

    results = pmap(column, ks, cfg.threads)
    rows = [(k, t, v.real, v.imag, path) for k, vals in zip(ks, results) for t, v in zip(taus, vals)]
    write_csv(cfg.output_dir / "dielectric.csv", ("k", "tau", "ReD", "ImD", "path"), rows)
    summary([("profile", cfg.source), ("path", path), ("re_lambda", re), ("points", len(rows))])
    return EXIT_OK


def _kernel(spec, d):
    kind, _, arg = spec.partition(":")
    if kind == "gaussian":
        return ev.gaussian_rank_one(float(arg) if arg else 1.0, d)
    if kind == "table":
        if not arg:
            raise ConfigError("--kernel table:PATH needs a CSV path with columns radius,value")
        try:
            data = np.loadtxt(arg, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"--kernel table: cannot read {arg!r}: {exc}") from None
        return ev.table(data[:, 0], data[:, 1], d)
    raise ConfigError(f"--kernel {spec!r}: expected 'gaussian[:width]' or 'table:PATH'")


def cmd_evolve(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    w = cfg.interaction
    if (args.k is None) == (args.k_grid is None):
        raise ConfigError("evolve needs exactly one of --k or --k-grid")
    ks = np.array([args.k]) if args.k is not None else parse_grid(args.k_grid, "--k-grid")
    kernel = _kernel(args.kernel, cfg.profile.d)

    def one(k):
        tr = ev.solve_volterra(w, m, kernel, k, dt=args.dt, horizon=args.horizon)
        return tr, ev.fit_mode(tr)

    results = pmap(_guard(one), ks, cfg.threads)
    rows, pairs, failures = [], [("profile", cfg.source)], 0
    for k, (res, err) in zip(ks, results):
        if res is None:
            failures += 1
            print(f"error: k={k:.6g}: {err}", file=sys.stderr)
            continue
        tr, fit = res
        rows.extend((k, t, s.real, s.imag, g.real) for t, s, g in zip(tr.times, tr.samples, tr.source_samples))
        tag = f"k[{k:.6g}]"
        pairs += [(f"{tag}.frequency", fit.frequency), (f"{tag}.decay_rate", fit.decay_rate),
                  (f"{tag}.residual", fit.residual), (f"{tag}.dt", tr.dt), (f"{tag}.horizon", tr.horizon)]
    write_csv(cfg.output_dir / "evolve.csv", ("k", "t", "Re", "Im", "source"), rows)
    pairs.append(("failures", failures))
    summary(pairs, cfg.output_dir / "evolve_fit.txt")
    return EXIT_NUMERICAL if failures else EXIT_OK


def cmd_green(args, cfg: RunConfig):
    m = build_marginal(cfg.profile)
    w = cfg.interaction
    solver = green.GreenSolver(w, m)
    ks = parse_grid(args.k_grid, "--k-grid")
    ts = parse_grid(args.t_grid, "--t-grid")
    results = pmap(_guard(lambda k: solver.decompose(k, ts)), ks, cfg.threads)
    rows, res_rows, failures = [], [], 0
    for k, (dec, err) in zip(ks, results):
        if dec is None:
            failures += 1
            print(f"error: k={k:.6g}: {err}", file=sys.stderr)
            continue
        rows.extend((k, t, g) for t, g in zip(ts, dec.remainder_trace))
        res_rows.append((k, dec.a_plus.real, dec.a_plus.imag, dec.lambda_plus.real, dec.lambda_plus.imag,
                         dec.regime))
    write_csv(cfg.output_dir / "green_remainder.csv", ("k", "t", "ReGr"), rows)
    write_csv(cfg.output_dir / "green_residues.csv",
              ("k", "Re_a_plus", "Im_a_plus", "Re_lambda_plus", "Im_lambda_plus", "regime"), res_rows)
    pairs = [("profile", cfg.source), ("kappa0", solver.kappa0), ("delta0", solver.delta0), ("failures", failures)]
    if args.r_grid:
        if not (m.compact or solver.kappa0 > 0):
            raise ConfigError("the oscillatory Green function needs a profile with a positive threshold")
        r = parse_grid(args.r_grid, "--r-grid")
        osc_t = parse_grid(args.osc_t_grid, "--osc-t-grid") if args.osc_t_grid else ts
        ktab = np.linspace(0.0, solver.kappa0 + solver.delta0, args.n_k + 1)
        table = green.branch_table(solver, ktab)
        osc_rows = []
        for t in osc_t:
            vals = green.osc_green_radial(w, m, t, r, d=args.d, solver=solver, table=table)
            osc_rows.extend((t, ri, v) for ri, v in zip(r, vals))
        write_csv(cfg.output_dir / "green_osc.csv", ("t", "r", "Gosc"), osc_rows)
        pairs.append(("osc_points", len(osc_rows)))
    summary(pairs)
    return EXIT_NUMERICAL if failures else EXIT_OK


def cmd_acceptance(args, cfg_unused=None):
    from .acceptance import run_suite

    out_dir = Path(args.out_dir)
    for spec in args.profile or ():
        try:
            resolve_profile(spec)
        except ConfigError as exc:
            line = f"criterion  0 FAIL config-stage profile={spec} error={exc}"
            print(line)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "acceptance.txt").write_text(line + "\n", encoding="utf-8")
            return EXIT_USAGE
    numbers = None
    if args.criteria:
        try:
            numbers = tuple(int(x) for x in args.criteria.split(","))
        except ValueError:
            raise ConfigError(f"--criteria {args.criteria!r}: expected comma-separated integers 1..11") from None
        if any(not 1 <= n <= 11 for n in numbers):
            raise ConfigError("--criteria values must lie in 1..11")
    results = run_suite(numbers, quick=args.quick, stream=sys.stdout)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "acceptance.txt").write_text("".join(r.line() + "\n" for r in results), encoding="utf-8")
    passed = sum(r.passed for r in results)
    print(f"passed={passed} total={len(results)}")
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="plasmon-lab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, default_profile="compact"):
        sp_.add_argument("--profile", default=default_profile,
                         help="builtin profile (maxwell, compact, compact_m10, fermi_dirac) or config file path "
                              f"(default: {default_profile})")
        sp_.add_argument("--out-dir", default=None, help="directory for CSV outputs (default: [run] output_dir or .)")
        sp_.add_argument("--threads", type=int, default=None, help="worker threads (default: PLASMON_THREADS or 1)")
        return sp_

    s = common(sub.add_parser("threshold", help="survival threshold kappa0"))
    s.add_argument("--backend", choices=("quad", "trapezoid", "both"), default="quad")

    s = common(sub.add_parser("dispersion", help="plasmon branch tau*(k) and derivatives"))
    s.add_argument("--k-grid", required=True, help="a:b:step or comma list")

    s = common(sub.add_parser("damping", help="Landau damping laws against continued roots"), default_profile=None)
    s.add_argument("--regime", choices=("gaussian", "compact"), required=True)
    s.add_argument("--k-grid", default=None)

    s = common(sub.add_parser("penrose", help="Nyquist winding certificates"))
    s.add_argument("--k-grid", required=True)

    s = common(sub.add_parser("dielectric", help="D(re_lambda + i tau, k) on a grid"))
    s.add_argument("--k-grid", required=True)
    s.add_argument("--tau-grid", required=True)
    s.add_argument("--re-lambda", type=float, default=0.0)
    s.add_argument("--laplace", action="store_true", help="use the Laplace (time-domain) representation")

    s = common(sub.add_parser("evolve", help="Volterra mode traces and mode fits"))
    s.add_argument("--k", type=float, default=None)
    s.add_argument("--k-grid", default=None)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--horizon", type=float, default=None)
    s.add_argument("--kernel", default="gaussian", help="gaussian[:width] or table:PATH")

    s = common(sub.add_parser("green", help="Green function remainder traces and oscillatory part"))
    s.add_argument("--k-grid", required=True)
    s.add_argument("--t-grid", required=True)
    s.add_argument("--r-grid", default=None, help="radial grid for the oscillatory Green function")
    s.add_argument("--osc-t-grid", default=None, help="times for the oscillatory Green function (default: --t-grid)")
    s.add_argument("--d", type=int, choices=(2, 3), default=3)
    s.add_argument("--n-k", type=int, default=400)

    s = sub.add_parser("acceptance", help="run the acceptance suite")
    s.add_argument("--quick", action="store_true", help="fast subset (criteria 1, 2, 3, 5, 7, 8)")
    s.add_argument("--criteria", default=None, help="comma-separated criterion numbers")
    s.add_argument("--profile", action="append", help="config file(s) to validate before running")
    s.add_argument("--out-dir", default=".")
    return p


COMMANDS = {
    "threshold": cmd_threshold,
    "dispersion": cmd_dispersion,
    "damping": cmd_damping,
    "penrose": cmd_penrose,
    "dielectric": cmd_dielectric,
    "evolve": cmd_evolve,
    "green": cmd_green,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "acceptance":
            return cmd_acceptance(args)
        profile = args.profile
        if profile is None:  # damping: the regime picks the natural profile
            profile = "maxwell" if args.regime == "gaussian" else "compact"
        cfg = resolve_profile(profile, args.out_dir, args.threads)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"plasmon-lab {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlasmonLabError as exc:
        print(f"plasmon-lab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
