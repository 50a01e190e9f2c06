"""Acceptance suite: eleven quantitative checks of the whole pipeline.

Each ``criterion_N`` returns a :class:`CriterionResult` carrying the measured
values, the wall-clock runtime and its budget.  A criterion passes only if
every check holds *and* the runtime is within budget.  Nothing here catches a
failure to soften it: numerical errors raised by the library become failing
entries with the error text recorded.
"""
from __future__ import annotations

import io
import math
import tempfile
import time
import warnings
from contextlib import redirect_stdout
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilibria as eq
from . import evolution as ev
from . import green
from . import spectral as sp
from .dielectric import Dielectric, coulomb, eval_D, eval_D_laplace
from .errors import PlasmonLabError
from .hilbert import HilbertEvaluator

RHO_COMPACT = 32 * math.pi / 105          # closed-form mass of (1-e)_+^2, d = 3
RHO_MAXWELL = math.pi**1.5                # closed-form mass of e^{-e}, d = 3
MAXWELL_LADDER = (0.5, 0.45, 0.4)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime: float
    budget: float
    measured: dict = field(default_factory=dict)
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = " ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        tail = f" note={self.note}" if self.note else ""
        return (f"criterion {self.number:>2} {status} {self.name} runtime={self.runtime:.2f}s "
                f"budget={self.budget:g}s {vals}{tail}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def _run(number, name, budget, body):
    start = time.perf_counter()
    measured = {}
    try:
        ok, note = body(measured)
    except PlasmonLabError as exc:
        ok, note = False, f"{type(exc).__name__}: {exc}"
    runtime = time.perf_counter() - start
    if runtime > budget:
        note = (note + "; " if note else "") + "over runtime budget"
    return CriterionResult(number, name, bool(ok and runtime <= budget), runtime, budget, measured, note)


def compact_marginal(order=2):
    return eq.build_marginal(eq.compact_poly(order, 1.0, 3))


def maxwell_marginal():
    return eq.build_marginal(eq.maxwell(1.0, 1.0, 3))


# ---------------------------------------------------------------------------
# 1. plasma frequency
# ---------------------------------------------------------------------------


def criterion_1():
    def body(out):
        w = coulomb()
        # Compact: on-axis branch at k = h, 2h, extrapolated in k^2.
        mc = compact_marginal()
        th = sp.solve_threshold(w, mc)
        h = 0.01
        a = sp.solve_tau_star(w, mc, h, th, derivatives=False).tau_star
        b = sp.solve_tau_star(w, mc, 2 * h, th, derivatives=False).tau_star
        tc = (4 * a - b) / 3
        ref_c = math.sqrt(2 * RHO_COMPACT)
        # Maxwell: continued roots at k = h, 2h (damping is below rounding there).
        mm = maxwell_marginal()
        h = 0.02
        a = sp.solve_damped_root(w, mm, h).lam.imag
        b = sp.solve_damped_root(w, mm, 2 * h).lam.imag
        tm = (4 * a - b) / 3
        ref_m = math.sqrt(2 * RHO_MAXWELL)
        out["compact_tau0"] = tc
        out["compact_rel_err"] = abs(tc / ref_c - 1)
        out["maxwell_tau0"] = tm
        out["maxwell_rel_err"] = abs(tm / ref_m - 1)
        return out["compact_rel_err"] <= 1e-6 and out["maxwell_rel_err"] <= 1e-6, ""

    return _run(1, "plasma-frequency identity", 5.0, body)


# ---------------------------------------------------------------------------
# 2. threshold endpoint
# ---------------------------------------------------------------------------


def criterion_2():
    def body(out):
        w = coulomb()
        m = compact_marginal()
        th = sp.solve_threshold(w, m, backend="quad")
        tr = sp.solve_threshold(w, m, backend="trapezoid")
        k0 = th.kappa0
        tau = sp.solve_tau_star(w, m, k0, th, derivatives=False).tau_star
        edge = 2 * k0 * m.upsilon + k0 * k0
        out["kappa0"] = k0
        out["kappa0_trapezoid"] = tr.kappa0
        out["backend_diff"] = abs(k0 - tr.kappa0)
        # Independent of the solver's endpoint handling: extrapolate the branch
        # linearly from two points just below the threshold.
        h = 1e-4 * k0
        t1 = sp.solve_tau_star(w, m, k0 - h, th, derivatives=False).tau_star
        t2 = sp.solve_tau_star(w, m, k0 - 2 * h, th, derivatives=False).tau_star
        approach = 2 * t1 - t2
        out["tau_star_kappa0"] = tau
        out["endpoint_rel_err"] = abs(tau / edge - 1)
        out["extrapolated_rel_err"] = abs(approach / edge - 1)
        ok = max(out["endpoint_rel_err"], out["extrapolated_rel_err"]) <= 1e-6 and out["backend_diff"] <= 1e-8
        return ok, ""

    return _run(2, "threshold endpoint identity", 10.0, body)


# ---------------------------------------------------------------------------
# 3. Klein-Gordon shape
# ---------------------------------------------------------------------------


def criterion_3():
    def body(out):
        w = coulomb()
        m = compact_marginal()
        th = sp.solve_threshold(w, m)
        k0 = th.kappa0
        ks = k0 * np.arange(1, 51) / 50
        pts = [sp.solve_tau_star(w, m, k, th) for k in ks]
        tau = np.array([p.tau_star for p in pts])

        def f(x):
            return sp.solve_tau_star(w, m, x, th, derivatives=False).tau_star

        h = 1e-4 * k0
        errs = []
        for k, p in zip(ks, pts):
            if k + h <= k0:
                fd = (f(k + h) - f(k - h)) / (2 * h)
            else:  # one-sided second-order stencil at the threshold
                fd = (3 * p.tau_star - 4 * f(k - h) + f(k - 2 * h)) / (2 * h)
            errs.append(abs(fd / p.dtau - 1))
        second = np.diff(tau, 2)
        out["increasing"] = bool(np.all(np.diff(tau) > 0))
        out["min_ddtau"] = float(min(p.ddtau for p in pts))
        out["min_second_difference"] = float(second.min())
        out["max_dtau_rel_err"] = float(max(errs))
        ok = out["increasing"] and out["min_ddtau"] > 0 and out["min_second_difference"] > 0 \
            and out["max_dtau_rel_err"] <= 1e-4
        return ok, ""

    return _run(3, "Klein-Gordon shape", 30.0, body)


# ---------------------------------------------------------------------------
# 4. Penrose / Nyquist
# ---------------------------------------------------------------------------


def _penrose_scan(w, m, ks, th=None):
    winding, mins, failures = [], [], []
    for k in ks:
        try:
            c = sp.nyquist_certificate(w, m, k, threshold=th)
            winding.append(c.winding_number)
            mins.append(c.min_abs_D_on_axis)
        except PlasmonLabError as exc:
            failures.append(f"k={k:.4g}: {type(exc).__name__}")
            winding.append(-1)
            mins.append(math.nan)
    return winding, mins, failures


def criterion_4():
    def body(out):
        w = coulomb()
        ok = True
        notes = []
        mc = compact_marginal()
        th = sp.solve_threshold(w, mc)
        for label, m, k0, thr in (("compact", mc, th.kappa0, th), ("maxwell", maxwell_marginal(), 0.0, None)):
            ks = np.linspace(k0 + 0.05, 5.0, 40)
            winding, mins, failures = _penrose_scan(w, m, ks, thr)
            out[f"{label}_nonzero_windings"] = int(sum(1 for x in winding if x > 0))
            decided = [x for x in mins if not math.isnan(x)]
            out[f"{label}_min_abs_D"] = float(min(decided)) if decided else math.nan
            out[f"{label}_k_at_min"] = float(ks[int(np.nanargmin(mins))]) if decided else math.nan
            out[f"{label}_inconclusive"] = len(failures)
            ok &= all(x == 0 for x in winding) and not failures and min(decided) >= 1e-3
            if failures:
                notes.append(f"{label}: {len(failures)} certificates raised ({failures[0]} ...)")
        below = th.kappa0 * np.arange(1, 11) / 11
        enclosed, wind = [], []
        for k in below:
            c = sp.nyquist_certificate(w, mc, k, threshold=th)
            enclosed.append(c.enclosed_axis_zeros)
            wind.append(c.winding_number)
        out["below_enclosed"] = enclosed
        out["below_winding"] = wind
        ok &= all(e == 2 for e in enclosed) and all(x == 2 for x in wind)
        return ok, "; ".join(notes)

    return _run(4, "no unstable or embedded modes", 60.0, body)


# ---------------------------------------------------------------------------
# 5. time-frequency cross-validation
# ---------------------------------------------------------------------------


def criterion_5():
    def body(out):
        w = coulomb()
        m = compact_marginal()
        th = sp.solve_threshold(w, m)
        k = th.kappa0 / 2
        tau = sp.solve_tau_star(w, m, k, th, derivatives=False).tau_star
        trace = ev.solve_volterra(w, m, ev.gaussian_rank_one(1.0, 3), k)
        fit = ev.fit_mode(trace)
        bin_width = 2 * math.pi / trace.horizon
        out["tau_star"] = tau
        out["fit_frequency"] = fit.frequency
        out["frequency_error"] = abs(fit.frequency - tau)
        out["fft_bin"] = bin_width
        out["fit_decay"] = fit.decay_rate
        out["decay_bound"] = 1e-3 * m.tau0
        return out["frequency_error"] <= bin_width and abs(fit.decay_rate) <= 1e-3 * m.tau0, ""

    return _run(5, "time-frequency cross-validation", 30.0, body)


# ---------------------------------------------------------------------------
# 6. Landau damping, unbounded support
# ---------------------------------------------------------------------------


def criterion_6():
    def body(out):
        w = coulomb()
        m = maxwell_marginal()
        re_newton, ratios = [], []
        for k in MAXWELL_LADDER:
            root = sp.solve_damped_root(w, m, k)
            law, _ = sp.landau_rate_gaussian(w, m, k)
            re_newton.append(root.re_lambda)
            ratios.append(root.re_lambda / law)
        resolvable = all(abs(r) >= 1e-9 for r in re_newton)
        within = all(0.5 <= r <= 2.0 for r in ratios)
        dist = [abs(math.log(r)) for r in ratios]
        trending = all(b < a for a, b in zip(dist, dist[1:]))
        k_big = MAXWELL_LADDER[0]
        trace = ev.solve_volterra(w, m, ev.gaussian_rank_one(1.0, 3), k_big, dt=0.04 / m.tau0,
                                  horizon=1500 / m.tau0)
        fit = ev.fit_mode(trace)
        volterra_ratio = fit.decay_rate / re_newton[0]
        out["ladder"] = list(MAXWELL_LADDER)
        out["re_lambda_newton"] = re_newton
        out["ratio_to_law"] = ratios
        out["within_factor_2"] = within
        out["trend_to_1"] = trending
        out["volterra_decay"] = fit.decay_rate
        out["volterra_over_newton"] = volterra_ratio
        ok = resolvable and within and trending and abs(volterra_ratio - 1) <= 0.1
        note = "" if within else "Newton/law ratio outside [0.5, 2]"
        return ok, note

    return _run(6, "Landau damping trend (unbounded support)", 120.0, body)


# ---------------------------------------------------------------------------
# 7. compact damping onset
# ---------------------------------------------------------------------------


def criterion_7():
    def body(out):
        w = coulomb()
        m = compact_marginal()
        th = sp.solve_threshold(w, m)
        k0 = th.kappa0
        coef = sp.compact_damping_coefficients(w, m, th)
        delta0 = green.default_delta0(m, th)
        ks = k0 + delta0 * np.geomspace(1e-3, 1.0, 12)
        rates = np.array([sp.landau_rate_compact(w, m, k, th, coef)[0] for k in ks])
        negative = bool(np.all(rates < 0))
        slope = float(np.polyfit(np.log(ks - k0), np.log(-rates), 1)[0])
        n1 = m.decay_class.order
        out["theta0"] = coef.theta0
        out["kappa_tilde0_minus_kappa0_sq"] = coef.kt0 - k0 * k0
        out["all_negative"] = negative
        out["onset_exponent"] = slope
        out["expected_exponent"] = n1
        out["rate_at_smallest_gap"] = float(rates[0])
        ok = negative and abs(slope - n1) <= 0.3 and coef.theta0 > 0 and abs(coef.kt0 - k0 * k0) <= 1e-8
        return ok, ""

    return _run(7, "compact damping onset", 30.0, body)


# ---------------------------------------------------------------------------
# 8. residue limit
# ---------------------------------------------------------------------------


def criterion_8():
    def body(out):
        w = coulomb()
        m = compact_marginal()
        solver = green.GreenSolver(w, m)
        ks = np.geomspace(0.01, 0.3, 10)
        target = 0.5j * m.tau0
        dev = []
        conj_err = 0.0
        for k in ks:
            ap, am = solver.residues(k)
            dev.append(max(abs(ap - target), abs(am + target)))
            conj_err = max(conj_err, abs(am - np.conj(ap)))
        slope = float(np.polyfit(np.log(ks), np.log(dev), 1)[0])
        out["exponent"] = slope
        out["C_fit"] = float(np.max(np.array(dev) / ks**2))
        out["dev_at_smallest_k"] = float(dev[0])
        out["conjugation_err"] = conj_err
        return slope >= 1.7 and conj_err <= 1e-12, ""

    return _run(8, "residue limit", 20.0, body)


# ---------------------------------------------------------------------------
# 9. Green / Volterra equivalence
# ---------------------------------------------------------------------------


def green_volterra_error(solver, k, horizon=50.0, dt=0.005):
    """Relative L2 error between the Green reconstruction and the Volterra trace."""
    kernel = ev.gaussian_rank_one(1.0, 3)
    trace = ev.solve_volterra(solver.w, solver.m, kernel, k, dt=dt, horizon=horizon)
    dec = solver.decompose(k, trace.times)
    rec = green.reconstruct_density(dec, trace.source_samples, dt)
    return float(np.linalg.norm(rec - trace.samples) / np.linalg.norm(trace.samples))


def criterion_9():
    def body(out):
        w = coulomb()
        m = compact_marginal()
        solver = green.GreenSolver(w, m)
        k_lo = solver.kappa0 / 2
        k_hi = 2.0
        out["k_below"] = k_lo
        out["err_below"] = green_volterra_error(solver, k_lo)
        out["k_above"] = k_hi
        out["err_above"] = green_volterra_error(solver, k_hi)
        return out["err_below"] <= 1e-3 and out["err_above"] <= 1e-3, ""

    return _run(9, "Green/Volterra equivalence", 120.0, body)


# ---------------------------------------------------------------------------
# 10. dispersive decay
# ---------------------------------------------------------------------------


def remainder_exponent(solver, k, kt_window=(3.0, 40.0), n=4001):
    """Measured p in |G^r_k(t)| <~ <kt>^{-p} from the decreasing envelope on a kt window."""
    t = np.linspace(0.0, kt_window[1] / k, n)
    g = np.abs(solver.decompose(k, t).remainder_trace)
    env = np.maximum.accumulate(g[::-1])[::-1]
    sel = (k * t >= kt_window[0]) & (k * t <= kt_window[1])
    return -float(np.polyfit(np.log(np.sqrt(1 + (k * t[sel]) ** 2)), np.log(env[sel]), 1)[0])


def oscillatory_decay_slope(solver, times=(10, 14, 20, 28, 40, 56, 80), r_max=200.0, n_r=2001, n_k=400):
    times = np.asarray(times, float)
    r = np.linspace(0.0, r_max, n_r)
    rho = green.assemble_oscillatory_density(solver, ev.gaussian_rank_one(1.0, 3), times, r, 3, n_k=n_k)
    sup = np.abs(rho).max(axis=1)
    return float(np.polyfit(np.log(times), np.log(sup), 1)[0]), sup


def criterion_10():
    def body(out):
        w = coulomb()
        solver = green.GreenSolver(w, compact_marginal())
        slope, _ = oscillatory_decay_slope(solver)
        bump = green.GreenSolver(w, compact_marginal(10))
        p = [remainder_exponent(bump, k) for k in (1.0, 2.0)]
        out["sup_slope"] = slope
        out["target_slope"] = -1.5
        out["m10_kappa0"] = bump.kappa0
        out["remainder_p_k1"] = p[0]
        out["remainder_p_k2"] = p[1]
        return abs(slope + 1.5) <= 0.25 and min(p) >= 4, ""

    return _run(10, "dispersive decay at desk scale", 300.0, body)


# ---------------------------------------------------------------------------
# 11. property suite
# ---------------------------------------------------------------------------


def plemelj_error(m, n=50, seed=0):
    rng = np.random.default_rng(seed)
    h = HilbertEvaluator(m)
    span = m.upsilon if m.compact else 4.0
    tau = rng.uniform(-span, span, n) * 0.999
    b = h.boundary(tau)
    i = h.interior(tau - 1e-6j)
    return float(np.max(np.abs(b - i) / (1 + np.abs(b))))


def symmetry_error(m, n=100, seed=1):
    """max |H(-conj z) + conj H(z)| over interior points (oddness combined with conjugation)."""
    rng = np.random.default_rng(seed)
    h = HilbertEvaluator(m)
    z = rng.uniform(-3, 3, n) - 1j * rng.uniform(0.05, 3, n)
    return float(np.max(np.abs(h.interior(-np.conj(z)) + np.conj(h.interior(z)))))


def representation_error(m):
    w = coulomb()
    lams = np.linspace(0.1, 2.0, 10) + 1j * np.linspace(-3.0, 3.0, 10)
    ks = np.linspace(0.2, 3.0, 10)
    diel = Dielectric(m, w)
    worst = 0.0
    for k in ks:
        for lam in lams:
            a = eval_D(w, m, lam, k, "interior", dielectric=diel).value
            b = eval_D_laplace(w, m, lam, k).value
            worst = max(worst, abs(a - b))
    return worst


def volterra_linearity_error(m, k, alpha=2.5 - 1.3j):
    w = coulomb()
    kern = ev.gaussian_rank_one(1.0, 3)
    base = ev.solve_volterra(w, m, kern, k, dt=0.01, horizon=20.0)
    g = base.source_samples
    scaled = ev.volterra_trapezoid(base.kernel_samples, alpha * g, base.dt)
    return float(np.max(np.abs(scaled - alpha * base.samples)) / np.max(np.abs(base.samples)))


def volterra_order(m, k, dt=0.02, horizon=50.0):
    """log2 of the error ratio for dt and dt/2 against a dt/8 reference (max norm)."""
    w = coulomb()
    kern = ev.gaussian_rank_one(1.0, 3)
    ref = ev.solve_volterra(w, m, kern, k, dt=dt / 8, horizon=horizon).samples
    errs = []
    for step, stride in ((dt, 8), (dt / 2, 4)):
        s = ev.solve_volterra(w, m, kern, k, dt=step, horizon=horizon).samples
        errs.append(float(np.max(np.abs(s - ref[::stride]))))
    return math.log2(errs[0] / errs[1]), errs


def cli_determinism():
    from .cli import main

    argv = ["dispersion", "--profile", "compact", "--k-grid", "0.05:0.6:0.05"]
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for threads in ("1", "3", "1"):
            d = Path(tmp) / f"run{len(outputs)}"
            with redirect_stdout(io.StringIO()):
                code = main(argv + ["--out-dir", str(d), "--threads", threads])
            if code != 0:
                return False
            outputs.append((d / "dispersion.csv").read_bytes())
    return all(o == outputs[0] for o in outputs)


def criterion_11():
    def body(out):
        mc, mm = compact_marginal(), maxwell_marginal()
        out["plemelj_compact"] = plemelj_error(mc)
        out["plemelj_maxwell"] = plemelj_error(mm)
        out["symmetry_compact"] = symmetry_error(mc)
        out["symmetry_maxwell"] = symmetry_error(mm)
        out["laplace_vs_cauchy_compact"] = representation_error(mc)
        out["laplace_vs_cauchy_maxwell"] = representation_error(mm)
        k = sp.solve_threshold(coulomb(), mc).kappa0 / 2
        out["volterra_linearity"] = volterra_linearity_error(mc, k)
        order, _ = volterra_order(mc, k)
        out["volterra_order"] = order
        out["cli_deterministic"] = cli_determinism()
        ok = (out["plemelj_compact"] <= 1e-4 and out["plemelj_maxwell"] <= 1e-4
              and out["symmetry_compact"] <= 1e-10 and out["symmetry_maxwell"] <= 1e-10
              and out["laplace_vs_cauchy_compact"] <= 1e-6 and out["laplace_vs_cauchy_maxwell"] <= 1e-6
              and out["volterra_linearity"] <= 1e-13 and 1.8 <= order <= 2.2 and out["cli_deterministic"])
        return ok, ""

    return _run(11, "property suite", 120.0, body)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}
QUICK = (1, 2, 3, 5, 7, 8)


def run_suite(numbers=None, quick=False, stream=None):
    """Run the selected criteria, printing one line per criterion as it finishes."""
    if numbers is None:
        numbers = QUICK if quick else tuple(CRITERIA)
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for n in numbers:
            res = CRITERIA[n]()
            results.append(res)
            if stream is not None:
                print(res.line(), file=stream, flush=True)
    return results
