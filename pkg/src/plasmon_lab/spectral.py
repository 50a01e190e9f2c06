"""Spectral objects of D(lambda, k): survival threshold, plasmon branch,
Landau damping and Nyquist (argument-principle) stability certificates.

All quadratures here go through scipy's adaptive Gauss-Kronrod rule and
never through the fixed-node Hilbert evaluator, so identities such as
D(i tau*(k), k) = 0 can be re-checked through :mod:`plasmon_lab.dielectric`
as an independent route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .dielectric import Dielectric, InteractionSymbol, coulomb
from .equilibria import Marginal
from .errors import DomainError, InconclusiveError, NoRootError, UnsupportedModeError, WrongRegimeError

EPSABS = 1e-14
EPSREL = 1e-12
TRAPEZOID_POINTS = 1_000_000
NEWTON_MAX_ITER = 50


def _quad(f, a, b, points=None):
    kw = dict(epsabs=EPSABS, epsrel=EPSREL, limit=500)
    if points:
        kw["points"] = [p for p in points if a < p < b]
        if not kw["points"]:
            del kw["points"]
    return integrate.quad(f, a, b, **kw)[0]


def _require_compact(m: Marginal, what):
    if not m.compact:
        raise WrongRegimeError(f"{what} needs a compactly supported equilibrium (finite maximal speed)")


def _require_coulomb(w: InteractionSymbol, what):
    if w.kind != "coulomb":
        raise UnsupportedModeError(f"{what} uses identities specific to the Coulomb symbol |k|^-2")


# ---------------------------------------------------------------------------
# Survival threshold
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdResult:
    kappa0: float
    residual: float
    phi_of_k: Callable = field(repr=False)
    degenerate: bool = False
    backend: str = "quad"


def edge_integral(m: Marginal, kappa, backend="quad"):
    """J(kappa) = int phi(u) / ((Y - u)(Y + kappa - u)) du over the support."""
    ups = m.upsilon
    if backend == "quad":
        return _quad(lambda u: float(m.phi(u)) / ((ups - u) * (ups + kappa - u)), -ups, ups)
    if backend == "trapezoid":
        u = np.linspace(-ups, ups, TRAPEZOID_POINTS + 1)
        h = u[1] - u[0]
        f = np.empty_like(u)
        inner = u[1:-1]
        f[1:-1] = m.phi(inner) / ((ups - inner) * (ups + kappa - inner))
        f[0] = 0.0
        # phi/(Y-u) -> 0 at the edge when the decay order exceeds one; otherwise
        # use the one-sided limit through the nearest interior sample ratio.
        order = m.decay_class.order or 0.0
        f[-1] = 0.0 if order > 1 else f[-2]
        return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))
    raise DomainError(f"unknown quadrature backend {backend!r}")


def solve_threshold(w: InteractionSymbol | None, m: Marginal, backend="quad") -> ThresholdResult:
    """kappa0 > 0 with Phi(kappa0) = 1 - w(kappa0)/2 J(kappa0) = 0 (bracketed Brent root)."""
    w = w if w is not None else coulomb()
    if not m.compact:
        return ThresholdResult(0.0, 0.0, lambda k: float("nan"), degenerate=True, backend=backend)
    order = m.decay_class.order
    if order is None or order < 1:
        raise DomainError("threshold integral is not integrable at the support edge (decay order < 1)")

    def phi_of_k(k):
        return 1.0 - 0.5 * float(w(k)) * edge_integral(m, k, backend)

    ups = m.upsilon
    lo = 1e-3 * ups
    while phi_of_k(lo) >= 0:
        lo *= 0.5
        if lo < 1e-12:
            raise NoRootError("could not bracket the threshold from below", [])
    hi = ups
    while phi_of_k(hi) <= 0:
        hi *= 2.0
        if hi > 1e8:
            raise NoRootError("could not bracket the threshold from above", [])
    k0 = optimize.brentq(phi_of_k, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return ThresholdResult(float(k0), phi_of_k(k0), phi_of_k, False, backend)


# ---------------------------------------------------------------------------
# Plasmon branch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DispersionPoint:
    k: float
    tau_star: float
    dtau: float
    ddtau: float
    re_lambda: float
    method: str
    residual: float = 0.0

    @property
    def lam(self) -> complex:
        """The upper root lambda_+ = re_lambda + i tau_star."""
        return complex(self.re_lambda, self.tau_star)


def axis_integral(m: Marginal, tau, k):
    """int phi(u) / ((tau/2 - k u)^2 - k^4/4) du, real for tau >= 2 k Y + k^2."""
    ups = m.upsilon
    return _quad(lambda u: float(m.phi(u)) / ((0.5 * tau - k * u) ** 2 - 0.25 * k**4), -ups, ups)


def D_on_axis_real(w: InteractionSymbol, m: Marginal, tau, k):
    """D(i tau, k) above the absorption edge, where it is real."""
    return 1.0 - 0.5 * float(w(k)) * k * k * axis_integral(m, tau, k)


def _threshold(w, m, threshold):
    return threshold if threshold is not None else solve_threshold(w, m)


def solve_tau_star(w: InteractionSymbol | None, m: Marginal, k, threshold: ThresholdResult | None = None,
                   derivatives=True) -> DispersionPoint:
    """Undamped plasmon frequency tau*(k) by bracketed root finding on tau -> D(i tau, k)."""
    w = w if w is not None else coulomb()
    tau0 = m.tau0
    if k == 0:
        return DispersionPoint(0.0, tau0, 0.0, _ddtau_zero(m), 0.0, "asymptotic")
    if k < 0:
        raise DomainError("k must be non-negative")
    if not m.compact:
        raise WrongRegimeError("no undamped plasmon for k > 0 without finite maximal speed; use solve_damped_root")
    th = _threshold(w, m, threshold)
    if k > th.kappa0 * (1 + 1e-12):
        raise WrongRegimeError(f"k = {k} exceeds the survival threshold {th.kappa0}; use solve_damped_root")
    ups = m.upsilon
    edge = 2 * k * ups + k * k
    eps_b = 1e-10 * (1 + tau0)
    lo = edge + eps_b

    def f(tau):
        return D_on_axis_real(w, m, tau, k)

    f_lo = f(lo)
    if f_lo >= 0:
        # At the threshold the root sits on the absorption edge.
        tau = edge
    else:
        hi = max(2 * lo, tau0 + edge)
        while f(hi) <= 0:
            hi *= 2
        tau = optimize.brentq(f, lo, hi, xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    dtau = ddtau = float("nan")
    if derivatives and w.kind == "coulomb":
        dtau, ddtau = group_velocity(w, m, k, tau_star=tau)
    return DispersionPoint(float(k), float(tau), dtau, ddtau, 0.0, "bisection_on_axis", abs(f(tau)))


def _ddtau_zero(m: Marginal):
    """tau*''(0) from the small-k expansion of the defining identity."""
    # At k = 0: A = tau0/2, B = -2u, Q = A^2, so the integrand is 6 u^2 phi / A^4
    # and I_{1,0} = rho / A^3.
    a = 0.5 * m.tau0
    return 6.0 * m.moments[1] / (a * m.rho_mu)


def moment_integrals(w: InteractionSymbol | None, m: Marginal, k, tau_star):
    """I_{n,m}(k) = int (tau/2 - k u)^n u^m phi / Q^2 with Q = (tau/2 - k u)^2 - k^4/4, n in {0,1}, m in {0,1,2}."""
    _require_compact(m, "moment_integrals")
    ups = m.upsilon
    if tau_star < (2 * k * ups + k * k) * (1 - 1e-12):
        raise DomainError("tau_star below the absorption edge 2kY+k^2: singular denominator")
    out = {}
    for n in (0, 1):
        for mm in (0, 1, 2):
            def g(u, n=n, mm=mm):
                a = 0.5 * tau_star - k * u
                q = a * a - 0.25 * k**4
                return a**n * u**mm * float(m.phi(u)) / (q * q)
            out[(n, mm)] = _quad(g, -ups, ups)
    return out


def group_velocity(w: InteractionSymbol | None, m: Marginal, k, tau_star=None, threshold=None):
    """(tau*'(k), tau*''(k)) from the differentiated defining identity."""
    w = w if w is not None else coulomb()
    _require_coulomb(w, "group_velocity")
    _require_compact(m, "group_velocity")
    if tau_star is None:
        tau_star = solve_tau_star(w, m, k, threshold, derivatives=False).tau_star
    if k == 0:
        return 0.0, _ddtau_zero(m)
    ints = moment_integrals(w, m, k, tau_star)
    i10 = ints[(1, 0)]
    dtau = (k**3 * ints[(0, 0)] + 2 * ints[(1, 1)]) / i10
    ups = m.upsilon

    def g(u):
        a = 0.5 * tau_star - k * u
        b = dtau - 2 * u
        q = a * a - 0.25 * k**4
        return float(m.phi(u)) * (2 * (a * b - k**3) ** 2 - q * (0.5 * b * b - 3 * k * k)) / q**3

    ddtau = _quad(g, -ups, ups) / i10
    return float(dtau), float(ddtau)


def dispersion_branch(w, m, ks, threshold=None):
    th = _threshold(w if w is not None else coulomb(), m, threshold)
    return [solve_tau_star(w, m, float(k), th) for k in ks]


# ---------------------------------------------------------------------------
# Landau damping: asymptotic laws
# ---------------------------------------------------------------------------


def landau_rate_gaussian(w: InteractionSymbol | None, m: Marginal, k):
    """Leading-order law pi [u^2 phi'(u)] at the phase velocity nu* = tau0/(2k)."""
    if m.compact:
        raise WrongRegimeError("the Gaussian-regime law needs an equilibrium with unbounded speeds")
    if not k > 0:
        raise DomainError("k must be positive")
    nu = m.tau0 / (2 * k)
    return math.pi * nu * nu * float(m.dphi(nu)), nu


def landau_rate_perturbative(w: InteractionSymbol | None, m: Marginal, k, dielectric: Dielectric | None = None):
    """First-order damping Im D(i tau_r) / d_tau Re D(i tau_r) at the root tau_r of Re D on the axis.

    A diagnostic companion to :func:`landau_rate_gaussian`: it keeps the
    frequency shift of the branch and the finite difference
    phi(nu + k/2) - phi(nu - k/2) that the leading-order law linearizes.
    Returns (rate, tau_r).
    """
    w = w if w is not None else coulomb()
    if m.compact:
        raise WrongRegimeError("the perturbative rate is meant for equilibria with unbounded speeds")
    diel = _dielectric_for(w, m, dielectric)

    def re_d(t):
        return float(np.real(diel.D_axis(t, k)))

    lo = m.tau0
    hi = lo
    while re_d(hi) <= 0:
        hi *= 1.25
        if hi > 1e3 * m.tau0:
            raise NoRootError("Re D has no sign change on the axis", [])
    while re_d(lo) > 0:
        lo *= 0.8
    tau_r = optimize.brentq(re_d, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    d_re = float(np.real(1j * diel.dD(1j * tau_r, k)))
    return float(np.imag(diel.D_axis(tau_r, k))) / d_re, tau_r


def kappa_tilde(m: Marginal, j, k):
    """Expansion coefficient tilde kappa_j(k) of the near-edge dispersion relation."""
    ups = m.upsilon
    total = 0.0
    for l in range(1, j + 2):
        integral = _quad(lambda u, l=l: float(m.phi(u)) / ((ups - u) ** l * (ups + k - u) ** (j + 1)), -ups, ups)
        total += math.comb(j + 1, l) * k ** (l - 1) * integral
    return 0.5 * total


def kappa_tilde0_prime(m: Marginal, k):
    """d/dk tilde kappa_0, differentiated under the integral sign."""
    ups = m.upsilon
    return -0.5 * _quad(lambda u: float(m.phi(u)) / ((ups - u) * (ups + k - u) ** 2), -ups, ups)


@dataclass(frozen=True)
class CompactDampingCoefficients:
    kappa0: float
    kt0: float
    kt0_prime: float
    kt1: float
    theta0: float


def compact_damping_coefficients(w, m: Marginal, threshold=None) -> CompactDampingCoefficients:
    w = w if w is not None else coulomb()
    _require_compact(m, "compact damping law")
    _require_coulomb(w, "compact damping law")
    th = _threshold(w, m, threshold)
    k0 = th.kappa0
    kt0 = kappa_tilde(m, 0, k0)
    kt0p = kappa_tilde0_prime(m, k0)
    kt1 = kappa_tilde(m, 1, k0)
    theta0 = (2 * k0 - kt0p) / kt1
    if not theta0 > 0:
        raise DomainError(f"phase-velocity slope theta0 = {theta0} is not positive")
    return CompactDampingCoefficients(k0, kt0, kt0p, kt1, theta0)


def landau_rate_compact(w: InteractionSymbol | None, m: Marginal, k, threshold=None, coefficients=None):
    """(re_lambda_asym, nu_star, theta0) for kappa0 < k <= kappa0 + delta0."""
    w = w if w is not None else coulomb()
    _require_compact(m, "landau_rate_compact")
    c = coefficients if coefficients is not None else compact_damping_coefficients(w, m, threshold)
    if not k > c.kappa0:
        raise WrongRegimeError(f"k = {k} is not above the survival threshold {c.kappa0}")
    nu = m.upsilon + 0.5 * k - c.theta0 * (k - c.kappa0)
    jump = float(m.phi(nu - 0.5 * k)) - float(m.phi(nu + 0.5 * k))
    rate = -math.pi / (2 * c.kt1 * k) * jump
    return rate, nu, c.theta0


# ---------------------------------------------------------------------------
# Damped roots by Newton iteration on the continued dispersion relation
# ---------------------------------------------------------------------------


def _dielectric_for(w, m, dielectric):
    if dielectric is not None:
        return dielectric
    return Dielectric(m, w, polynomial_extension=m.compact and m.extension is not None)


def solve_damped_root(w: InteractionSymbol | None, m: Marginal, k, seed: complex | None = None,
                      threshold=None, dielectric: Dielectric | None = None, tol=1e-10) -> DispersionPoint:
    """lambda_+(k) (upper root) by Newton iteration with the exact lambda-derivative."""
    w = w if w is not None else coulomb()
    if not k > 0:
        raise DomainError("k must be positive")
    if m.compact:
        th = _threshold(w, m, threshold)
        if k <= th.kappa0:
            p = solve_tau_star(w, m, k, th, derivatives=False)
            return DispersionPoint(p.k, p.tau_star, p.dtau, p.ddtau, 0.0, "bisection_on_axis", p.residual)
        if m.extension is None:
            raise UnsupportedModeError("continued roots need a closed-form compact profile")
        if seed is None:
            # lambda = 2 i k z with z near the phase velocity; the edge itself is a
            # branch point of the continuation, so start from the asymptotic law.
            rate, nu, _ = landau_rate_compact(w, m, k, th)
            seed = complex(rate, 2 * k * nu)
    elif seed is None:
        seed = 1j * m.tau0
    seed = complex(seed)
    if seed.imag < 0:
        seed = seed.conjugate()
    diel = _dielectric_for(w, m, dielectric)
    lam = seed
    trace = []
    prev_step = math.inf
    for _ in range(NEWTON_MAX_ITER):
        val = diel.D(lam, k)
        trace.append((lam, abs(val)))
        der = diel.dD(lam, k)
        if der == 0 or not np.isfinite(der):
            raise NoRootError("vanishing derivative during Newton iteration", trace)
        step = val / der
        # Stalled steps at |D| below tolerance mean the iteration reached the
        # rounding floor of D; accept the better of the two iterates.
        if abs(val) <= tol and abs(step) >= prev_step:
            break
        lam = lam - step
        prev_step = abs(step)
        if abs(step) <= 1e-14 * max(1.0, abs(lam)):
            break
    else:
        raise NoRootError(f"Newton iteration did not converge in {NEWTON_MAX_ITER} steps", trace)
    res = abs(diel.D(lam, k))
    trace.append((lam, res))
    if not res <= tol:
        raise NoRootError(f"Newton converged to |D| = {res:.3e} > {tol}", trace)
    if m.compact:
        window = 10 * (k - _threshold(w, m, threshold).kappa0)
        if abs(lam.real) / (2 * k) > window:
            raise NoRootError("damped root left the validity window of the polynomial continuation", trace)
    if lam.real > 1e-12:
        raise NoRootError(f"Newton converged to an unexpected root with Re lambda = {lam.real:.3e} > 0", trace)
    return DispersionPoint(float(k), float(lam.imag), float("nan"), float("nan"), float(lam.real),
                           "continued_newton", res)


# ---------------------------------------------------------------------------
# Nyquist certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NyquistCertificate:
    k: float
    winding_number: int
    contour: str
    min_abs_D_on_axis: float
    T: float
    indentation_radius: float = 0.0
    enclosed_axis_zeros: int = 0
    max_arc_deviation: float = 0.0
    n_samples: int = 0

    @property
    def passed(self):
        """No zeros in Re lambda > 0 besides the registered on-axis plasmons."""
        return self.winding_number == self.enclosed_axis_zeros


def _winding(values):
    ang = np.unwrap(np.angle(values))
    return (ang[-1] - ang[0]) / (2 * math.pi)


def _refine(fn, lo, hi, n0, max_step=math.pi / 16, max_rounds=30):
    """Sample fn on [lo, hi] until consecutive phase increments are below max_step.

    Returns (s, values, resolved).
    """
    s = np.linspace(lo, hi, n0)
    v = fn(s)
    for _ in range(max_rounds):
        d = np.abs(np.angle(v[1:] / v[:-1]))
        bad = np.flatnonzero(d > max_step)
        if bad.size == 0:
            return s, v, True
        mids = 0.5 * (s[bad] + s[bad + 1])
        vm = fn(mids)
        s = np.insert(s, bad + 1, mids)
        v = np.insert(v, bad + 1, vm)
    return s, v, False


def nyquist_certificate(w: InteractionSymbol | None, m: Marginal, k, T=None, indentation_radius=None,
                        threshold=None, dielectric: Dielectric | None = None, n_axis=2048) -> NyquistCertificate:
    """Argument-principle count of zeros of D(., k) in Re lambda > 0.

    The contour runs down the imaginary axis from iT to -iT and closes with
    the right semicircle |lambda| = T.  Below the threshold the on-axis
    plasmon zeros +-i tau*(k) are bypassed by small semicircles into
    Re lambda < 0 (where D continues analytically because both Cauchy
    arguments lie outside the support), so the count then includes them and
    is reported separately as ``enclosed_axis_zeros``.
    """
    w = w if w is not None else coulomb()
    if not k > 0:
        raise DomainError("k must be positive")
    diel = _dielectric_for(w, m, dielectric)
    scale = 2 * k * m.support + k * k
    t_min = scale + 4 * math.sqrt(2 * m.rho_mu) + 1.0
    T = float(T) if T is not None else 2 * t_min
    # The arc: D - 1 decays like 2 rho / lambda^2; enforce |D - 1| < 1/2.
    theta = np.linspace(-math.pi / 2, math.pi / 2, 513)[1:-1]
    arc_dev = float(np.max(np.abs(diel.D(T * np.exp(1j * theta), k) - 1.0)))
    ends = np.abs(diel.D_axis(np.array([-T, T]), k) - 1.0)
    arc_dev = max(arc_dev, float(np.max(ends)))
    if arc_dev >= 0.5:
        raise DomainError(f"contour radius T = {T} too small: max |D - 1| on the arc is {arc_dev:.3f}")

    zeros = []
    if m.compact:
        th = _threshold(w, m, threshold)
        if k < th.kappa0:
            zeros = [solve_tau_star(w, m, k, th, derivatives=False).tau_star]
    r = 0.0
    if zeros:
        tz = zeros[0]
        edge = 2 * k * m.upsilon + k * k
        r = indentation_radius if indentation_radius is not None else min(0.25 * (tz - edge), 0.05 * tz)
        if not 0 < r < tz - edge:
            raise DomainError("indentation radius must be positive and smaller than the gap to the absorption edge")
        if tz + r >= T:
            raise DomainError("contour radius must exceed the plasmon frequency")

    # Downward along the axis: segments between indentations.
    def axis_fn(s):
        return diel.D_axis(s, k)

    pieces = []
    mins = []
    resolved = []
    if zeros:
        tz = zeros[0]
        cuts = [T, tz + r, tz - r, -tz + r, -tz - r, -T]
        segs = [(cuts[0], cuts[1]), (cuts[2], cuts[3]), (cuts[4], cuts[5])]
    else:
        segs = [(T, -T)]
    for i, (a, b) in enumerate(segs):
        n0 = max(64, int(n_axis * abs(a - b) / (2 * T)))
        s, v, ok = _refine(axis_fn, a, b, n0)
        resolved.append(ok)
        pieces.append(v)
        mins.append(float(np.min(np.abs(v))))
        if zeros and i < 2:
            c = tz if i == 0 else -tz
            # Left semicircle around i c: theta from pi/2 to 3pi/2.
            def ind_fn(th_, c=c):
                return diel.D(1j * c + r * np.exp(1j * th_), k)
            _, vi, ok = _refine(ind_fn, math.pi / 2, 3 * math.pi / 2, 65)
            resolved.append(ok)
            pieces.append(vi)
    _, varc, ok = _refine(lambda th_: np.where(np.abs(np.cos(th_)) < 1e-15, diel.D_axis(T * np.sin(th_), k),
                                                   diel.D(T * np.exp(1j * th_), k)),
                          -math.pi / 2, math.pi / 2, 257)
    resolved.append(ok)
    pieces.append(varc)
    min_axis = min(mins)
    if min_axis < 1e-8:
        raise InconclusiveError(
            f"min |D| on the axis is {min_axis:.3e} < 1e-8 with no registered on-axis zero; refine the grid")
    if not all(resolved):
        raise InconclusiveError("phase of D along the contour could not be resolved")
    values = np.concatenate(pieces)
    n = _winding(values)
    wn = int(round(n))
    if abs(n - wn) > 1e-6:
        raise InconclusiveError(f"non-integer winding {n:.6f}; contour not closed")
    desc = f"axis [-i{T:g}, i{T:g}]"
    if zeros:
        desc += f" indented left around +-i{zeros[0]:.6g} with radius {r:.3g}"
    desc += f"; right semicircle radius {T:g}"
    return NyquistCertificate(float(k), wn, desc, min_axis, T, r, len(zeros) * 2 if zeros else 0, arc_dev,
                              values.size)


def embedded_mode_scan(w: InteractionSymbol | None, m: Marginal, k, taus, dielectric=None):
    """|D(i tau, k)| and the lower bound (pi w/4)|phi'(tau/(2k))| for |tau| < 2kY."""
    w = w if w is not None else coulomb()
    _require_compact(m, "embedded_mode_scan")
    diel = _dielectric_for(w, m, dielectric)
    taus = np.asarray(taus, float)
    absd = np.abs(diel.D_axis(taus, k))
    bound = math.pi * float(w(k)) / 4 * np.abs(m.dphi(taus / (2 * k)))
    return absd, bound
