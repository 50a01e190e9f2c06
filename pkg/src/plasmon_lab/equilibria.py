"""Radial equilibria mu(e) and their one-dimensional marginals phi(u).

The marginal is the integral of mu(u^2 + |w|^2) over w in R^{d-1}.  Every
spectral quantity downstream (Hilbert transform, dielectric function,
threshold, dispersion branch) only sees the equilibrium through phi.

Closed forms are used whenever they exist (Maxwell in any d, compact
polynomial profiles in any d, Fermi-Dirac and Bose-Einstein in d=3).  They
are built symbolically once so that derivatives of any order and the complex
extension used by the Hilbert continuation come for free.  Other profiles are
tabulated by adaptive quadrature and splined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
import sympy as sp
from scipy import integrate, interpolate, optimize, special

from .errors import DomainError

KINDS = ("maxwell", "fermi_dirac", "bose_einstein", "compact_poly", "user_table")

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
# Infinite tails are cut where phi drops below this fraction of phi(0).
TAIL_CUTOFF = 1e-16
N_DERIVATIVES = 5


def quad(f, a, b, **kw):
    """scipy.integrate.quad with the library-wide default tolerances; returns the value only."""
    kw.setdefault("epsabs", QUAD_EPSABS)
    kw.setdefault("epsrel", QUAD_EPSREL)
    kw.setdefault("limit", 400)
    return integrate.quad(f, a, b, **kw)[0]


def sphere_area(n):
    """Surface measure of the unit sphere S^n (n=0 gives the two points of S^0)."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


@dataclass(frozen=True)
class DecayClass:
    """How the marginal vanishes: ``analytic`` (fast decay, analytic extension),
    ``polynomial_tail`` (|phi| ~ <u>^-order) or ``compact`` (phi ~ (Upsilon-u)^order)."""

    kind: str
    order: float | None = None

    def __post_init__(self):
        if self.kind not in ("analytic", "polynomial_tail", "compact"):
            raise DomainError(f"unknown decay class {self.kind!r}")


@dataclass(frozen=True)
class EquilibriumProfile:
    """A radial steady state mu(e), e = |p|^2, in dimension d.

    Use the module-level constructors (:func:`maxwell`, :func:`compact_poly`, ...)
    rather than filling ``params`` by hand.
    """

    kind: str
    d: int = 3
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown equilibrium kind {self.kind!r}; expected one of {KINDS}")
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.d}")
        p = self.params
        if self.kind in ("maxwell", "fermi_dirac", "bose_einstein") and not p.get("beta", 1.0) > 0:
            raise DomainError("beta must be positive")
        if self.kind == "maxwell" and not p.get("amplitude", 1.0) > 0:
            raise DomainError("amplitude must be positive")
        if self.kind == "bose_einstein" and not 0 < p.get("fugacity", 0.5) < 1:
            raise DomainError("Bose-Einstein fugacity must lie in (0, 1)")
        if self.kind == "compact_poly":
            if not p.get("energy_cutoff", 1.0) > 0:
                raise DomainError("energy_cutoff must be positive")
            if int(p.get("order", 2)) != p.get("order", 2) or p.get("order", 2) < 1:
                raise DomainError("compact_poly order must be a positive integer")
        if self.kind == "user_table":
            e = np.asarray(p["e"], float)
            mu = np.asarray(p["mu"], float)
            if e.ndim != 1 or e.shape != mu.shape or e.size < 4:
                raise DomainError("user_table needs matching 1-D arrays e, mu with >= 4 samples")
            if np.any(np.diff(e) <= 0) or e[0] != 0:
                raise DomainError("user_table energies must start at 0 and increase strictly")
            if np.any(mu < 0):
                raise DomainError("user_table has negative mu samples")
            if np.any(np.diff(mu) > 0):
                raise DomainError("user_table mu samples must be non-increasing")
            if not mu[0] > 0:
                raise DomainError("user_table mu(0) must be positive")

    # -- parameters -------------------------------------------------------
    @property
    def beta(self):
        return float(self.params.get("beta", 1.0))

    @property
    def upsilon(self) -> float:
        """Maximal particle speed; +inf for positive equilibria."""
        if self.kind == "compact_poly":
            return math.sqrt(float(self.params.get("energy_cutoff", 1.0)))
        if self.kind == "user_table":
            e = np.asarray(self.params["e"], float)
            mu = np.asarray(self.params["mu"], float)
            zero = np.nonzero(mu == 0)[0]
            return math.sqrt(e[zero[0]] if zero.size else e[-1])
        return math.inf

    @cached_property
    def _table(self):
        e = np.asarray(self.params["e"], float)
        mu = np.asarray(self.params["mu"], float)
        return interpolate.PchipInterpolator(e, mu, extrapolate=False)

    def mu(self, e):
        """Evaluate mu(e) (vectorised, real e >= 0)."""
        e = np.asarray(e, float)
        p = self.params
        if self.kind == "maxwell":
            return float(p.get("amplitude", 1.0)) * np.exp(-self.beta * e)
        if self.kind == "fermi_dirac":
            x = self.beta * (e - float(p.get("chemical_potential", 1.0)))
            return special.expit(-x)
        if self.kind == "bose_einstein":
            z = float(p.get("fugacity", 0.5))
            q = z * np.exp(-self.beta * e)
            return q / (1.0 - q)
        if self.kind == "compact_poly":
            ef = float(p.get("energy_cutoff", 1.0))
            return np.clip(1.0 - e / ef, 0.0, None) ** int(p.get("order", 2))
        out = self._table(e)
        return np.where(np.isnan(out), 0.0, np.clip(out, 0.0, None))

    @property
    def decay_class(self) -> DecayClass:
        if self.kind == "compact_poly":
            return DecayClass("compact", int(self.params.get("order", 2)) + (self.d - 1) / 2)
        if self.kind == "user_table":
            return DecayClass("compact", _table_edge_order(self) + (self.d - 1) / 2)
        return DecayClass("analytic")

    def export_csv(self, path, n=401):
        """Write the profile as a two-column CSV (e, mu(e))."""
        e_max = self.upsilon ** 2 if math.isfinite(self.upsilon) else _infinite_energy_cut(self)
        e = np.linspace(0.0, e_max, n)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("e,mu\n")
            for a, b in zip(e, self.mu(e)):
                fh.write(f"{a:.12e},{b:.12e}\n")


def maxwell(beta=1.0, amplitude=1.0, d=3):
    return EquilibriumProfile("maxwell", d, {"beta": float(beta), "amplitude": float(amplitude)})


def fermi_dirac(beta=1.0, chemical_potential=1.0, d=3):
    return EquilibriumProfile(
        "fermi_dirac", d, {"beta": float(beta), "chemical_potential": float(chemical_potential)}
    )


def bose_einstein(beta=1.0, fugacity=0.5, d=3):
    return EquilibriumProfile("bose_einstein", d, {"beta": float(beta), "fugacity": float(fugacity)})


def compact_poly(order=2, energy_cutoff=1.0, d=3):
    """mu(e) = (1 - e/E_F)_+^order."""
    return EquilibriumProfile("compact_poly", d, {"order": int(order), "energy_cutoff": float(energy_cutoff)})


def user_table(e, mu, d=3):
    """Tabulated mu on an energy grid; monotone cubic in e, zero outside the table."""
    return EquilibriumProfile("user_table", d, {"e": tuple(map(float, e)), "mu": tuple(map(float, mu))})


def _table_edge_order(profile):
    e = np.asarray(profile.params["e"], float)
    mu = np.asarray(profile.params["mu"], float)
    ups = profile.upsilon
    pos = np.nonzero(mu > 0)[0]
    if mu[-1] > 0 or pos.size < 3:
        return 0.0
    last = pos[-3:]
    x = np.log(ups - np.sqrt(e[last]))
    y = np.log(mu[last])
    return max(float(np.polyfit(x, y, 1)[0]), 0.0)


def _infinite_energy_cut(profile):
    mu0 = float(profile.mu(0.0))
    e = 1.0
    while profile.mu(e) > 1e-18 * mu0:
        e *= 2.0
    return e


# ---------------------------------------------------------------------------
# Marginal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Marginal:
    """One-dimensional marginal phi(u) of an equilibrium and its scalar functionals.

    ``derivatives[n]`` evaluates the n-th derivative of phi on real u (zero
    outside the support).  ``extension`` holds the same derivatives as
    complex-analytic callables when phi has a closed form; the Hilbert
    continuation needs them.  ``support`` is the half-width of the interval
    carrying phi numerically: Upsilon for compact profiles, the tail cut
    otherwise.
    """

    phi: Callable
    dphi: Callable
    phi_hat: Callable
    rho_mu: float
    moments: Mapping[int, float]
    upsilon: float
    d: int
    decay_class: DecayClass
    support: float
    derivatives: tuple
    extension: tuple | None = None
    analytic_width: float = 0.0
    profile: EquilibriumProfile | None = None

    @property
    def compact(self):
        return math.isfinite(self.upsilon)

    @property
    def tau0(self):
        """Plasma frequency sqrt(2 rho_mu)."""
        return math.sqrt(2.0 * self.rho_mu)


def _closed_form_phi(profile: EquilibriumProfile):
    u = sp.Symbol("u")
    d = profile.d
    p = profile.params
    if profile.kind == "maxwell":
        b = sp.nsimplify(profile.beta)
        a = sp.nsimplify(p.get("amplitude", 1.0))
        return u, a * (sp.pi / b) ** sp.Rational(d - 1, 2) * sp.exp(-b * u**2)
    if profile.kind == "compact_poly":
        m = int(p.get("order", 2))
        ef = sp.nsimplify(p.get("energy_cutoff", 1.0))
        h = sp.Rational(d - 1, 2)
        c = sp.pi**h * sp.gamma(m + 1) / sp.gamma(m + 1 + h) * ef**h
        return u, c * (1 - u**2 / ef) ** (m + h)
    if d == 3 and profile.kind == "fermi_dirac":
        b = sp.nsimplify(profile.beta)
        mc = sp.nsimplify(p.get("chemical_potential", 1.0))
        return u, sp.pi / b * sp.log(1 + sp.exp(b * (mc - u**2)))
    if d == 3 and profile.kind == "bose_einstein":
        b = sp.nsimplify(profile.beta)
        z = sp.nsimplify(p.get("fugacity", 0.5))
        return u, -sp.pi / b * sp.log(1 - z * sp.exp(-b * u**2))
    return None


def _analytic_width(profile):
    p = profile.params
    if profile.kind == "maxwell":
        return math.inf
    b = profile.beta
    if profile.kind == "fermi_dirac":
        mc = float(p.get("chemical_potential", 1.0))
        roots = [np.sqrt(complex(mc, s * math.pi * (2 * n + 1) / b)) for n in range(3) for s in (1, -1)]
    elif profile.kind == "bose_einstein":
        lz = math.log(float(p.get("fugacity", 0.5)))
        roots = [np.sqrt(complex(lz, 2 * math.pi * n) / b) for n in (-1, 0, 1)]
    else:
        return 0.0
    return float(min(abs(r.imag) for r in roots))


def _masked(f, ups):
    if not math.isfinite(ups):
        def g(x):
            return np.real(f(np.asarray(x, float)))
        return g

    def g(x):
        x = np.asarray(x, float)
        inside = np.abs(x) < ups
        xc = np.where(inside, x, 0.0)
        return np.where(inside, np.real(f(xc)), 0.0)

    return g


def _lambdify(sym, expr):
    f = sp.lambdify(sym, expr, modules="numpy")

    def g(x):
        x = np.asarray(x)
        return f(x) + np.zeros_like(x)  # constants broadcast to the input shape

    return g


def _tail_cut(phi, phi0):
    """Smallest S with phi(S) <= TAIL_CUTOFF * phi(0), found on a doubling bracket."""
    hi = 1.0
    while phi(hi) > TAIL_CUTOFF * phi0:
        hi *= 2.0
        if hi > 1e6:
            raise DomainError("marginal does not decay; cannot truncate its tail")
    lo = 0.0
    return optimize.brentq(lambda x: float(phi(x)) - TAIL_CUTOFF * phi0, lo, hi, xtol=1e-10)


def _numeric_phi_table(profile):
    """Tabulate phi on [0, S] by quadrature of mu; returns (S, spline)."""
    d = profile.d
    ups = profile.upsilon
    e_max = ups**2 if math.isfinite(ups) else _infinite_energy_cut(profile)
    cd = sphere_area(d - 2)

    if profile.kind == "user_table" and d == 3:
        # The monotone cubic has an exact antiderivative: phi = pi (M(E) - M(u^2)).
        anti = profile._table.antiderivative()
        top = float(anti(e_max))

        def phi_point(u):
            return math.pi * (top - float(anti(u * u))) if u * u < e_max else 0.0
    else:
        phi_point = None

    def phi_point_quad(u):
        if u * u >= e_max:
            return 0.0
        if d == 3:
            return math.pi * quad(lambda e: float(profile.mu(e)), u * u, e_max)
        r_max = math.sqrt(e_max - u * u)
        return cd * quad(lambda r: float(profile.mu(u * u + r * r)) * r ** (d - 2), 0.0, r_max)

    if phi_point is None:
        phi_point = phi_point_quad
    phi0 = phi_point(0.0)
    if math.isfinite(ups):
        s = ups
    else:
        s = _tail_cut(np.vectorize(phi_point), phi0)
    # Chebyshev-clustered nodes resolve the edge behaviour of compact tables.
    n = 1025
    t = 0.5 * (1 - np.cos(np.linspace(0.0, math.pi, n)))
    uu = s * t
    vals = np.array([phi_point(x) for x in uu])
    grid = np.concatenate([-uu[:0:-1], uu])
    table = np.concatenate([vals[:0:-1], vals])
    return s, interpolate.CubicSpline(grid, table, bc_type="not-a-knot", extrapolate=False)


def build_marginal(profile: EquilibriumProfile) -> Marginal:
    """Compute phi(u) = c_d int_0^inf mu(u^2+r^2) r^{d-2} dr and its functionals.

    c_d is the surface measure of S^{d-2} (c_2 = 2, c_3 = 2 pi); in d = 3 this is
    phi(u) = pi int_{u^2}^inf mu(e) de.
    """
    if profile.d < 2:
        raise DomainError("dimension must be >= 2")
    ups = profile.upsilon
    closed = _closed_form_phi(profile)
    extension = None
    if closed is not None:
        u, expr = closed
        ext = tuple(_lambdify(u, sp.diff(expr, u, n)) for n in range(N_DERIVATIVES))
        derivs = tuple(_masked(f, ups) for f in ext)
        extension = ext
        phi0 = float(derivs[0](0.0))
        support = ups if math.isfinite(ups) else _tail_cut(derivs[0], phi0)
    else:
        support, spline = _numeric_phi_table(profile)
        derivs = tuple(_spline_derivative(spline, n, support) for n in range(4))

    phi = derivs[0]

    def mom(l):
        return 2.0 * quad(lambda x: x ** (2 * l) * float(phi(x)), 0.0, support, points=_points(support))

    moments = {l: mom(l) for l in range(4)}
    rho = moments[0]
    if not rho > 0:
        raise DomainError("marginal has non-positive mass")
    phi_hat = _phi_hat_factory(profile, phi, rho, support)
    return Marginal(
        phi=phi,
        dphi=derivs[1],
        phi_hat=phi_hat,
        rho_mu=rho,
        moments=moments,
        upsilon=ups,
        d=profile.d,
        decay_class=profile.decay_class,
        support=float(support),
        derivatives=derivs,
        extension=extension,
        analytic_width=_analytic_width(profile),
        profile=profile,
    )


def _points(support):
    return [0.5 * support]


def _spline_derivative(spline, n, support):
    der = spline.derivative(n) if n else spline

    def g(x):
        x = np.asarray(x, float)
        out = der(np.clip(x, -support, support))
        return np.where(np.abs(x) < support, out, 0.0)

    return g


def _phi_hat_factory(profile, phi, rho, support):
    p = profile.params
    if profile.kind == "maxwell":
        b = profile.beta

        def phi_hat(t):
            return rho * np.exp(-np.asarray(t, float) ** 2 / (4.0 * b))

        return phi_hat
    if profile.kind == "compact_poly":
        m = int(p.get("order", 2))
        ef = float(p.get("energy_cutoff", 1.0))
        nu = m + (profile.d - 1) / 2
        # int_{-1}^{1} (1-x^2)^nu e^{i w x} dx = sqrt(pi) Gamma(nu+1) (2/w)^{nu+1/2} J_{nu+1/2}(w)
        norm = rho * special.gamma(nu + 1.5) / special.gamma(nu + 1.0) / math.sqrt(math.pi)
        sq = math.sqrt(ef)

        def phi_hat(t):
            w = np.abs(np.asarray(t, float)) * sq
            ws = np.where(w > 0, w, 1.0)
            val = math.sqrt(math.pi) * special.gamma(nu + 1) * (2.0 / ws) ** (nu + 0.5) * special.jv(nu + 0.5, ws)
            return np.where(w > 0, norm * val, rho)

        return phi_hat

    # Composite Gauss-Legendre cosine sums for moderate t, adaptive QAWF-style
    # quadrature beyond the range where the panels resolve cos(t u).
    n_panels, n_gl = 256, 16
    x, w = np.polynomial.legendre.leggauss(n_gl)
    edges = np.linspace(0.0, support, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = 2.0 * (half[:, None] * w).ravel() * np.asarray(phi(nodes), float)
    t_fast = 8.0 * n_gl / (2.0 * half[0])

    def point(t):
        return 2.0 * integrate.quad(lambda x: float(phi(x)), 0.0, support, weight="cos", wvar=abs(t),
                                    epsabs=QUAD_EPSABS, limit=400)[0]

    def phi_hat(t):
        t = np.abs(np.asarray(t, float))
        flat = t.ravel()
        out = np.empty(flat.shape)
        fast = flat <= t_fast
        idx = np.flatnonzero(fast)
        for lo in range(0, idx.size, 4096):
            sl = idx[lo:lo + 4096]
            out[sl] = np.cos(np.outer(flat[sl], nodes)) @ weights
        for i in np.flatnonzero(~fast):
            out[i] = point(flat[i])
        return out.reshape(t.shape) if t.ndim else float(out[0])

    return phi_hat


def moment(marginal: Marginal, l: int) -> float:
    """int u^{2l} phi(u) du for 0 <= l <= 3."""
    if int(l) != l or not 0 <= l <= 3:
        raise DomainError(f"moment order must be 0..3, got {l}")
    return marginal.moments[int(l)]


def phi_hat(marginal: Marginal, t):
    """Fourier transform int e^{iut} phi(u) du (real, even)."""
    return marginal.phi_hat(t)
