"""Lindhard dielectric function D(lambda, k) for a radial equilibrium.

Two independent representations are provided:

* the Cauchy-integral form
      D = 1 + w(k)/(2k) [H((-i lambda + k^2)/(2k)) - H((-i lambda - k^2)/(2k))],
  valid on the whole plane through the three Hilbert modes;
* the Laplace form
      D = 1 + 2 w(k) int_0^inf e^{-lambda t} sin(t k^2) phi_hat(2 t k) dt,
  valid for Re lambda >= 0.

All functions take the wavenumber magnitude k (D only depends on |k| for a
radial equilibrium).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .equilibria import Marginal
from .errors import DomainError, UnsupportedModeError
from .hilbert import HilbertEvaluator

PATHS = ("interior", "boundary", "continued", "laplace_time")


@dataclass(frozen=True)
class InteractionSymbol:
    """Fourier symbol w_hat(k) of the pair potential.

    ``coulomb`` is |k|^-2 in every dimension.  ``general`` wraps any callable
    together with the structural flags the threshold theory relies on.
    """

    kind: str = "coulomb"
    fn: Callable | None = None
    nonneg: bool = True
    divergent_at_zero: bool = True
    bounded_at_infinity: bool = True
    nonincreasing: bool = True

    def __post_init__(self):
        if self.kind not in ("coulomb", "general"):
            raise DomainError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "general" and self.fn is None:
            raise DomainError("general interaction symbol needs a callable")

    def __call__(self, k):
        k = np.asarray(k, float)
        if np.any(k <= 0):
            raise DomainError("interaction symbol is singular at k = 0")
        if self.kind == "coulomb":
            return 1.0 / k**2
        return np.asarray(self.fn(k), float)

    def derivative(self, k, h=1e-6):
        if self.kind == "coulomb":
            return -2.0 / np.asarray(k, float) ** 3
        k = float(k)
        return (float(self(k + h * k)) - float(self(k - h * k))) / (2 * h * k)


def coulomb() -> InteractionSymbol:
    return InteractionSymbol("coulomb")


def general(fn, **flags) -> InteractionSymbol:
    return InteractionSymbol("general", fn, **flags)


@dataclass(frozen=True)
class DielectricValue:
    value: complex
    lam: complex
    k: float
    path: str

    def __complex__(self):
        return complex(self.value)


def _classify(lam):
    re = np.real(lam)
    return np.where(re > 0, 0, np.where(re == 0, 1, 2))


class Dielectric:
    """D(lambda, k) and d/dlambda D bound to one marginal and interaction.

    Holds a single :class:`HilbertEvaluator`; immutable after construction,
    so one instance can serve any number of (lambda, k) evaluations.
    """

    def __init__(self, marginal: Marginal, w: InteractionSymbol | None = None, polynomial_extension=False,
                 n_nodes=256):
        self.marginal = marginal
        self.w = w if w is not None else coulomb()
        self.hilbert = HilbertEvaluator(marginal, n_nodes=n_nodes, polynomial_extension=polynomial_extension)

    def _args(self, lam, k):
        if not k > 0:
            raise DomainError("k must be positive")
        lam = np.asarray(lam, complex)
        zp = (-1j * lam + k * k) / (2 * k)
        zm = (-1j * lam - k * k) / (2 * k)
        return lam, zp, zm

    def _check_path(self, lam, path):
        if path is None:
            return
        cls = _classify(lam)
        want = {"interior": 0, "boundary": 1, "continued": 2}.get(path)
        if want is None:
            raise DomainError(f"path must be one of interior/boundary/continued, got {path!r}")
        if np.any(cls != want):
            raise DomainError(f"lambda inconsistent with path {path!r} (interior: Re>0, boundary: Re=0, continued: Re<0)")
        if path == "continued" and self.marginal.decay_class.kind != "analytic" \
                and not self.hilbert.polynomial_extension:
            raise UnsupportedModeError("continued path needs an analytic marginal")

    def _h(self, z, n):
        # On the axis the argument is real up to rounding of -i*lambda.
        z = np.where(np.imag(z) == 0, np.real(z) + 0j, z)
        return self.hilbert(z, n)

    def _dh(self, zp, zm, k, n):
        """H^(n)(z+) - H^(n)(z-) with z+ - z- = k exactly."""
        zp = np.where(np.imag(zp) == 0, np.real(zp) + 0j, zp)
        zm = np.where(np.imag(zm) == 0, np.real(zm) + 0j, zm)
        return self.hilbert.difference(zp, zm, k, n)

    def D(self, lam, k, path=None):
        """Cauchy-integral representation; the path follows the sign of Re lambda."""
        lam, zp, zm = self._args(lam, k)
        self._check_path(lam, path)
        wk = float(self.w(k))
        val = 1.0 + wk / (2 * k) * self._dh(zp, zm, k, 0)
        return val if np.ndim(val) else complex(val)

    def dD(self, lam, k):
        """d/dlambda D from exact first derivatives of H."""
        lam, zp, zm = self._args(lam, k)
        wk = float(self.w(k))
        val = wk / (2 * k) * (-1j / (2 * k)) * self._dh(zp, zm, k, 1)
        return val if np.ndim(val) else complex(val)

    def D_axis(self, tau, k):
        """D(i tau, k) for real tau through the Plemelj boundary values."""
        tau = np.asarray(tau, float)
        wk = float(self.w(k))
        val = 1.0 + wk / (2 * k) * self._dh((tau + k * k) / (2 * k) + 0j, (tau - k * k) / (2 * k) + 0j, k, 0)
        return val if np.ndim(val) else complex(val)

    def imag_on_axis(self, tau, k):
        """(pi w/(2k)) [phi((tau+k^2)/(2k)) - phi((tau-k^2)/(2k))], the exact imaginary part of D(i tau)."""
        phi = self.marginal.phi
        wk = float(self.w(k))
        tau = np.asarray(tau, float)
        return math.pi * wk / (2 * k) * (phi((tau + k * k) / (2 * k)) - phi((tau - k * k) / (2 * k)))


def eval_D(w: InteractionSymbol, m: Marginal, lam, k, path=None, *, dielectric: Dielectric | None = None):
    """D(lambda, k) as a :class:`DielectricValue`."""
    if not k > 0:
        raise DomainError("k must be positive (the symbol is singular at k = 0)")
    diel = dielectric if dielectric is not None else Dielectric(m, w, polynomial_extension=path == "continued"
                                                                and m.extension is not None
                                                                and m.decay_class.kind != "analytic")
    lam = complex(lam)
    if path is None:
        path = ("interior", "boundary", "continued")[int(_classify(lam))]
    if path == "boundary":
        if lam.real != 0:
            raise DomainError("boundary path needs Re lambda = 0")
        value = diel.D_axis(lam.imag, k)
    else:
        value = diel.D(lam, k, path=path)
    return DielectricValue(complex(value), lam, float(k), path)


# ---------------------------------------------------------------------------
# Time-domain representation
# ---------------------------------------------------------------------------


def volterra_kernel(w: InteractionSymbol, m: Marginal, k, t):
    """F_k(t) = 2 w(k) sin(t k^2) phi_hat(2 t k); its Laplace transform is D - 1."""
    t = np.asarray(t, float)
    return 2.0 * float(w(k)) * np.sin(t * k * k) * m.phi_hat(2.0 * t * k)


def laplace_horizon(w: InteractionSymbol, m: Marginal, k, re_lam=0.0, tol=1e-10):
    """Truncation time T beyond which the Laplace integrand tail is below ``tol``."""
    wk = float(w(k))
    rho = m.rho_mu
    dc = m.decay_class
    caps = []
    if re_lam > 0:
        caps.append(math.log(max(2 * wk * rho / (re_lam * tol), 2.0)) / re_lam)
    if dc.kind == "compact" and dc.order is not None:
        p = dc.order + 1.0
        s = np.linspace(20.0, 200.0, 400) / max(m.upsilon, 1e-12)
        env = float(np.max(np.abs(m.phi_hat(s)) * s**p))
        # 2w int_T^inf env (2kt)^-p dt = 2w env (2kT)^{1-p} / (2k (p-1))
        if p > 1:
            x = (2 * wk * env / (2 * k * (p - 1) * tol)) ** (1.0 / (p - 1))
            caps.append(x / (2 * k))
    else:
        t = 1.0
        while abs(float(m.phi_hat(2 * t * k))) > 1e-15 * rho or abs(float(m.phi_hat(4 * t * k))) > 1e-15 * rho:
            t *= 1.5
            if t > 1e7:
                break
        caps.append(2 * t)
    return min(caps) if caps else 1e4


def eval_D_laplace(w: InteractionSymbol, m: Marginal, lam, k, T_max=None, nodes_per_panel=16):
    """Laplace representation by panel Gauss-Legendre quadrature on [0, T_max]."""
    lam = complex(lam)
    if lam.real < 0:
        raise DomainError("Laplace representation needs Re lambda >= 0")
    if not k > 0:
        raise DomainError("k must be positive")
    if T_max is None:
        T_max = laplace_horizon(w, m, k, lam.real)
    freq = abs(lam.imag) + k * k + 2 * k * min(m.support, 50.0) + 1.0
    width = min(0.5, 1.0 / freq)
    n_panels = max(1, int(math.ceil(T_max / width)))
    x, wt = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(0.0, T_max, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * wt).ravel()
    integrand = np.exp(-lam * t) * volterra_kernel(w, m, k, t)
    value = 1.0 + np.sum(wts * integrand)
    return DielectricValue(complex(value), lam, float(k), "laplace_time")
