"""Cauchy integral H(z) = int phi(u) / (z - u) du of the marginal.

H is analytic in the lower half plane.  On the real axis it is evaluated by
the Plemelj formula (principal value plus i*pi*phi), and above the axis by the
jump formula H_c(z) = H_up(z) + 2*pi*i*phi(z), which needs the analytic
extension of phi.

Numerics: a fixed Gauss-Legendre rule on the support [-S, S].  Far from the
axis the rule is applied to phi(u)/(z-u) directly.  Close to the axis the pole
is removed first:

    H(z) = int (phi(u) - phi(z)) / (z - u) du + phi(z) log((z + S) / (z - S))

where phi(z) is the analytic extension (or, on the axis, the real value).
Derivatives use d/dz H[f] = H[f'] + boundary terms, so the n-th derivative
is a Cauchy integral of phi^(n) and never needs a higher-order pole.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .equilibria import Marginal
from .errors import DomainError, UnsupportedModeError

_CHUNK = 2048


def _polar_terms(z, c, order):
    """d^order/dz^order of 1/(z - c)."""
    return (-1) ** order * math.factorial(order) / (z - c) ** (order + 1)


class HilbertEvaluator:
    """Evaluates H and its z-derivatives in the three modes.

    ``polynomial_extension`` lets compact profiles with a closed-form phi use
    that formula across the support edge (the smooth-extension device used by
    the damped root finder); it is off by default so that
    :meth:`continued` stays restricted to analytic profiles.
    """

    def __init__(self, marginal: Marginal, pv_tolerance=1e-10, n_nodes=256, polynomial_extension=False):
        self.marginal = marginal
        self.pv_tolerance = pv_tolerance
        self.polynomial_extension = polynomial_extension
        s = marginal.support
        self.a, self.b = -s, s
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        self.nodes = s * x
        self.weights = s * w
        self.y_switch = 0.05 * s
        self._fu = {}
        # Inside values at the support ends feed the boundary terms of derivatives.
        edge = s * (1 - 1e-13)
        self._edge = {}
        for n in range(len(marginal.derivatives)):
            f = marginal.derivatives[n]
            self._edge[n] = (float(f(-edge)), float(f(edge)))

    # -- public modes -------------------------------------------------------
    def interior(self, z, n=0):
        z = np.asarray(z, complex)
        if np.any(z.imag >= 0):
            raise DomainError("interior evaluation needs Im z < 0; use boundary() or continued()")
        return self._low(z, n)

    def boundary(self, tau, n=0):
        tau = np.asarray(tau)
        if np.iscomplexobj(tau):
            if np.any(tau.imag != 0):
                raise DomainError("boundary evaluation takes real arguments")
            tau = tau.real
        return self._low(np.asarray(tau, float) + 0j, n)

    def continued(self, z, n=0):
        m = self.marginal
        if m.extension is None:
            raise UnsupportedModeError("continuation needs a closed-form (analytic) marginal")
        if m.decay_class.kind != "analytic" and not self.polynomial_extension:
            raise UnsupportedModeError(
                "continuation is only defined for analytic profiles; "
                "enable polynomial_extension for compact closed-form profiles"
            )
        z = np.asarray(z, complex)
        if np.any(z.imag <= 0):
            raise DomainError("continued evaluation needs Im z > 0")
        if m.decay_class.kind == "analytic" and np.any(z.imag >= m.analytic_width):
            raise DomainError("argument beyond the analyticity strip of the marginal")
        up = np.conj(self._low(np.conj(z), n))
        jump = 2j * math.pi * m.extension[n](z)
        if m.compact:
            jump = np.where(np.abs(z.real) < m.upsilon, jump, 0.0)
        return up + jump

    def __call__(self, z, n=0):
        """Dispatch on Im z: interior below the axis, Plemelj on it, continuation above."""
        z = np.asarray(z, complex)
        out = np.empty(z.shape, complex)
        below = z.imag < 0
        on = z.imag == 0
        above = z.imag > 0
        if below.any():
            out[below] = self._low(z[below], n)
        if on.any():
            out[on] = self._low(z[on].real + 0j, n)
        if above.any():
            out[above] = self.continued(z[above], n)
        return out if out.ndim else complex(out)

    def derivative(self, z, n):
        if n < 0 or n >= len(self.marginal.derivatives):
            raise DomainError(f"derivative order must be 0..{len(self.marginal.derivatives) - 1}")
        return self(z, n)

    def dump_csv(self, taus, path):
        """Diagnostic table (tau, Re H, Im H) of boundary values."""
        h = self.boundary(np.asarray(taus, float))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tau,ReH,ImH\n")
            for t, v in zip(np.atleast_1d(taus), np.atleast_1d(h)):
                fh.write(f"{t:.12e},{v.real:.12e},{v.imag:.12e}\n")

    def distance(self, z):
        """Distance from z to the support interval [a, b]."""
        z = np.asarray(z, complex)
        return np.abs(z - np.clip(z.real, self.a, self.b))

    def difference(self, zp, zm, sep, n=0):
        """H^(n)(zp) - H^(n)(zm) for zp - zm = sep, without subtractive cancellation.

        Where both arguments keep y_switch away from the support the two
        Cauchy sums are merged into one with the kernel
        -sep / ((zp - u)(zm - u)); elsewhere the plain difference is used.
        """
        zp = np.asarray(zp, complex)
        zm = np.asarray(zm, complex)
        zp, zm = np.broadcast_arrays(zp, zm)
        shape = zp.shape
        zp, zm = zp.ravel(), zm.ravel()
        sep = np.broadcast_to(np.asarray(sep, complex), shape).ravel()
        ok = (self.distance(zp) >= self.y_switch) & (self.distance(zm) >= self.y_switch)
        # Keep each argument on a single side: on the axis both must be real.
        ok &= (np.imag(zp) == 0) == (np.imag(zm) == 0)
        ok &= (zp.imag <= 0) & (zm.imag <= 0)
        out = np.empty(zp.shape, complex)
        if (~ok).any():
            out[~ok] = self(zp[~ok], n) - self(zm[~ok], n)
        if ok.any():
            u, w = self.nodes, self.weights
            fu = self._nodes_values(n)
            a, b = zp[ok], zm[ok]
            sep_ok = sep[ok]
            for lo in range(0, a.size, _CHUNK):
                sl = slice(lo, lo + _CHUNK)
                kern = -sep_ok[sl, None] / ((a[sl, None] - u) * (b[sl, None] - u))
                out_ok = (w * fu * kern).sum(axis=1)
                for j in range(n):
                    fa, fb = self._edge[j]
                    if fa or fb:
                        out_ok = out_ok + fa * (_polar_terms(a[sl], self.a, n - 1 - j)
                                                - _polar_terms(b[sl], self.a, n - 1 - j)) \
                            - fb * (_polar_terms(a[sl], self.b, n - 1 - j) - _polar_terms(b[sl], self.b, n - 1 - j))
                idx = np.flatnonzero(ok)[sl]
                out[idx] = out_ok
        out = out.reshape(shape)
        return out if out.ndim else complex(out)

    # -- core ---------------------------------------------------------------
    def _nodes_values(self, n):
        if n not in self._fu:
            self._fu[n] = np.asarray(self.marginal.derivatives[n](self.nodes), float)
        return self._fu[n]

    def _low(self, z, n):
        """n-th derivative of H for Im z <= 0 (Im z == 0 means the limit from below)."""
        z = np.asarray(z, complex)
        shape = z.shape
        flat = z.ravel()
        out = np.empty(flat.shape, complex)
        for lo in range(0, flat.size, _CHUNK):
            out[lo:lo + _CHUNK] = self._low_chunk(flat[lo:lo + _CHUNK], n)
        out = out.reshape(shape)
        for j in range(n):
            fa, fb = self._edge[j]
            if fa or fb:
                out = out + fa * _polar_terms(z, self.a, n - 1 - j) - fb * _polar_terms(z, self.b, n - 1 - j)
        return out

    def _low_chunk(self, z, n):
        m = self.marginal
        u, w = self.nodes, self.weights
        fu = self._nodes_values(n)
        out = np.empty(z.shape, complex)
        # Direct Gauss-Legendre sums are accurate once z keeps y_switch away
        # from the support; only closer points need the singularity subtraction.
        far = self.distance(z) >= self.y_switch
        if far.any():
            out[far] = (w * fu / (z[far, None] - u)).sum(axis=1)
        axis = z.imag == 0
        if axis.any():
            out[axis] = self._axis(z[axis].real, n)
        near = ~far & ~axis
        if near.any():
            if m.extension is not None:
                zn = z[near]
                fz = m.extension[n](zn)
                diff = z[near, None] - u
                s = (w * (fu - fz[:, None]) / diff).sum(axis=1)
                out[near] = s + fz * (np.log(zn - self.a) - np.log(zn - self.b))
            else:
                out[near] = [self._quad_point(zz, n) for zz in z[near]]
        return out

    def _axis(self, x, n):
        """Plemelj boundary value: PV int f/(x-u) du + i pi f(x)."""
        m = self.marginal
        u, w = self.nodes, self.weights
        fu = self._nodes_values(n)
        if m.extension is None:
            return np.array([self._quad_axis(xx, n) for xx in x])
        f = m.derivatives[n]
        fx = np.asarray(f(x), float)
        dfx = np.asarray(m.derivatives[n + 1](x), float) if n + 1 < len(m.derivatives) else None
        diff = x[:, None] - u
        tiny = np.abs(diff) < 1e-13 * max(1.0, m.support)
        safe = np.where(tiny, 1.0, diff)
        ratio = (fu - fx[:, None]) / safe
        if tiny.any():
            if dfx is None:
                raise DomainError("boundary point coincides with a quadrature node at maximal derivative order")
            ratio = np.where(tiny, -dfx[:, None], ratio)
        s = (w * ratio).sum(axis=1)
        inside = (x > self.a) & (x < self.b)
        with np.errstate(divide="ignore", invalid="ignore"):
            logt = np.log(np.abs(x - self.a)) - np.log(np.abs(x - self.b))
        logt = np.where(fx != 0, logt, 0.0)
        return s + fx * logt + 1j * math.pi * np.where(inside, fx, 0.0)

    # Slow adaptive fallbacks for tabulated marginals.
    def _quad_point(self, z, n):
        f = self.marginal.derivatives[n]
        x, y = z.real, z.imag
        opts = dict(epsabs=self.pv_tolerance, epsrel=self.pv_tolerance, limit=400)
        pts = [min(max(x, self.a), self.b)]
        re = integrate.quad(lambda t: float(f(t)) * (x - t) / ((x - t) ** 2 + y * y), self.a, self.b,
                            points=pts, **opts)[0]
        im = integrate.quad(lambda t: float(f(t)) * (-y) / ((x - t) ** 2 + y * y), self.a, self.b,
                            points=pts, **opts)[0]
        return complex(re, im)

    def _quad_axis(self, x, n):
        f = self.marginal.derivatives[n]
        opts = dict(epsabs=self.pv_tolerance, epsrel=self.pv_tolerance, limit=400)
        if self.a < x < self.b:
            pv = -integrate.quad(lambda t: float(f(t)), self.a, self.b, weight="cauchy", wvar=x, **opts)[0]
        else:
            pv = integrate.quad(lambda t: float(f(t)) / (x - t), self.a, self.b, **opts)[0]
        return complex(pv, math.pi * float(f(x)))


def eval_interior(h: HilbertEvaluator, z):
    return h.interior(z)


def eval_boundary(h: HilbertEvaluator, tau):
    return h.boundary(tau)


def eval_continued(h: HilbertEvaluator, z):
    return h.continued(z)


def eval_derivative(h: HilbertEvaluator, z, n):
    return h.derivative(z, n)
