"""Time-domain ground truth for a single spatial mode.

The mode density obeys the second-kind Volterra equation

    rho_k(t) + int_0^t F_k(t - s) rho_k(s) ds = rho0_k(t),

with the kernel F_k of :func:`plasmon_lab.dielectric.volterra_kernel` and the
free-gas (phase-mixing) source rho0_k computed from the initial kernel.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import interpolate, optimize, signal, special

from .dielectric import InteractionSymbol, volterra_kernel
from .equilibria import Marginal, sphere_area
from .errors import DomainError, UnsupportedModeError

KINDS = ("gaussian_rank_one", "separable", "table")
TRUNCATION_TOL = 1e-8


@dataclass(frozen=True)
class InitialKernel:
    """Fourier kernel gamma0_hat(a, b) of the initial perturbation.

    * ``gaussian_rank_one``: exp(-(|a|^2 + |b|^2) / (2 width^2)).
    * ``separable``: g(|a|) g(|b|) for a radial callable ``g_hat``.
    * ``table``: as ``separable`` with g sampled on ``table = (radii, values)``.
    """

    kind: str = "gaussian_rank_one"
    d: int = 3
    width: float = 1.0
    g_hat: Callable | None = None
    table: tuple | None = None
    cutoff: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown initial kernel kind {self.kind!r}")
        if self.d < 2:
            raise DomainError("dimension must be at least 2")
        if self.kind == "gaussian_rank_one" and not self.width > 0:
            raise DomainError("width must be positive")
        if self.kind == "separable" and self.g_hat is None:
            raise DomainError("separable kernel needs g_hat")
        if self.kind == "table":
            if self.table is None:
                raise DomainError("table kernel needs (radii, values)")
            r, v = (np.asarray(a, float) for a in self.table)
            if r.ndim != 1 or r.shape != v.shape or r.size < 4 or np.any(np.diff(r) <= 0):
                raise DomainError("table radii must be strictly increasing with matching values")

    def radial(self):
        """g(|a|) as a vectorised callable (separable and table kinds)."""
        if self.kind == "separable":
            return self.g_hat
        if self.kind == "table":
            r, v = (np.asarray(a, float) for a in self.table)
            spline = interpolate.CubicSpline(r, v)

            def g(x):
                x = np.asarray(x, float)
                return np.where(x <= r[-1], spline(np.clip(x, r[0], r[-1])), 0.0)

            return g
        s2 = self.width**2
        return lambda x: np.exp(-np.asarray(x, float) ** 2 / (2 * s2))


def gaussian_rank_one(width=1.0, d=3) -> InitialKernel:
    return InitialKernel("gaussian_rank_one", d, width)


def separable(g_hat, d=3, cutoff=None) -> InitialKernel:
    return InitialKernel("separable", d, g_hat=g_hat, cutoff=cutoff)


def table(radii, values, d=3) -> InitialKernel:
    return InitialKernel("table", d, table=(tuple(np.asarray(radii, float)), tuple(np.asarray(values, float))))


# ---------------------------------------------------------------------------
# Free-gas source
# ---------------------------------------------------------------------------


class _SeparableSource:
    """2^-d int e^{-i t k v_1} g(|k+v|/2) g(|k-v|/2) dv by tensor Gauss-Legendre.

    k lies along the first axis; the transverse part of v is integrated in
    polar form with the sphere factor |S^{d-2}|.
    """

    def __init__(self, kernel: InitialKernel, k, n1=160, n2=96):
        self.g = kernel.radial()
        if kernel.kind == "table":
            self.vmax = 2.0 * kernel.table[0][-1] + abs(k)
        else:
            self.vmax = kernel.cutoff if kernel.cutoff is not None else self._find_cutoff(self.g, k)
        self.d = kernel.d
        self.k = k
        self.n1 = n1
        self.n2 = n2
        self._profiles = {}
        self._nodes(n1)

    def _nodes(self, n1):
        """Longitudinal nodes and transverse-integrated profile for a given node count."""
        if n1 in self._profiles:
            return self._profiles[n1]
        g, k, vmax, d = self.g, self.k, self.vmax, self.d
        x1, w1 = np.polynomial.legendre.leggauss(n1)
        x2, w2 = np.polynomial.legendre.leggauss(self.n2)
        v1 = vmax * x1
        wv1 = vmax * w1
        r = 0.5 * vmax * (x2 + 1)
        wr = 0.5 * vmax * w2
        V1, R = np.meshgrid(v1, r, indexing="ij")
        vals = g(np.sqrt((k + V1) ** 2 + R**2) / 2) * g(np.sqrt((k - V1) ** 2 + R**2) / 2)
        edge = float(np.max(np.abs(vals[[0, -1], :])))
        edge = max(edge, float(np.max(np.abs(vals[:, -1]))))
        peak = float(np.max(np.abs(vals)))
        if peak > 0 and edge > TRUNCATION_TOL * peak:
            raise DomainError(
                f"initial kernel decays too slowly: boundary value {edge / peak:.2e} of peak exceeds {TRUNCATION_TOL}")
        radial_w = sphere_area(d - 2) * R ** (d - 2) * wr[None, :]
        profile = (vals * radial_w).sum(axis=1) * wv1 * 2.0**-d
        self._profiles[n1] = (v1, profile)
        return v1, profile

    @staticmethod
    def _find_cutoff(g, k):
        """Smallest |v_1| beyond which the longitudinal product is below 1e-18 of its peak."""
        k = abs(k)

        def prod(v):
            return abs(float(g((v + k) / 2)) * float(g(abs(v - k) / 2)))

        p0 = prod(0.0) or 1.0
        v = 4.0 + 2 * k
        while prod(v) > 1e-18 * p0 and v < 1e4:
            v *= 1.25
        return v

    def __call__(self, t, n=0):
        t = np.asarray(t, float)
        flat = np.atleast_1d(t).ravel()
        out = np.empty(flat.shape, complex)
        # Gauss-Legendre resolves e^{-i omega v} on [-V, V] once the node count
        # exceeds omega V; refine per block of times.
        for start in range(0, flat.size, 1024):
            block = flat[start:start + 1024]
            need = abs(self.k) * float(np.max(np.abs(block))) * self.vmax + 40
            n1 = max(self.n1, 64 * math.ceil(need / 64))
            v1, profile = self._nodes(n1)
            phase = np.exp(-1j * np.multiply.outer(block, self.k * v1))
            out[start:start + block.size] = phase @ (profile * (-1j * self.k * v1) ** n)
        return out.reshape(t.shape) if t.ndim else out[0]


def _check_order(n):
    if n not in (0, 1, 2):
        raise UnsupportedModeError("time derivatives of the free density are available for n = 0, 1, 2")


def _gaussian_free(kernel: InitialKernel, k, t, n):
    s = kernel.width
    d = kernel.d
    amp = math.pi ** (d / 2) * s**d * math.exp(-k * k / (4 * s * s))
    t = np.asarray(t, float)
    a = s * s * k * k
    base = amp * np.exp(-a * t * t)
    if n == 0:
        out = base
    elif n == 1:
        out = -2 * a * t * base
    else:
        out = (4 * a * a * t * t - 2 * a) * base
    return out + 0j


def free_density(kernel: InitialKernel, k, t):
    """Free-transport mode density rho0_k(t)."""
    return free_density_derivatives(kernel, k, t, 0)


def free_density_derivatives(kernel: InitialKernel, k, t, n):
    """n-th time derivative (n <= 2) of rho0_k(t)."""
    _check_order(n)
    if kernel.kind == "gaussian_rank_one":
        out = _gaussian_free(kernel, k, t, n)
    else:
        out = _SeparableSource(kernel, k)(t, n)
    return out if np.ndim(out) else complex(out)


def free_envelope(kernel: InitialKernel, k, t):
    """Closed-form phase-mixing envelope for the Gaussian kernel."""
    if kernel.kind != "gaussian_rank_one":
        raise UnsupportedModeError("closed-form envelope only for the Gaussian kernel")
    return np.abs(_gaussian_free(kernel, k, t, 0))


# ---------------------------------------------------------------------------
# Volterra solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeTrace:
    k: float
    dt: float
    samples: np.ndarray
    source_samples: np.ndarray
    kernel_samples: np.ndarray

    @property
    def times(self):
        return self.dt * np.arange(self.samples.size)

    @property
    def horizon(self):
        return self.dt * (self.samples.size - 1)


def volterra_trapezoid(kernel_samples, source_samples, dt):
    """Trapezoidal product integration of rho + F * rho = g on a uniform grid."""
    f = np.asarray(kernel_samples)
    g = np.asarray(source_samples, complex)
    n = g.size
    rho = np.empty(n, complex)
    rho[0] = g[0]
    denom = 1 + 0.5 * dt * f[0]
    for i in range(1, n):
        conv = np.dot(f[i - 1:0:-1], rho[1:i]) + 0.5 * f[i] * rho[0]
        rho[i] = (g[i] - dt * conv) / denom
    return rho


def solve_volterra(w: InteractionSymbol, m: Marginal, kernel: InitialKernel | None, k, dt=None, horizon=None,
                   tau_ref=None, source=None) -> ModeTrace:
    """Mode density on [0, horizon] with step dt (defaults 0.01/tau0 and 400/tau0).

    ``source`` overrides the free-gas source with a callable t -> rho0(t).
    ``tau_ref`` is the fastest frequency to resolve (default: tau0 or, for
    compact profiles, the absorption edge 2kY + k^2 if larger).
    """
    if not k > 0:
        raise DomainError("k must be positive")
    tau0 = m.tau0
    dt = 0.01 / tau0 if dt is None else float(dt)
    horizon = 400.0 / tau0 if horizon is None else float(horizon)
    if tau_ref is None:
        tau_ref = tau0
        if m.compact:
            tau_ref = max(tau0, 2 * k * m.upsilon + k * k)
    limit = 0.05 / max(1.0, tau_ref)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise DomainError(f"time step dt = {dt:g} too coarse for frequency {tau_ref:g}; use dt <= {limit:.6g}")
    if not horizon > dt:
        raise DomainError("horizon must exceed the time step")
    n = int(round(horizon / dt)) + 1
    t = dt * np.arange(n)
    if source is not None:
        g = np.asarray(source(t), complex)
    else:
        if kernel is None:
            raise DomainError("either an initial kernel or a source callable is required")
        g = np.asarray(free_density(kernel, k, t), complex)
    if w.kind == "general" and w.fn is not None and np.all(np.asarray(w(np.array([k]))) == 0):
        f = np.zeros(n)
    else:
        f = volterra_kernel(w, m, k, t)
    rho = volterra_trapezoid(f, g, dt)
    return ModeTrace(float(k), dt, rho, g, f)


# ---------------------------------------------------------------------------
# Mode fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeFit:
    frequency: float
    decay_rate: float
    residual: float


def fit_mode(trace: ModeTrace | None = None, *, times=None, values=None) -> ModeFit:
    """Fit A e^{gamma t} cos(tau t + phi0): FFT peak, then analytic-signal phase and envelope."""
    if trace is not None:
        t = trace.times
        y = np.asarray(trace.samples)
    else:
        t = np.asarray(times, float)
        y = np.asarray(values)
    if y.size < 64:
        raise DomainError("need at least 64 samples to fit a mode")
    if np.iscomplexobj(y):
        y = y.real
    y = np.asarray(y, float)
    dt = t[1] - t[0]
    n = y.size
    spec = np.abs(np.fft.rfft((y - y.mean()) * np.hanning(n)))
    freqs = 2 * math.pi * np.fft.rfftfreq(n, dt)
    peak = int(np.argmax(spec[1:])) + 1 if spec.size > 1 else 0
    median = float(np.median(spec[1:])) if spec.size > 1 else 0.0
    crossings = int(np.count_nonzero(np.diff(np.signbit(y[n // 2:]))))
    oscillatory = (spec.size > 1 and spec[peak] > 3 * median and crossings >= 4
                   and spec[peak] > 1e-12 * max(1.0, np.abs(y).max()) * n)
    # Tail half only; the analytic signal is formed on that segment (so the
    # large early amplitude cannot wrap around) and its edges are trimmed.
    seg_t = t[n // 2:]
    seg_y = y[n // 2:]
    trim = max(1, seg_y.size // 10)
    core = slice(trim, seg_y.size - trim)
    th = seg_t[core]
    if not oscillatory:
        mag = np.abs(seg_y[core])
        good = mag > 0
        if good.sum() < 2 or np.ptp(mag[good]) == 0:
            return ModeFit(0.0, 0.0, 0.0)
        slope = np.polyfit(th[good], np.log(mag[good]), 1)[0]
        return ModeFit(0.0, float(slope), 0.0)
    # Iteratively whiten the segment with the current decay estimate so the
    # analytic signal sees a nearly stationary oscillation.
    decay = 0.0
    shift = seg_t - seg_t[0]
    for _ in range(4):
        analytic = signal.hilbert(seg_y * np.exp(-decay * shift))
        env = (np.abs(analytic) * np.exp(decay * shift))[core]
        good = env > 0
        coef = np.polyfit(th[good], np.log(env[good]), 1)
        if abs(coef[0] - decay) <= 1e-9 * max(1.0, abs(decay)):
            decay = float(coef[0])
            break
        decay = float(coef[0])
    phase = np.unwrap(np.angle(analytic))[core]
    pcoef = np.polyfit(th, phase, 1)
    freq = float(pcoef[0])
    if abs(abs(freq) - freqs[peak]) > 2 * (freqs[1] - freqs[0]):
        freq = float(freqs[peak])
    ref = seg_y[core]
    scale = max(np.linalg.norm(ref), 1e-300)
    t0 = th[0]
    x0 = np.array([math.exp(np.polyval(coef, t0)), decay, freq, np.polyval(pcoef, t0)])

    def model(x):
        return x[0] * np.exp(x[1] * (th - t0)) * np.cos(x[2] * (th - t0) + x[3])

    resid0 = float(np.linalg.norm(ref - model(x0)) / scale)
    # Polish the envelope/phase estimates by nonlinear least squares on the same segment.
    sol = optimize.least_squares(lambda x: (model(x) - ref) / scale, x0, method="lm", xtol=1e-15, ftol=1e-15)
    resid = float(np.linalg.norm(ref - model(sol.x)) / scale)
    if sol.success and resid <= resid0 and abs(sol.x[2] - freq) <= 2 * (freqs[1] - freqs[0]):
        decay, freq = float(sol.x[1]), float(sol.x[2])
    else:
        resid = resid0
    return ModeFit(abs(freq), decay, resid)


# ---------------------------------------------------------------------------
# Radial synthesis
# ---------------------------------------------------------------------------


def radial_synthesis(ks, values, d, r_grid):
    """Inverse Fourier transform of a radial mode profile on a radial grid (trapezoid in k)."""
    ks = np.asarray(ks, float)
    f = np.asarray(values)
    r = np.asarray(r_grid, float)
    if ks.size < 2 or np.any(np.diff(ks) <= 0):
        raise DomainError("k-grid must be strictly increasing")
    wk = np.empty_like(ks)
    wk[1:-1] = 0.5 * (ks[2:] - ks[:-2])
    wk[0] = 0.5 * (ks[1] - ks[0])
    wk[-1] = 0.5 * (ks[-1] - ks[-2])
    kr = np.outer(r, ks)
    if d == 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            kern = np.where(kr > 0, np.sin(kr) / np.where(r[:, None] > 0, r[:, None], 1.0), ks[None, :])
        return (kern * (ks * wk * f)[None, :]).sum(axis=1) / (2 * math.pi**2)
    if d == 2:
        return (special.j0(kr) * (ks * wk * f)[None, :]).sum(axis=1) / (2 * math.pi)
    raise UnsupportedModeError("radial synthesis is implemented for d = 2 and d = 3")


def assemble_density(traces, d, t, r_grid):
    """rho(t, r) from mode traces on a radial k-grid (linear interpolation in time)."""
    traces = sorted(traces, key=lambda tr: tr.k)
    if len(traces) < 128:
        warnings.warn(f"k-grid has only {len(traces)} modes; at least 128 are recommended", stacklevel=2)
    ks = np.array([tr.k for tr in traces])
    vals = np.array([np.interp(t, tr.times, tr.samples.real) + 1j * np.interp(t, tr.times, tr.samples.imag)
                     for tr in traces])
    peak = float(np.max(np.abs(vals))) or 1.0
    if abs(vals[-1]) > 1e-6 * peak:
        warnings.warn("largest-k mode amplitude exceeds 1e-6 of peak: k-grid may not cover the spectrum",
                      stacklevel=2)
    return radial_synthesis(ks, vals, d, r_grid)
