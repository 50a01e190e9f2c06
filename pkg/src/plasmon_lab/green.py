"""Mode-wise Green function G_k(t) = delta(t) + sum_pm a_pm e^{lambda_pm t} + G^r_k(t).

The Laplace transform of G_k is 1/D(lambda, k).  The plasmon poles are
removed with their residues a_pm = 1/d_lambda D(lambda_pm), and the remainder
is the inverse transform along the imaginary axis

    G^r_k(t) = (1/2pi) int e^{i tau t} [1/D(i tau) - 1 - sum a/(i tau - lambda)] d tau.

The slow 1/tau tail of that integrand is removed first with a three-term
model c1/(lambda+1) + c2/(lambda+1)^2 + c3/(lambda+1)^3 whose inverse
transform is known; the rest (O(tau^-4)) is integrated with Filon-Legendre
panels, exact for the oscillatory factor at every t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .dielectric import Dielectric, InteractionSymbol, coulomb
from .equilibria import Marginal
from .errors import DomainError
from .spectral import ThresholdResult, solve_damped_root, solve_threshold

FILON_NODES = 16
DEGENERATE_DERIVATIVE = 1e-10


def default_delta0(m: Marginal, threshold: ThresholdResult) -> float:
    """Width of the window above kappa0 where the plasmon poles are tracked.

    Compact profiles: 0.15 kappa0 (the continued roots stay close to the
    absorption edge there).  Unbounded speeds: 0.5, where the Gaussian
    branch is still weakly damped.
    """
    return 0.15 * threshold.kappa0 if m.compact else 0.5


def cutoff_chi(k, kappa0, delta0):
    """C-infinity bump: 1 on [0, kappa0 + delta0/2], 0 beyond kappa0 + delta0."""
    k = np.asarray(k, float)
    a = kappa0 + 0.5 * delta0
    b = kappa0 + delta0
    x = np.clip((k - a) / (b - a), 0.0, 1.0)

    def psi(s):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    out = psi(1 - x) / (psi(1 - x) + psi(x))
    return np.where(k <= a, 1.0, np.where(k >= b, 0.0, out))


@dataclass(frozen=True)
class GreenDecomposition:
    k: float
    a_plus: complex
    a_minus: complex
    lambda_plus: complex
    lambda_minus: complex
    times: np.ndarray
    remainder_trace: np.ndarray
    regime: str

    def oscillatory(self, t=None):
        t = self.times if t is None else np.asarray(t, float)
        return self.a_plus * np.exp(self.lambda_plus * t) + self.a_minus * np.exp(self.lambda_minus * t)

    def resolvent(self):
        """G_k - delta on the time grid: oscillatory part plus remainder."""
        return self.oscillatory() + self.remainder_trace


class GreenSolver:
    """Bundles the dielectric evaluator, threshold and delta0 for one profile."""

    def __init__(self, w: InteractionSymbol | None, m: Marginal, delta0=None, threshold=None):
        self.w = w if w is not None else coulomb()
        self.m = m
        self.threshold = threshold if threshold is not None else solve_threshold(self.w, m)
        self.delta0 = float(delta0) if delta0 is not None else default_delta0(m, self.threshold)
        self.dielectric = Dielectric(m, self.w, polynomial_extension=m.compact and m.extension is not None)

    @property
    def kappa0(self):
        return self.threshold.kappa0

    def has_poles(self, k):
        return k < self.kappa0 + self.delta0

    def roots(self, k):
        if k == 0:
            return 1j * self.m.tau0, -1j * self.m.tau0
        p = solve_damped_root(self.w, self.m, k, threshold=self.threshold, dielectric=self.dielectric)
        return p.lam, p.lam.conjugate()

    def residues(self, k, roots=None):
        if k == 0:
            return 0.5j * self.m.tau0, -0.5j * self.m.tau0
        lp, lm = roots if roots is not None else self.roots(k)
        dp = self.dielectric.dD(lp, k)
        if abs(dp) < DEGENERATE_DERIVATIVE:
            raise DomainError(f"degenerate root: |dD/dlambda| = {abs(dp):.2e}")
        ap = 1.0 / dp
        return ap, ap.conjugate()

    # -- remainder ----------------------------------------------------------
    def _breakpoints(self, k, poles):
        """(kinks of the boundary values, on-axis pole frequencies), both >= 0."""
        m = self.m
        singular = []
        if m.compact:
            ups = m.upsilon
            singular = sorted({abs(2 * k * ups - k * k), 2 * k * ups + k * k})
        on_axis = sorted({abs(lam.imag) for lam in poles if abs(lam.real) < 1e-3 * max(1.0, abs(lam.imag))})
        return singular, on_axis

    def _panels(self, k, poles):
        """Panel edges on [0, tau_max]; mirrored to negative tau by symmetry."""
        singular, poles_axis = self._breakpoints(k, poles)
        scale = max(max(singular + poles_axis, default=0.0), self.m.tau0, 1.0)
        inner_end = 4 * scale + 10
        base = np.linspace(0.0, inner_end, int(np.ceil(inner_end / (0.02 * scale))) + 1)
        edges = set(base.tolist())
        for p in list(singular) + list(poles_axis):
            edges.add(p)
        for p in singular:
            # Geometric grading toward the algebraic kinks of the boundary values.
            for j in range(1, 30):
                h = 0.02 * scale * 0.5**j
                if h < 1e-9 * scale:
                    break
                for q in (p - h, p + h):
                    if q > 0:
                        edges.add(q)
        tail = inner_end
        while tail < 1e5 * scale:
            tail *= 1.5
            edges.add(tail)
        return np.array(sorted(edges))

    def _integrand(self, tau, k, poles, residues, model):
        d = self.dielectric.D_axis(tau, k)
        lam = 1j * tau
        h = 1.0 / d - 1.0
        for lp, ap in zip(poles, residues):
            h = h - ap / (lam - lp)
        c1, c2, c3 = model
        return h - (c1 / (lam + 1) + c2 / (lam + 1) ** 2 + c3 / (lam + 1) ** 3)

    def _tail_model(self, k, poles, residues):
        m = self.m
        a2 = 2.0 * float(self.w(k)) * k * k * m.rho_mu
        b1 = -sum(residues)
        b2 = -a2 - sum(a * l for a, l in zip(residues, poles))
        b3 = -sum(a * l * l for a, l in zip(residues, poles))
        c1 = b1
        c2 = b2 + c1
        c3 = b3 - c1 + 2 * c2
        return complex(c1), complex(c2), complex(c3)

    def remainder(self, k, times, poles=(), residues=()):
        times = np.asarray(times, float)
        model = self._tail_model(k, poles, residues)
        edges = self._panels(k, poles)
        x, wq = np.polynomial.legendre.leggauss(FILON_NODES)
        # Legendre coefficient projector on the Gauss nodes.
        pmat = np.array([special.eval_legendre(n, x) for n in range(FILON_NODES)])
        proj = (2 * np.arange(FILON_NODES)[:, None] + 1) / 2 * pmat * wq[None, :]
        lo, hi = edges[:-1], edges[1:]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * x
        vals = self._integrand(nodes.ravel(), k, poles, residues, model).reshape(nodes.shape)
        if not poles and self.m.compact and 0 < k < self.kappa0:
            raise DomainError(f"k = {k} is below the threshold: the on-axis plasmon poles must be subtracted")
        if not poles:
            dmin = float(np.min(np.abs(self.dielectric.D_axis(nodes.ravel(), k))))
            if dmin < 1e-6:
                raise DomainError(f"|D| = {dmin:.1e} on the axis: an unsubtracted pole lies within 1e-6 of it")
        coeff = vals @ proj.T  # (panels, n)
        # Positive tau half; the negative half is its conjugate mirror because
        # the integrand satisfies h(-tau) = conj h(tau).
        out = np.zeros(times.shape, complex)
        n = np.arange(FILON_NODES)
        in_pow = (1j) ** n
        keys = np.array([float(f"{h:.11e}") for h in half])
        uniq, inverse = np.unique(keys, return_inverse=True)
        for gi, h in enumerate(uniq):
            sel = np.flatnonzero(inverse == gi)
            arg = np.multiply.outer(times, h)
            jn = np.array([special.spherical_jn(j, arg) for j in n])  # (n, t)
            weights = 2 * in_pow[:, None] * jn * h  # int over panel of P_n e^{i tau t}, per unit Legendre coeff
            blk = coeff[sel] @ weights  # (sel, t)
            phase = np.exp(1j * np.multiply.outer(mid[sel], times))
            out += (phase * blk).sum(axis=0)
        integral = 2 * out.real  # positive half plus mirrored negative half
        c1, c2, c3 = model
        tail = (c1 + c2 * times + 0.5 * c3 * times**2) * np.exp(-times)
        return integral / (2 * math.pi) + tail

    def decompose(self, k, times) -> GreenDecomposition:
        if not k > 0:
            raise DomainError("k must be positive")
        times = np.asarray(times, float)
        if self.has_poles(k):
            lp, lm = self.roots(k)
            ap, am = self.residues(k, (lp, lm))
            poles, res = (lp, lm), (ap, am)
            regime = "below_threshold" if (self.m.compact and k <= self.kappa0) else "above_threshold"
        else:
            lp = lm = 0j
            ap = am = 0j
            poles, res = (), ()
            regime = "above_threshold"
        rem = self.remainder(k, times, poles, res)
        return GreenDecomposition(float(k), complex(ap), complex(am), complex(lp), complex(lm), times,
                                  rem.real.copy(), regime)


def residues(w, m: Marginal, k, solver: GreenSolver | None = None):
    """(a_plus, a_minus) = 1/d_lambda D at the plasmon roots."""
    s = solver if solver is not None else GreenSolver(w, m)
    if not s.has_poles(k):
        raise DomainError(f"k = {k} is beyond kappa0 + delta0: no tracked plasmon poles")
    return s.residues(k)


def remainder_trace(w, m: Marginal, k, time_grid, solver: GreenSolver | None = None):
    s = solver if solver is not None else GreenSolver(w, m)
    return s.decompose(k, time_grid).remainder_trace


def convolve_causal(kernel, source, dt):
    """Trapezoidal (kernel * source)(t_n) = int_0^t kernel(t-s) source(s) ds."""
    kernel = np.asarray(kernel)
    source = np.asarray(source)
    n = source.size
    full = np.convolve(kernel[:n], source)[:n]
    corr = 0.5 * (kernel[:n] * source[0] + kernel[0] * source[:n])
    out = dt * (full - corr)
    out[0] = 0.0
    return out


def reconstruct_density(decomp: GreenDecomposition, source_samples, dt):
    """rho = source + (G - delta) * source on the decomposition's uniform time grid."""
    src = np.asarray(source_samples, complex)
    return src + convolve_causal(decomp.resolvent(), src, dt)


# ---------------------------------------------------------------------------
# Physical-space oscillatory Green function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchTable:
    ks: np.ndarray
    lambdas: np.ndarray
    residues: np.ndarray
    chi: np.ndarray


def branch_table(solver: GreenSolver, ks) -> BranchTable:
    ks = np.asarray(ks, float)
    lams = np.empty(ks.size, complex)
    res = np.empty(ks.size, complex)
    chi = cutoff_chi(ks, solver.kappa0, solver.delta0)
    for i, k in enumerate(ks):
        if chi[i] == 0:
            lams[i] = res[i] = 0
            continue
        lp, lm = solver.roots(k)
        lams[i] = lp
        res[i] = solver.residues(k, (lp, lm))[0]
    return BranchTable(ks, lams, res, chi)


def osc_green_radial(w, m: Marginal, t, r_grid, d=3, solver: GreenSolver | None = None, n_k=400,
                     table: BranchTable | None = None):
    """G^osc(t, r) from the plasmon branch: radial inverse transform of chi Re[2 a_+ e^{lambda_+ t}]."""
    from .evolution import radial_synthesis

    s = solver if solver is not None else GreenSolver(w, m)
    if table is None:
        kmax = s.kappa0 + s.delta0
        ks = np.linspace(0.0, kmax, n_k + 1)
        table = branch_table(s, ks)
    modes = table.chi * np.real(2 * table.residues * np.exp(table.lambdas * t))
    return radial_synthesis(table.ks, modes, d, r_grid).real


def oscillatory_mode(table: BranchTable, source_fn, times, dt):
    """chi(k) Re[2 a_+ e^{lambda_+ t} int_0^t e^{-lambda_+ s} g_k(s) ds] for every k of the table.

    ``source_fn(k, s)`` is the free mode density g_k.  The time integral is a
    cumulative trapezoid on a uniform grid of step ``dt`` covering ``times``.
    Returns an array of shape (len(times), len(table.ks)).
    """
    from scipy.integrate import cumulative_trapezoid

    times = np.asarray(times, float)
    n = int(math.ceil(float(times.max()) / dt)) + 1
    s = dt * np.arange(n)
    out = np.zeros((times.size, table.ks.size))
    for j, k in enumerate(table.ks):
        if table.chi[j] == 0:
            continue
        lam = table.lambdas[j]
        g = np.asarray(source_fn(k, s), complex)
        cum = cumulative_trapezoid(np.exp(-lam * s) * g, s, initial=0.0)
        cum_t = np.interp(times, s, cum.real) + 1j * np.interp(times, s, cum.imag)
        out[:, j] = table.chi[j] * np.real(2 * table.residues[j] * np.exp(lam * times) * cum_t)
    return out


def assemble_oscillatory_density(solver: GreenSolver, kernel, times, r_grid, d=3, n_k=400, dt=0.01,
                                 table: BranchTable | None = None):
    """Radial profile of the oscillatory density G^osc * rho^0 at each requested time.

    Returns an array of shape (len(times), len(r_grid)).
    """
    from .evolution import free_density, radial_synthesis

    if table is None:
        ks = np.linspace(0.0, solver.kappa0 + solver.delta0, n_k + 1)
        table = branch_table(solver, ks)
    modes = oscillatory_mode(table, lambda k, s: free_density(kernel, k, s), times, dt)
    return np.array([radial_synthesis(table.ks, row, d, r_grid).real for row in modes])
