import dataclasses
import math

import numpy as np
import pytest
from scipy import optimize

from plasmon_lab import equilibria as eq
from plasmon_lab import spectral as sp
from plasmon_lab.dielectric import Dielectric, eval_D
from plasmon_lab.errors import DomainError, InconclusiveError, NoRootError, WrongRegimeError


# -- threshold -----------------------------------------------------------------


def _threshold_oracle():
    """Independent route: dense trapezoid of the cancelled integrand plus bisection."""
    u = np.linspace(-1, 1, 1_000_001)
    base = (math.pi / 3) * (1 - u) ** 2 * (1 + u) ** 3

    def g(k):
        return k * k - 0.5 * np.trapezoid(base / (1 + k - u), u)

    return optimize.bisect(g, 0.1, 2.0, xtol=1e-14)


def test_threshold_matches_independent_oracle(kappa0):
    assert kappa0 == pytest.approx(_threshold_oracle(), abs=1e-8)
    assert kappa0 == pytest.approx(0.6310152269286581, abs=1e-12)


def test_threshold_backends_agree(w, compact, threshold):
    th2 = sp.solve_threshold(w, compact, "trapezoid")
    assert abs(th2.kappa0 - threshold.kappa0) <= 1e-9
    assert abs(threshold.residual) <= 1e-12
    with pytest.raises(DomainError):
        sp.solve_threshold(w, compact, "simpson")


def test_threshold_sign_change(threshold, kappa0):
    assert threshold.phi_of_k(1.1 * kappa0) > 0 > threshold.phi_of_k(0.9 * kappa0)


def test_threshold_degenerate_for_unbounded_speeds(w, maxwell):
    th = sp.solve_threshold(w, maxwell)
    assert th.degenerate and th.kappa0 == 0.0


def test_threshold_rejects_low_decay_order(w, compact):
    cls = dataclasses.replace(compact.decay_class, order=0.5)
    m = dataclasses.replace(compact, decay_class=cls)
    with pytest.raises(DomainError):
        sp.solve_threshold(w, m)


# -- plasmon branch ------------------------------------------------------------


def test_tau_star_limits(w, compact, threshold, kappa0):
    p0 = sp.solve_tau_star(w, compact, 0.0, threshold)
    assert p0.tau_star == pytest.approx(math.sqrt(2 * compact.rho_mu), rel=1e-14)
    p = sp.solve_tau_star(w, compact, kappa0, threshold)
    assert p.tau_star == pytest.approx(2 * kappa0 + kappa0**2, rel=1e-9)
    small = sp.solve_tau_star(w, compact, 1e-3, threshold)
    assert small.tau_star == pytest.approx(compact.tau0, rel=1e-5)


def test_tau_star_frozen_value(w, compact, threshold, kappa0):
    p = sp.solve_tau_star(w, compact, kappa0 / 2, threshold)
    assert p.tau_star == pytest.approx(1.43593999235, abs=1e-10)


def test_tau_star_is_a_root(w, compact, threshold, kappa0):
    d = Dielectric(compact, w)
    for k in np.linspace(0.02, 0.98, 20) * kappa0:
        p = sp.solve_tau_star(w, compact, float(k), threshold, derivatives=False)
        assert p.tau_star > 2 * k + k * k
        assert abs(d.D(1j * p.tau_star, float(k), path="boundary")) <= 1e-9


def test_tau_star_wrong_regime(w, compact, maxwell, threshold, kappa0):
    with pytest.raises(WrongRegimeError):
        sp.solve_tau_star(w, compact, 1.01 * kappa0, threshold)
    with pytest.raises(WrongRegimeError):
        sp.solve_tau_star(w, maxwell, 0.3)
    with pytest.raises(DomainError):
        sp.solve_tau_star(w, compact, -0.1, threshold)


def test_moment_integrals_definition(w, compact, threshold):
    k = 0.3
    tau = sp.solve_tau_star(w, compact, k, threshold, derivatives=False).tau_star
    ints = sp.moment_integrals(w, compact, k, tau)
    u = np.linspace(-1, 1, 400_001)
    a = tau / 2 - k * u
    q = a * a - k**4 / 4
    phi = (math.pi / 3) * (1 - u * u) ** 3
    for (n, mm), v in ints.items():
        assert v == pytest.approx(np.trapezoid(a**n * u**mm * phi / q**2, u), rel=1e-8)
    with pytest.raises(DomainError):
        sp.moment_integrals(w, compact, k, 0.5)


def test_group_velocity_against_finite_differences(w, compact, threshold, kappa0):
    h = 1e-4
    for k in (0.1, 0.3, 0.5):
        f = [sp.solve_tau_star(w, compact, k + s * h, threshold, derivatives=False).tau_star for s in (-1, 0, 1)]
        dtau, ddtau = sp.group_velocity(w, compact, k, tau_star=f[1])
        assert dtau == pytest.approx((f[2] - f[0]) / (2 * h), abs=1e-5)
        assert ddtau == pytest.approx((f[2] - 2 * f[1] + f[0]) / h**2, abs=1e-3)
        # |tau*'| is bounded by the maximal speed derivative of the edge 2kY + k^2
        assert 0 < dtau < 2 + 2 * k


def test_group_velocity_at_zero(w, compact):
    dtau, ddtau = sp.group_velocity(w, compact, 0.0)
    assert dtau == 0.0
    assert ddtau > 0


# -- damping laws ----------------------------------------------------------------


def test_gaussian_law_closed_form(w, maxwell):
    for k in (0.2, 0.4):
        rate, nu = sp.landau_rate_gaussian(w, maxwell, k)
        assert nu == pytest.approx(maxwell.tau0 / (2 * k))
        assert rate == pytest.approx(math.pi * nu**2 * (-2 * nu * math.pi * math.exp(-nu * nu)), rel=1e-10)
        assert rate < 0
    r1, _ = sp.landau_rate_gaussian(w, maxwell, 0.3)
    r2, _ = sp.landau_rate_gaussian(w, maxwell, 0.4)
    assert abs(r2) > abs(r1)
    with pytest.raises(WrongRegimeError):
        sp.landau_rate_gaussian(w, eq.build_marginal(eq.compact_poly(3)), 0.3)
    with pytest.raises(DomainError):
        sp.landau_rate_gaussian(w, maxwell, 0.0)


def test_perturbative_rate_sign(w, maxwell):
    rate, tau_r = sp.landau_rate_perturbative(w, maxwell, 0.5)
    assert rate < 0
    assert tau_r > maxwell.tau0


def test_compact_law(w, compact, threshold, kappa0):
    c = sp.compact_damping_coefficients(w, compact, threshold)
    assert c.theta0 > 0
    assert c.kt0 == pytest.approx(kappa0**2, abs=1e-12)
    rate, nu, theta0 = sp.landau_rate_compact(w, compact, kappa0 + 0.05, coefficients=c)
    assert rate < 0
    assert nu < compact.upsilon + 0.5 * (kappa0 + 0.05)
    with pytest.raises(WrongRegimeError):
        sp.landau_rate_compact(w, compact, kappa0, coefficients=c)


def test_kappa_tilde_prime_matches_finite_difference(compact, kappa0):
    h = 1e-5
    fd = (sp.kappa_tilde(compact, 0, kappa0 + h) - sp.kappa_tilde(compact, 0, kappa0 - h)) / (2 * h)
    assert sp.kappa_tilde0_prime(compact, kappa0) == pytest.approx(fd, rel=1e-7)


# -- damped roots --------------------------------------------------------------


def test_damped_root_below_threshold_is_on_axis(w, compact, threshold):
    p = sp.solve_damped_root(w, compact, 0.3, threshold=threshold)
    assert p.re_lambda == 0.0
    assert p.method == "bisection_on_axis"


def test_damped_root_maxwell(w, maxwell):
    d = Dielectric(maxwell, w)
    for k in (0.1, 0.3, 0.5):
        p = sp.solve_damped_root(w, maxwell, k, dielectric=d)
        # at k = 0.1 the rate is of order exp(-nu*^2) ~ 1e-120 and rounds to zero
        assert p.re_lambda <= 0 and (k < 0.2 or p.re_lambda < 0)
        assert abs(d.D(p.lam, k)) <= 1e-10
        # conjugate pairing: lambda_- = conj(lambda_+) is a root of the same relation
        assert abs(d.D(np.conj(p.lam), k)) <= 1e-10


def test_damped_root_compact_above_threshold(w, compact, threshold, kappa0):
    k = kappa0 + 0.02
    p = sp.solve_damped_root(w, compact, k, threshold=threshold)
    assert p.re_lambda < 0
    assert p.tau_star < 2 * k + k * k


def test_damped_root_failure_carries_trace(w, maxwell):
    with pytest.raises(NoRootError) as exc:
        sp.solve_damped_root(w, maxwell, 0.5, seed=0.3 + 40j, tol=1e-30)
    assert len(exc.value.trace) > 0


# -- Nyquist certificates --------------------------------------------------------


def test_nyquist_below_and_above_threshold(w, compact, threshold, kappa0):
    below = sp.nyquist_certificate(w, compact, 0.5 * kappa0, threshold=threshold)
    assert below.winding_number == 2 and below.enclosed_axis_zeros == 2 and below.passed
    above = sp.nyquist_certificate(w, compact, 1.5 * kappa0, threshold=threshold)
    assert above.winding_number == 0 and above.passed


def test_nyquist_invariance(w, compact, threshold, kappa0):
    k = 0.4 * kappa0
    a = sp.nyquist_certificate(w, compact, k, threshold=threshold)
    b = sp.nyquist_certificate(w, compact, k, T=2 * a.T, indentation_radius=0.5 * a.indentation_radius,
                               threshold=threshold)
    assert a.winding_number == b.winding_number


def test_nyquist_maxwell(w, maxwell):
    assert sp.nyquist_certificate(w, maxwell, 1.0).winding_number == 0
    # the axis minimum of |D| is below the certificate floor for small k
    with pytest.raises(InconclusiveError):
        sp.nyquist_certificate(w, maxwell, 0.2)


def test_nyquist_rejects_small_contour(w, maxwell):
    with pytest.raises(DomainError):
        sp.nyquist_certificate(w, maxwell, 1.0, T=1.0)


def test_embedded_mode_bound(w, compact):
    k = 0.5
    taus = np.linspace(-0.99, 0.99, 41) * 2 * k
    absd, bound = sp.embedded_mode_scan(w, compact, k, taus)
    u = taus / (2 * k)
    ref = math.pi / (4 * k * k) * np.abs(-2 * math.pi * u * (1 - u * u) ** 2)
    assert np.allclose(bound, ref, rtol=1e-10, atol=1e-14)
    assert np.all(absd >= bound)
    assert np.all(absd[u != 0] > 0)


def test_edge_value_consistency(w, compact, threshold):
    k = 0.45
    v = eval_D(w, compact, 1j * (2 * k + k * k), k, "boundary").value
    assert v.real == pytest.approx(threshold.phi_of_k(k), rel=1e-9)
