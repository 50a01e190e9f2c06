import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import wofz

from conftest import phi_compact, phi_maxwell
from plasmon_lab.errors import DomainError, UnsupportedModeError
from plasmon_lab.hilbert import (HilbertEvaluator, eval_boundary, eval_continued, eval_derivative,
                                 eval_interior)


@pytest.fixture(scope="module")
def hm(maxwell):
    return HilbertEvaluator(maxwell)


@pytest.fixture(scope="module")
def hc(compact):
    return HilbertEvaluator(compact)


def faddeeva_oracle(z):
    """int pi e^{-u^2}/(z-u) du = i pi^2 w(-z) for Im z < 0 (independent special-function route)."""
    return 1j * math.pi**2 * wofz(-np.asarray(z, complex))


# -- interior ------------------------------------------------------------------


def test_interior_brute_force_trapezoid(hm):
    u = np.linspace(-12, 12, 2_000_001)
    z = -1j
    ref = np.trapezoid(phi_maxwell(u) / (z - u), u)
    assert abs(eval_interior(hm, z) - ref) <= 1e-8


def test_interior_faddeeva_oracle(hm):
    rng = np.random.default_rng(3)
    z = rng.uniform(-5, 5, 60) - 1j * rng.uniform(1e-3, 4, 60)
    assert np.allclose(hm.interior(z), faddeeva_oracle(z), rtol=1e-10, atol=1e-12)


def test_interior_far_field(hm, hc, maxwell, compact):
    for h, m in ((hm, maxwell), (hc, compact)):
        for R in (1e2, 1e3, 1e4):
            val = eval_interior(h, -1j * R)
            assert abs(val) <= m.rho_mu / R * (1 + 1e-3)
            assert abs(val) * R / m.rho_mu == pytest.approx(1.0, abs=10 / R**2 * 10)


def test_interior_rejects_upper_half_plane(hm):
    with pytest.raises(DomainError):
        eval_interior(hm, 0.2 + 0.0j)
    with pytest.raises(DomainError):
        eval_interior(hm, 0.2 + 0.1j)


def test_oddness_point(hm, hc):
    z = 0.7 - 0.3j
    for h in (hm, hc):
        # H(-z) = -H(z) for the Cauchy formula; -z lies above the axis, so evaluate
        # it through the reflection of the lower-half-plane formula.
        assert abs(np.conj(h.interior(np.conj(-z))) + h.interior(z)) <= 1e-12


def test_odd_conjugation_symmetry_random(hm, hc):
    rng = np.random.default_rng(11)
    z = rng.uniform(-3, 3, 100) - 1j * rng.uniform(0.01, 3, 100)
    for h in (hm, hc):
        lhs = h.interior(-np.conj(z))
        assert np.max(np.abs(lhs + np.conj(h.interior(z)))) <= 1e-10


def test_near_axis_far_outside_support(hc):
    # the near-axis subtraction must not be applied where the polynomial extension is huge
    for x in (5.0, 700.0):
        for n in (0, 1):
            assert abs(hc.interior(x - 1e-3j, n) - hc.boundary(x, n)) <= 1e-3 * abs(hc.boundary(x, n))


def test_difference_avoids_cancellation(hc):
    # H'(z + k) - H'(z) far outside the support against the merged-kernel moment expansion
    k = 1e-4
    z = 6918.0
    diff = hc.difference(z + k, z + 0j, k, 1)
    ref = integrate.quad(lambda u: k * phi_compact(u) * (2 * (z - u) + k) / ((z + k - u) ** 2 * (z - u) ** 2),
                         -1, 1, epsabs=0, epsrel=1e-13)[0]
    assert diff.real == pytest.approx(ref, rel=1e-9)
    near = hc.difference(0.3 + k, 0.3 + 0j, k, 0)
    assert near == hc.boundary(0.3 + k) - hc.boundary(0.3)


# -- boundary ------------------------------------------------------------------


def test_boundary_at_zero(hm, hc, maxwell, compact):
    for h, m in ((hm, maxwell), (hc, compact)):
        v = eval_boundary(h, 0.0)
        assert abs(v.real) <= 1e-12
        assert v.imag == pytest.approx(math.pi * float(m.phi(0.0)), rel=1e-13)


def test_boundary_matches_limit(hm):
    v = eval_boundary(hm, 1.0)
    assert abs(v - eval_interior(hm, 1.0 - 1e-6j)) <= 1e-4
    assert abs(v - faddeeva_oracle(1.0 + 0j)) <= 1e-10


def test_boundary_outside_compact_support(hc):
    for tau in (1.3, -2.0, 5.0):
        v = eval_boundary(hc, tau)
        ref = integrate.quad(lambda u: phi_compact(u) / (tau - u), -1, 1, epsabs=1e-14, epsrel=1e-13)[0]
        assert v.imag == 0.0
        assert v.real == pytest.approx(ref, rel=1e-10)


def test_boundary_principal_value_near_edge(hc):
    # PV by scipy's Cauchy-weight quadrature (QAWC) as an independent route
    for tau in (0.3, 0.9, 0.999):
        ref = integrate.quad(lambda u: -phi_compact(u), -1, 1, weight="cauchy", wvar=tau, epsabs=1e-14)[0]
        v = eval_boundary(hc, tau)
        assert v.real == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert v.imag == pytest.approx(math.pi * float(phi_compact(tau)), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("which", ["maxwell", "compact"])
def test_plemelj_consistency(which, hm, hc, maxwell, compact):
    h, m = (hm, maxwell) if which == "maxwell" else (hc, compact)
    rng = np.random.default_rng(5)
    span = 1.0 if m.compact else 4.0
    tau = rng.uniform(-span, span, 50) * 0.999
    b = h.boundary(tau)
    i = h.interior(tau - 1e-6j)
    assert np.all(np.abs(b - i) <= 1e-4 * (1 + np.abs(b)))


def test_plemelj_richardson_trend(hm):
    tau = 0.6
    b = eval_boundary(hm, tau)
    errs = [abs(eval_interior(hm, tau - 1j * eps) - b) for eps in (1e-3, 1e-4, 1e-5)]
    assert errs[0] > errs[1] > errs[2]
    # linear convergence in eps: each decade gains about a factor 10
    assert errs[0] / errs[1] == pytest.approx(10, rel=0.1)


# -- continued -----------------------------------------------------------------


def test_continued_matches_boundary(hm):
    tau = 0.8
    assert abs(eval_continued(hm, tau + 1e-12j) - eval_boundary(hm, tau)) <= 1e-8


def test_schwarz_reflection(hm):
    z = 0.5 + 0.1j
    jump = eval_continued(hm, z) - np.conj(eval_interior(hm, np.conj(z)))
    assert abs(jump - 2j * math.pi * phi_maxwell(np.array(z))) <= 1e-10


def test_continued_faddeeva_oracle(hm):
    # w(-z) is entire, so the oracle continues analytically above the axis
    z = np.array([0.4 + 0.2j, -1.5 + 0.05j, 2.0 + 0.5j])
    assert np.allclose(hm.continued(z), faddeeva_oracle(z), rtol=1e-9, atol=1e-11)


def test_continued_imag_limit_at_zero(hm, maxwell):
    vals = [eval_continued(hm, 1j * eps).imag for eps in (1e-3, 1e-5, 1e-7)]
    target = math.pi * float(maxwell.phi(0.0))
    assert abs(vals[-1] - target) < abs(vals[0] - target)
    assert vals[-1] == pytest.approx(target, rel=1e-6)


def test_continued_requires_analytic(hc):
    with pytest.raises(UnsupportedModeError):
        eval_continued(hc, 0.5 + 0.1j)


def test_continued_polynomial_extension_is_opt_in(compact):
    h = HilbertEvaluator(compact, polynomial_extension=True)
    z = 0.5 + 0.1j
    jump = h.continued(z) - np.conj(h.interior(np.conj(z)))
    assert abs(jump - 2j * math.pi * (math.pi / 3) * (1 - z * z) ** 3) <= 1e-10


# -- derivatives -----------------------------------------------------------------


def test_derivative_order_zero(hm):
    assert eval_derivative(hm, -1j, 0) == eval_interior(hm, -1j)
    assert eval_derivative(hm, 0.4 + 0j, 0) == eval_boundary(hm, 0.4)


@pytest.mark.parametrize("z,n,tol", [(-1j, 1, 1e-6), (-2j, 2, 1e-5), (0.3 - 0.7j, 3, 1e-4)])
def test_derivative_finite_difference(hm, z, n, tol):
    h = 1e-5 if n < 3 else 1e-3

    def f(x):
        return eval_derivative(hm, x, n - 1)

    fd = (f(z + h) - f(z - h)) / (2 * h)
    assert abs(eval_derivative(hm, z, n) - fd) <= tol * max(1.0, abs(fd))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_boundary_derivative_finite_difference(hc, n):
    tau, h = 0.4, 1e-4
    fd = (hc.boundary(tau + h, n - 1) - hc.boundary(tau - h, n - 1)) / (2 * h)
    assert abs(hc.boundary(tau, n) - fd) <= 1e-5 * max(1.0, abs(fd))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_uniform_bound_stable_under_refinement(hm, n):
    # (1-u^2)^3 is C^2 with a jump in its third derivative, so the third
    # derivative of H is only bounded for a smoother compact profile.
    from plasmon_lab import equilibria as eq

    smooth = HilbertEvaluator(eq.build_marginal(eq.compact_poly(4, 1.0, 3)))
    for h in (hm, smooth):
        sups = []
        for npts in (41, 81, 161):
            tau = np.linspace(-3, 3, npts)
            eta = np.concatenate([[0.0], np.geomspace(1e-4, 2, npts // 4)])
            z = (tau[:, None] - 1j * eta[None, :]).ravel()
            sups.append(np.max(np.abs(h(z, n))))
        assert np.all(np.isfinite(sups))
        assert sups[-1] <= 1.1 * sups[0]


def test_third_derivative_reflects_limited_regularity(hc):
    # log growth toward the edge where the third derivative of phi jumps
    vals = [abs(hc.boundary(1.0 - eps, 3)) for eps in (1e-2, 1e-4, 1e-6)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] - vals[1] == pytest.approx(vals[1] - vals[0], rel=0.2)


def test_dump_csv(hm, tmp_path):
    path = tmp_path / "h.csv"
    hm.dump_csv(np.array([0.0, 0.5]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tau,ReH,ImH"
    assert len(lines) == 3
