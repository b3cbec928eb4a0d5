"""Bessel distributional layer vs independent oracles.

The density of A_1 is checked against normalization, its theta-function dual
(delta = 2), and high-precision direct summation; the kernel series k/dk/db
against adaptive quadrature of the defining integral and finite differences;
the joint density g_t against its gamma marginal and 2-D quadrature of the
joint Laplace transform.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mimicvol.bessel import (
    BesselSpec,
    CirSpec,
    G_VALIDATED_BOX,
    cir_bessel_map,
    cir_g_prime,
    density_a1,
    joint_density_g,
    joint_density_g_grid,
    k_pair,
    laplace_joint,
    scale_k,
)
from mimicvol.bessel import _density_a1_grid
from mimicvol.errors import ConvergenceError, DomainError
from mimicvol.specfun import DEFAULT_CONFIG, SpecFunConfig

# Sum of the delta = 2 theta series pi * sum (-1)^n (n+1/2) exp(-(n+1/2)^2 pi^2 x / 2)
# at x = 1, truncated below 1e-10 (converges in four terms).
F2_AT_1 = 0.4573652256339200

TIGHT = SpecFunConfig(abs_tol=1e-15, max_terms=400)


def gamma_marginal(delta: float, t: float, x: float) -> float:
    """Density of R_t^2 for a BESQ_delta started at 0: Gamma(delta/2, scale 2t)."""
    h = 0.5 * delta
    return x ** (h - 1.0) * math.exp(-x / (2.0 * t)) / ((2.0 * t) ** h * math.gamma(h))


class TestDensityA1:
    @pytest.mark.parametrize("delta", [1.0, 2.0, 3.0, 4.0])
    def test_normalization(self, delta):
        total, err = quad(
            lambda x: _density_a1_grid(delta, np.array([x]))[0], 0.0, 40.0, limit=200
        )
        assert abs(total - 1.0) < 1e-6

    def test_frozen_value_delta2(self):
        assert density_a1(2.0, 1.0).value == pytest.approx(F2_AT_1, abs=1e-9)

    def test_delta2_symmetry(self):
        # f_2(x) = (2/(pi x))^{3/2} f_2(4/(pi^2 x))
        for x in np.linspace(0.3, 3.0, 10):
            lhs = density_a1(2.0, x).value
            rhs = (2.0 / (math.pi * x)) ** 1.5 * density_a1(2.0, 4.0 / (math.pi**2 * x)).value
            assert abs(lhs - rhs) < 1e-9

    def test_truncation_bound_within_tolerance(self):
        ev = density_a1(3.0, 2.0)
        assert ev.truncation_bound <= DEFAULT_CONFIG.abs_tol
        assert ev.terms_used >= 5

    @pytest.mark.parametrize("delta,x", [(1.0, 0.8), (2.0, 0.5), (3.0, 4.0), (4.0, 12.0)])
    def test_truncation_bound_dominates_remainder(self, delta, x):
        coarse = density_a1(delta, x)
        fine = density_a1(delta, x, TIGHT)
        assert abs(fine.value - coarse.value) <= coarse.truncation_bound + 1e-15

    @given(
        delta=st.floats(min_value=0.5, max_value=6.0),
        x=st.floats(min_value=0.05, max_value=20.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_and_bounded_truncation(self, delta, x):
        ev = density_a1(delta, x)
        assert ev.value >= 0.0
        assert ev.truncation_bound <= DEFAULT_CONFIG.abs_tol

    def test_convergence_failure_far_tail(self):
        with pytest.raises(ConvergenceError):
            density_a1(3.0, 1e5)

    def test_domain(self):
        with pytest.raises(DomainError):
            density_a1(2.0, 0.0)
        with pytest.raises(DomainError):
            density_a1(0.0, 1.0)
        with pytest.raises(DomainError):
            density_a1(-1.0, 1.0)


class TestLaplaceJoint:
    def test_frozen_cosh(self):
        val = laplace_joint(BesselSpec(2.0, 0.0), 0.0, 1.0, 1.0)
        assert val == pytest.approx(1.0 / math.cosh(1.0), rel=1e-12)

    def test_zero_exponents(self):
        for spec in (BesselSpec(2.0, 0.0), BesselSpec(5.0, 2.0)):
            for t in (0.25, 1.0, 7.0):
                assert laplace_joint(spec, 0.0, 0.0, t) == 1.0

    def test_b_zero_limit(self):
        val = laplace_joint(BesselSpec(3.0, 1.0), 0.5, 0.0, 2.0)
        assert val == pytest.approx(3.0**-1.5 * math.exp(-1.0 / 6.0), rel=1e-12)

    def test_b_zero_continuity(self):
        at_zero = laplace_joint(BesselSpec(3.0, 1.0), 0.5, 0.0, 2.0)
        near_zero = laplace_joint(BesselSpec(3.0, 1.0), 0.5, 1e-8, 2.0)
        assert abs(at_zero - near_zero) < 1e-7

    def test_large_bt_does_not_overflow(self):
        val = laplace_joint(BesselSpec(2.0, 1.0), 0.3, 50.0, 10.0)
        assert 0.0 <= val < 1e-200

    @pytest.mark.parametrize("delta", [1.0, 2.0, 3.0])
    @pytest.mark.parametrize("b,t", [(0.5, 1.0), (1.0, 0.5), (1.0, 2.0)])
    def test_remark_identity_by_differentiation(self, delta, b, t):
        # -d/da E[exp(-a R_t^2 - b^2 A_t / 2)] at a = 0 equals
        # E[R_t^2 exp(-b^2 A_t / 2)] = delta sinh(bt) / (b cosh(bt)^{delta/2+1});
        # one-sided second-order difference respects the a >= 0 domain.
        spec = BesselSpec(delta, 0.0)
        eps = 1e-5
        f0 = laplace_joint(spec, 0.0, b, t)
        f1 = laplace_joint(spec, eps, b, t)
        f2 = laplace_joint(spec, 2.0 * eps, b, t)
        fd = -(-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * eps)
        closed = delta * math.sinh(b * t) / (b * math.cosh(b * t) ** (0.5 * delta + 1.0))
        assert fd == pytest.approx(closed, rel=1e-6)

    @given(
        a=st.floats(min_value=0.0, max_value=5.0),
        b=st.floats(min_value=0.0, max_value=5.0),
        t=st.floats(min_value=0.1, max_value=5.0),
        delta=st.floats(min_value=0.5, max_value=6.0),
        start=st.floats(min_value=0.0, max_value=2.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_is_a_probability_weight(self, a, b, t, delta, start):
        val = laplace_joint(BesselSpec(delta, start), a, b, t)
        assert 0.0 <= val <= 1.0

    def test_monotone_in_exponents(self):
        spec = BesselSpec(2.0, 1.0)
        vals_a = [laplace_joint(spec, a, 0.5, 1.0) for a in (0.0, 0.5, 1.0, 2.0)]
        vals_b = [laplace_joint(spec, 0.5, b, 1.0) for b in (0.0, 0.5, 1.0, 2.0)]
        assert all(x > y for x, y in zip(vals_a, vals_a[1:]))
        assert all(x > y for x, y in zip(vals_b, vals_b[1:]))

    def test_domain(self):
        with pytest.raises(DomainError):
            laplace_joint(BesselSpec(2.0), -0.1, 1.0, 1.0)
        with pytest.raises(DomainError):
            laplace_joint(BesselSpec(2.0), 0.1, -1.0, 1.0)
        with pytest.raises(DomainError):
            laplace_joint(BesselSpec(2.0), 0.1, 1.0, 0.0)


class TestKPair:
    def test_against_density_quadrature(self):
        delta, a, b = 2.0, 0.5, 0.125
        ev, _ = k_pair(delta, a, b)
        oracle, _ = quad(
            lambda x: _density_a1_grid(delta, np.array([x]))[0]
            / math.sqrt(x)
            * math.exp(-a / x - b * x),
            0.0,
            60.0,
            limit=200,
        )
        assert ev.value == pytest.approx(oracle, rel=1e-6)

    def test_derivative_against_finite_difference(self):
        delta, a, b = 3.0, 1.0, 0.2
        _, ev_db = k_pair(delta, a, b)
        step = 1e-5
        fd = (k_pair(delta, a, b + step)[0].value - k_pair(delta, a, b - step)[0].value) / (
            2.0 * step
        )
        assert ev_db.value == pytest.approx(fd, rel=1e-4)

    def test_monotone_in_a(self):
        vals = [k_pair(2.0, a, 0.125)[0].value for a in (0.0, 0.5, 1.0, 2.0)]
        assert all(x > y for x, y in zip(vals, vals[1:]))

    @pytest.mark.parametrize("delta", [1.0, 2.0, 3.0])
    @pytest.mark.parametrize("a", [0.0, 0.5, 2.0])
    @pytest.mark.parametrize("b", [0.05, 0.2, 1.0])
    def test_derivative_strictly_negative(self, delta, a, b):
        _, ev_db = k_pair(delta, a, b)
        assert ev_db.value < 0.0

    @pytest.mark.parametrize("delta,a,b", [(2.0, 0.5, 0.125), (1.0, 0.0, 0.3), (3.0, 2.0, 0.05)])
    def test_truncation_bound_dominates_remainder(self, delta, a, b):
        coarse, coarse_db = k_pair(delta, a, b)
        fine, fine_db = k_pair(delta, a, b, TIGHT)
        assert abs(fine.value - coarse.value) <= coarse.truncation_bound + 1e-15
        assert abs(fine_db.value - coarse_db.value) <= coarse_db.truncation_bound + 1e-15

    def test_convergence_failure_small_b(self):
        with pytest.raises(ConvergenceError):
            k_pair(2.0, 0.5, 1e-4)

    def test_domain(self):
        with pytest.raises(DomainError):
            k_pair(2.0, 0.5, 0.0)
        with pytest.raises(DomainError):
            k_pair(2.0, -0.5, 0.1)
        with pytest.raises(DomainError):
            k_pair(0.0, 0.5, 0.1)


class TestScaleK:
    def test_identity_at_unit_time(self):
        assert scale_k(2.0, 1.0, 0.3, 0.2) == k_pair(2.0, 0.3, 0.2)[0].value

    def test_explicit_rescaling(self):
        lhs = scale_k(2.0, 2.0, 1.0, 0.1)
        rhs = 0.5 * k_pair(2.0, 0.25, 0.4)[0].value
        assert lhs == pytest.approx(rhs, rel=1e-14)

    @given(
        t=st.floats(min_value=0.3, max_value=3.0),
        a=st.floats(min_value=0.0, max_value=2.0),
        b=st.floats(min_value=0.05, max_value=1.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_scaling_consistency(self, t, a, b):
        lhs = scale_k(2.0, t, a, b)
        rhs = k_pair(2.0, a / t**2, b * t**2)[0].value / t
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            scale_k(2.0, 0.0, 0.3, 0.2)


class TestJointDensityG:
    @pytest.mark.parametrize(
        "delta,t,x",
        [(2.0, 1.0, 0.5), (2.0, 1.0, 1.0), (2.0, 1.0, 2.0), (1.0, 0.5, 0.3), (3.0, 2.0, 2.0)],
    )
    def test_gamma_marginal(self, delta, t, x):
        y_max = G_VALIDATED_BOX["y_over_t2"] * t * t
        nodes, weights = np.polynomial.legendre.leggauss(200)
        y = 0.5 * y_max * (nodes + 1.0)
        vals = joint_density_g_grid(delta, t, np.full_like(y, x), y)
        integral = 0.5 * y_max * float(np.dot(weights, vals))
        assert integral == pytest.approx(gamma_marginal(delta, t, x), abs=1e-4)

    def test_joint_laplace(self):
        delta, t, a, b = 2.0, 1.0, 0.5, 1.0
        x_max = G_VALIDATED_BOX["x_over_t"] * t
        y_max = G_VALIDATED_BOX["y_over_t2"] * t * t
        gx, wx = np.polynomial.legendre.leggauss(80)
        x = 0.5 * x_max * (gx + 1.0)
        y = 0.5 * y_max * (gx + 1.0)
        X, Y = np.meshgrid(x, y, indexing="ij")
        G = joint_density_g_grid(delta, t, X, Y)
        weights = np.exp(-a * X - 0.5 * b * b * Y)
        integral = (0.25 * x_max * y_max) * float(np.einsum("i,j,ij->", wx, wx, G * weights))
        oracle = laplace_joint(BesselSpec(delta, 0.0), a, b, t)
        assert integral == pytest.approx(oracle, abs=1e-3)

    def test_nonnegative_on_box_grid(self):
        t = 1.0
        xg = np.linspace(0.05, 0.95 * G_VALIDATED_BOX["x_over_t"], 20)
        yg = np.linspace(0.01, 0.95 * G_VALIDATED_BOX["y_over_t2"], 20)
        X, Y = np.meshgrid(xg, yg, indexing="ij")
        assert np.all(joint_density_g_grid(2.0, t, X, Y) >= 0.0)

    def test_time_scaling_delegation(self):
        # g_t(x, y) = t^{-3} g_1(x / t, y / t^2) exactly, by construction
        lhs = joint_density_g(2.0, 2.0, 1.5, 2.0).value
        rhs = joint_density_g(2.0, 1.0, 0.75, 0.5).value / 8.0
        assert lhs == pytest.approx(rhs, rel=1e-14)

    def test_truncation_diagnostics(self):
        for t in (0.5, 1.0):
            ev = joint_density_g(2.0, t, 0.5 * t, 0.4 * t * t)
            assert ev.truncation_bound <= DEFAULT_CONFIG.abs_tol
            assert ev.terms_used >= 5

    def test_box_and_domain_errors(self):
        with pytest.raises(DomainError):
            joint_density_g(2.0, 1.0, 19.0, 1.0)  # x/t beyond box
        with pytest.raises(DomainError):
            joint_density_g(2.0, 1.0, 1.0, 13.0)  # y/t^2 beyond box
        with pytest.raises(DomainError):
            joint_density_g(0.3, 1.0, 1.0, 1.0)  # dimension below validated range
        with pytest.raises(DomainError):
            joint_density_g(9.0, 1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            joint_density_g(2.0, 1.0, -1.0, 1.0)


class TestCirBesselMap:
    def test_dimension_example(self):
        _, _, spec = cir_bessel_map(CirSpec(kappa=2.0, theta=0.04, eta=0.4, v0=0.0))
        assert spec.delta == pytest.approx(2.0, rel=1e-12)
        assert spec.start == 0.0

    @pytest.mark.parametrize(
        "cir",
        [
            CirSpec(kappa=2.0, theta=0.04, eta=0.4, v0=0.0),
            CirSpec(kappa=0.8, theta=0.09, eta=0.3, v0=0.04),
        ],
    )
    def test_mean_identity(self, cir):
        # f(t) (v0 + delta g(t)) must reproduce the CIR mean theta + (v0-theta)e^{-kappa t}
        f, g, spec = cir_bessel_map(cir)
        for t in (0.5, 1.0, 2.0):
            lhs = float(f(t)) * (cir.v0 + spec.delta * float(g(t)))
            rhs = cir.theta + (cir.v0 - cir.theta) * math.exp(-cir.kappa * t)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_initial_conditions_and_monotone_clock(self):
        f, g, _ = cir_bessel_map(CirSpec(kappa=2.0, theta=0.04, eta=0.4))
        assert float(g(0.0)) == 0.0
        assert float(f(0.0)) == 1.0
        grid = np.linspace(0.0, 3.0, 50)
        assert np.all(np.diff(g(grid)) > 0.0)

    def test_clock_derivative(self):
        cir = CirSpec(kappa=2.0, theta=0.04, eta=0.4)
        g_prime = cir_g_prime(cir)
        assert float(g_prime(1.0)) == pytest.approx(0.04 * math.e**2, rel=1e-12)
        _, g, _ = cir_bessel_map(cir)
        step = 1e-6
        fd = (float(g(1.0 + step)) - float(g(1.0 - step))) / (2.0 * step)
        assert float(g_prime(1.0)) == pytest.approx(fd, rel=1e-8)

    def test_small_kappa_limit(self):
        cir = CirSpec(kappa=1e-12, theta=0.04, eta=0.4, v0=0.04)
        _, g, _ = cir_bessel_map(cir)
        assert float(g(2.0)) == pytest.approx(0.4**2 * 2.0 / 4.0, rel=1e-9)

    def test_degenerate_kappa_rejected(self):
        with pytest.raises(DomainError):
            cir_bessel_map(CirSpec(kappa=0.0, theta=0.04, eta=0.4))
        with pytest.raises(DomainError):
            cir_bessel_map(CirSpec(kappa=-0.5, theta=0.04, eta=0.4))

    def test_invalid_parameters(self):
        with pytest.raises(DomainError):
            CirSpec(kappa=1.0, theta=0.0, eta=0.4)
        with pytest.raises(DomainError):
            CirSpec(kappa=1.0, theta=0.04, eta=0.0)
        with pytest.raises(DomainError):
            CirSpec(kappa=1.0, theta=0.04, eta=0.4, v0=-0.1)
