"""Tests for the analytic local-volatility module."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad as scipy_quad
from scipy.interpolate import CubicSpline

from mimicvol.bessel import BesselSpec, CirSpec, density_a1, scale_k
from mimicvol.errors import DomainError, UnsupportedBranchError
from mimicvol.localvol import (
    AlphaResult,
    LocalVolPoint,
    TransformSpec,
    alpha_fn,
    build_surface,
    heston_transform,
    local_var_corr,
    local_var_transformed,
    local_var_zero_corr,
    write_localvol_csv,
)
from mimicvol.montecarlo import MCConfig, kernel_conditional, simulate_besq

HESTON = CirSpec(kappa=2.0, eta=0.4, theta=0.04, v0=0.0)
HESTON_G1 = 0.1277811219786130  # (eta^2/4kappa) (e^kappa - 1) at t = 1
HESTON_GP1 = 0.2955622439572260  # (eta^2/4) e^kappa at t = 1


def sigma2_by_quadrature(delta, t, l):
    """Independent oracle: the conditional ratio by adaptive quadrature.

    sigma^2(t, e^l) = 2t E[sqrt(Y) w(Y)] / E[w(Y)/sqrt(Y)] for Y the unit-time
    integrated variance and w(y) = exp(-l^2/(2t^2 y) - t^2 y / 8).
    """
    a_arg = l * l / (2.0 * t * t)
    b_arg = t * t / 8.0

    def moment(p):
        val, _ = scipy_quad(
            lambda y: y**p * math.exp(-a_arg / y - b_arg * y) * density_a1(delta, y).value,
            1e-9,
            25.0,
            limit=200,
        )
        return val

    return 2.0 * t * moment(0.5) / moment(-0.5)


class TestTransformSpec:
    def test_accepts_heston_map(self):
        tr = heston_transform(HESTON)
        assert tr.spec.delta == pytest.approx(2.0)
        assert tr.spec.start == 0.0

    def test_rejects_nonpositive_s0(self):
        with pytest.raises(DomainError, match="s0"):
            TransformSpec(f=lambda t: 1.0, g=lambda t: t, spec=BesselSpec(delta=2.0), s0=0.0)

    def test_rejects_sign_changing_f(self):
        with pytest.raises(DomainError, match="f must be positive"):
            TransformSpec(f=lambda t: 1.0 - t, g=lambda t: t, spec=BesselSpec(delta=2.0))

    def test_rejects_non_increasing_g(self):
        with pytest.raises(DomainError, match="increasing"):
            TransformSpec(f=lambda t: 1.0, g=lambda t: 1.0, spec=BesselSpec(delta=2.0))


class TestLocalVolPoint:
    def test_rejects_bad_fields(self):
        good = {"t": 1.0, "x": 1.0, "sigma2": 0.04, "method": "series", "err": 0.0}
        for key, bad in (
            ("t", 0.0),
            ("x", -1.0),
            ("sigma2", -1e-12),
            ("method", "magic"),
            ("err", -1.0),
        ):
            with pytest.raises(DomainError):
                LocalVolPoint(**{**good, key: bad})


class TestZeroCorr:
    def test_even_in_log_moneyness_exact(self):
        up = local_var_zero_corr(2.0, 1.0, 0.3)
        down = local_var_zero_corr(2.0, 1.0, -0.3)
        assert up.sigma2 == down.sigma2

    def test_series_against_quadrature_oracle(self):
        for delta, t, l in ((2.0, 1.0, 0.0), (2.0, 0.5, 0.3), (1.0, 1.0, -0.2), (4.0, 0.8, 0.4)):
            point = local_var_zero_corr(delta, t, l)
            assert point.method == "series"
            oracle = sigma2_by_quadrature(delta, t, l)
            assert point.sigma2 == pytest.approx(oracle, rel=1e-8)

    def test_short_maturity_quadrature_route(self):
        point = local_var_zero_corr(2.0, 0.15, 0.1)
        assert point.method == "quad"
        assert point.sigma2 == pytest.approx(sigma2_by_quadrature(2.0, 0.15, 0.1), rel=1e-8)

    def test_series_diagnostics_attached(self):
        point = local_var_zero_corr(2.0, 1.0, 0.2)
        ev_k, ev_db = point.diagnostics
        assert ev_k.value > 0.0 and ev_db.value < 0.0
        assert point.err < 1e-9

    def test_matches_kernel_regression_at_the_money(self, besq2_1m):
        bundle = besq2_1m[1.0]
        est = kernel_conditional(
            bundle.terminal_log_stock, bundle.terminal_variance, 0.0, besq2_1m["cfg"]
        )
        point = local_var_zero_corr(2.0, 1.0, 0.0)
        assert abs(point.sigma2 - est.value) < 3.0 * est.std_error

    def test_tower_property_recovers_mean_variance(self, besq2_1m):
        # E[sigma^2(t, ln S_t)] = E[R_t^2] = delta t; the smooth curve is
        # splined over the sample range so 1e6 evaluations stay cheap.
        for t in (0.5, 1.0):
            ln_s = besq2_1m[t].terminal_log_stock
            grid = np.linspace(ln_s.min(), ln_s.max(), 241)
            curve = CubicSpline(
                grid, [local_var_zero_corr(2.0, t, l).sigma2 for l in grid]
            )
            sampled = curve(ln_s)
            se = sampled.std(ddof=1) / math.sqrt(sampled.size)
            assert abs(sampled.mean() - 2.0 * t) < 3.0 * se

    @given(
        delta=st.floats(min_value=0.6, max_value=5.0),
        t=st.floats(min_value=0.3, max_value=2.0),
        l=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_even_positive_and_bounded_error(self, delta, t, l):
        up = local_var_zero_corr(delta, t, l)
        down = local_var_zero_corr(delta, t, -l)
        assert up.sigma2 == down.sigma2
        assert up.sigma2 > 0.0
        assert math.isfinite(up.err)

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError, match="delta"):
            local_var_zero_corr(0.0, 1.0, 0.0)
        with pytest.raises(DomainError, match="t"):
            local_var_zero_corr(2.0, 0.0, 0.0)


class TestAlphaFn:
    def test_c_zero_reduces_to_scaled_transform(self):
        res = alpha_fn(2.0, 1.0, 0.5, 0.4, 0.0)
        assert res.method == "quad"
        assert res.value == pytest.approx(scale_k(2.0, 1.0, 0.25, 0.16), rel=1e-5)

    def test_db_matches_central_difference(self):
        h = 1e-5
        res = alpha_fn(2.0, 1.0, 0.3, 0.3, 0.1)
        up = alpha_fn(2.0, 1.0, 0.3, 0.3 + h, 0.1)
        down = alpha_fn(2.0, 1.0, 0.3, 0.3 - h, 0.1)
        fd = (up.value - down.value) / (2.0 * h)
        assert res.method == "quad"
        assert res.db == pytest.approx(fd, rel=1e-3)

    def test_value_against_direct_monte_carlo(self):
        delta, t, a, b, c = 2.0, 1.0, 0.3, 0.3, 0.2
        res = alpha_fn(delta, t, a, b, c)
        bundle = simulate_besq(
            BesselSpec(delta=delta), [t], MCConfig(paths=400_000, steps=200, seed=107)
        )[0]
        z = bundle.terminal_variance
        av = bundle.integrated_variance
        w = np.exp(-((a - c * z) ** 2) / av - b * b * av - b * c * z) / np.sqrt(av)
        se = w.std(ddof=1) / math.sqrt(w.size)
        assert abs(res.value - w.mean()) < 3.0 * se

    def test_large_delta_falls_back_to_monte_carlo(self):
        cfg = MCConfig(paths=50_000, steps=200, seed=109)
        res = alpha_fn(8.0, 1.0, 0.3, 0.3, 0.2, mc_config=cfg)
        assert res.method == "mc"
        assert res.err > 0.0
        repeat = alpha_fn(8.0, 1.0, 0.3, 0.3, 0.2, mc_config=cfg)
        assert repeat.value == res.value

    def test_rejects_nonpositive_b(self):
        with pytest.raises(DomainError, match="b"):
            alpha_fn(2.0, 1.0, 0.3, 0.0, 0.1)


class TestCorr:
    def test_zero_rho_reduces_to_zero_corr(self):
        for delta in (1.0, 2.0, 3.0):
            for t in (0.5, 1.0, 1.5):
                for l in (-0.3, 0.0, 0.3):
                    corr = local_var_corr(delta, 0.0, t, l)
                    zero = local_var_zero_corr(delta, t, l)
                    assert abs(corr.sigma2 - zero.sigma2) <= 1e-8 * zero.sigma2

    def test_rejects_rho_outside_open_interval(self):
        for rho in (-1.0, 1.0, -1.5, 1.5):
            with pytest.raises(DomainError, match="rho"):
                local_var_corr(2.0, rho, 1.0, 0.0)

    def test_matches_kernel_regression(self, corr_bundle):
        bundle = corr_bundle["bundle"]
        for l in (-0.3, 0.0, 0.2):
            est = kernel_conditional(
                bundle.terminal_log_stock, bundle.terminal_variance, l, corr_bundle["cfg"]
            )
            point = local_var_corr(2.0, -0.5, 1.0, l)
            assert point.method == "quad"
            assert abs(point.sigma2 - est.value) < 3.0 * est.std_error

    def test_negative_rho_skews_variance_downward(self, corr_bundle):
        bundle = corr_bundle["bundle"]
        down = local_var_corr(2.0, -0.5, 1.0, -0.3)
        up = local_var_corr(2.0, -0.5, 1.0, 0.3)
        assert down.sigma2 > up.sigma2
        mc_down = kernel_conditional(
            bundle.terminal_log_stock, bundle.terminal_variance, -0.3, corr_bundle["cfg"]
        )
        mc_up = kernel_conditional(
            bundle.terminal_log_stock, bundle.terminal_variance, 0.3, corr_bundle["cfg"]
        )
        assert mc_down.value > mc_up.value

    def test_tower_property_recovers_mean_variance(self, corr_bundle):
        ln_s = corr_bundle["bundle"].terminal_log_stock
        grid = np.linspace(ln_s.min(), ln_s.max(), 201)
        curve = CubicSpline(grid, [local_var_corr(2.0, -0.5, 1.0, l).sigma2 for l in grid])
        sampled = curve(ln_s)
        se = sampled.std(ddof=1) / math.sqrt(sampled.size)
        assert abs(sampled.mean() - 2.0) < 3.0 * se

    def test_monte_carlo_fallback_is_deterministic(self):
        cfg = MCConfig(paths=50_000, steps=200, seed=111)
        first = local_var_corr(6.0, -0.5, 1.0, 0.0, mc_config=cfg)
        second = local_var_corr(6.0, -0.5, 1.0, 0.0, mc_config=cfg)
        assert first.method == "mc"
        assert first.err > 0.0
        assert first.sigma2 == second.sigma2


class TestTransformed:
    def test_identity_transform_matches_zero_corr(self):
        identity = TransformSpec(f=lambda s: 1.0, g=lambda s: s, spec=BesselSpec(delta=2.0))
        moved = local_var_transformed(identity, 0.0, 1.0, 1.2)
        direct = local_var_zero_corr(2.0, 1.0, math.log(1.2))
        assert moved.sigma2 == pytest.approx(direct.sigma2, rel=1e-9)

    def test_heston_clock_constants(self):
        tr = heston_transform(HESTON)
        assert tr.g(1.0) == pytest.approx(HESTON_G1, abs=1e-15)

    def test_heston_surface_is_clock_rescaling(self):
        tr = heston_transform(HESTON)
        for x in (0.9, 1.0, 1.15):
            moved = local_var_transformed(tr, 0.0, 1.0, x)
            inner = local_var_zero_corr(2.0, HESTON_G1, math.log(x))
            assert moved.sigma2 == pytest.approx(HESTON_GP1 * inner.sigma2, rel=1e-8)

    def test_heston_matches_kernel_regression(self, heston_bundle):
        # The bundle's variance state is the CIR V_t; the instantaneous stock
        # variance of the time-changed model is (g'(t)/f(t)) V_t.
        bundle = heston_bundle["bundle"]
        ratio = HESTON_GP1 / math.exp(-HESTON.kappa)
        est = kernel_conditional(
            bundle.terminal_log_stock,
            ratio * bundle.terminal_variance,
            0.0,
            heston_bundle["cfg"],
        )
        point = local_var_transformed(heston_transform(HESTON), 0.0, 1.0, 1.0)
        assert abs(point.sigma2 - est.value) < 3.0 * est.std_error

    def test_tower_property_on_calendar_clock(self, heston_bundle):
        # E[sigma~^2(t, S~_t)] = g'(t) delta g(t) for a clock started at zero.
        tr = heston_transform(HESTON)
        ln_s = heston_bundle["bundle"].terminal_log_stock
        grid = np.linspace(ln_s.min(), ln_s.max(), 201)
        curve = CubicSpline(
            grid, [local_var_transformed(tr, 0.0, 1.0, math.exp(l)).sigma2 for l in grid]
        )
        sampled = curve(ln_s)
        se = sampled.std(ddof=1) / math.sqrt(sampled.size)
        assert abs(sampled.mean() - HESTON_GP1 * 2.0 * HESTON_G1) < 3.0 * se

    def test_started_clock_is_refused(self):
        started = TransformSpec(
            f=lambda s: 1.0, g=lambda s: s, spec=BesselSpec(delta=2.0, start=1.0)
        )
        with pytest.raises(UnsupportedBranchError, match="started"):
            local_var_transformed(started, 0.0, 1.0, 1.0)


class TestSurfaceAndCsv:
    def test_surface_shape_and_point_order(self):
        t_nodes = np.array([0.5, 1.0])
        x_nodes = np.array([0.8, 1.0, 1.25])
        surface, points = build_surface(t_nodes, x_nodes, delta=2.0)
        assert surface.sigma2.shape == (2, 3)
        assert [p.t for p in points[:3]] == [0.5, 0.5, 0.5]
        assert points[4].sigma2 == surface.sigma2[1, 1]
        assert all(p.sigma2 > 0.0 for p in points)

    def test_rebuild_is_bit_identical(self):
        t_nodes = np.array([0.4, 0.9])
        x_nodes = np.array([0.9, 1.1])
        first, _ = build_surface(t_nodes, x_nodes, delta=2.0, rho=-0.5)
        second, _ = build_surface(t_nodes, x_nodes, delta=2.0, rho=-0.5)
        assert np.array_equal(first.sigma2, second.sigma2)

    def test_requires_exactly_one_model(self):
        nodes = np.array([0.5, 1.0])
        with pytest.raises(DomainError, match="exactly one"):
            build_surface(nodes, nodes)
        with pytest.raises(DomainError, match="exactly one"):
            build_surface(
                nodes, nodes, delta=2.0, transform=heston_transform(HESTON)
            )

    def test_csv_round_trip_fields(self, tmp_path):
        _, points = build_surface(np.array([0.5]), np.array([1.0, 1.2]), delta=2.0)
        path = tmp_path / "surface.csv"
        write_localvol_csv(points, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,sigma2,method,err"
        assert len(lines) == 3
        t, x, sigma2, method, err = lines[1].split(",")
        assert float(t) == 0.5 and float(x) == 1.0
        assert float(sigma2) == points[0].sigma2
        assert method == "series"
        assert float(err) == points[0].err
