"""Local volatility under stochastic interest rates (Vasicek short rate).

With a stochastic short rate the Dupire numerator picks up a covariance
term under the t-forward measure dQ^t/dQ = e^{-int_0^t r} / B(0,t)
(Jamshidian 1989; Geman, El Karoui and Rochet 1995):

    sigma^2(t, x) = [ dC/dt + x f(0,t) dC/dx
                      - x B(0,t) Cov^t(r_t; 1{S_t > x}) ]
                    / (x^2/2 d2C/dx2).

This module provides the pieces of that correction and the two mimicking
regressions that accompany it:

* RatesSpec / rates_descriptors: a Vasicek short rate mean-reverting to its
  own r0 (so E[r_t] = r0 for all t) or a deterministic curve, with
  closed-form B(0,t), f(0,t) and the HJM bond volatility
  sigma_B(t,T) = sigma_r (1 - e^{-a(T-t)}) / a.
* simulate_hybrid: joint paths of (stock, variance, r, int r); the rate
  block and its time integral are sampled from their exact Gaussian
  transition, jointly with the stock shocks.
* hybrid_cov: per-level Cov^t(r_t; 1{S_t > x}) slices from a path bundle,
  with delta-method standard errors.
* extended_dupire: finite-difference extraction with the covariance
  correction subtracted from the numerator.
* spot_mimic_var: the discount-weighted mimicking variance
  E[V_t e^{-int r} | S_t = x] / E[e^{-int r} | S_t = x].
* forward_sigma_T: the T-forward-measure regression
  E^T[V_t + 2 rho_rs sqrt(V_t) sigma_B + sigma_B^2 | F_t^T = x B(0,t)/B(0,T)]
  obtained by likelihood-ratio reweighting of risk-neutral paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .bessel import CirSpec
from .dupire import (
    LocalVolSurface,
    PriceSurface,
    _central_first,
    _central_second,
    sigma2_interpolator,
)
from .errors import ConfigError, DegenerateDensityError, DomainError, LowMassError
from .montecarlo import (
    CondEstimate,
    MCConfig,
    ModelSpec,
    PathBundle,
    _check_grid,
    _silverman_bandwidth,
    _substeps,
)

__all__ = [
    "RatesSpec",
    "HybridSlice",
    "rates_descriptors",
    "simulate_hybrid",
    "simulate_hybrid_grid",
    "hybrid_cov",
    "extended_dupire",
    "spot_mimic_var",
    "forward_sigma_T",
    "write_hybrid_csv",
]

_RATE_KINDS = ("deterministic", "vasicek")


# ---------------------------------------------------------------------------
# Rate model and analytic descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatesSpec:
    """Short-rate model for the hybrid dynamics.

    kind 'vasicek' is dr = a (r0 - r) dt + sigma_r dW^r started at r0, so
    the level is pinned at r0 (E[r_t] = r0 for all t) and the model has
    three parameters; a = 0 is the Brownian-rate limit.  kind
    'deterministic' uses the given curve r(t) (r0 if curve is None) and
    must have sigma_r = 0 and rho_rs = 0.  rho_rs is the correlation
    between the stock Brownian motion and W^r.
    """

    kind: str
    r0: float = 0.0
    a: float = 0.0
    sigma_r: float = 0.0
    rho_rs: float = 0.0
    curve: Callable[[float], float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _RATE_KINDS:
            raise ConfigError(f"unknown rates kind {self.kind!r}")
        if self.a < 0:
            raise ConfigError("mean-reversion speed a must be nonnegative")
        if self.sigma_r < 0:
            raise ConfigError("sigma_r must be nonnegative")
        if not -1.0 <= self.rho_rs <= 1.0:
            raise ConfigError("rho_rs must lie in [-1, 1]")
        if self.kind == "deterministic":
            if self.sigma_r != 0.0:
                raise ConfigError("deterministic rates require sigma_r = 0")
            if self.rho_rs != 0.0:
                raise ConfigError(
                    "deterministic rates have no shocks to correlate; rho_rs = 0"
                )
        elif self.curve is not None:
            raise ConfigError("vasicek kind takes no curve")


def _rate_curve(spec: RatesSpec) -> Callable[[float], float]:
    if spec.curve is not None:
        return spec.curve
    r0 = spec.r0
    return lambda _t: r0


def _b_factor(a: float, tau: float) -> float:
    """int_0^tau e^{-a u} du = (1 - e^{-a tau}) / a, stable near a = 0."""
    if a == 0.0:
        return tau
    return -math.expm1(-a * tau) / a


def _int_var_factor(a: float, tau: float) -> float:
    """Var(int_0^tau r) / sigma_r^2 for the OU rate, stable near a = 0.

    Equals (tau - 2 B_a(tau) + B_2a(tau)) / a^2 with B_c = (1 - e^{-c tau})/c;
    for a tau < 1e-3 the direct form cancels, so a series in (a tau) is used.
    """
    x = a * tau
    if x < 1e-3:
        return tau**3 * (1.0 / 3.0 - x / 4.0 + 7.0 * x * x / 60.0)
    b_a = _b_factor(a, tau)
    b_2a = _b_factor(2.0 * a, tau)
    return (tau - 2.0 * b_a + b_2a) / (a * a)


def _bm_int_factor(a: float, tau: float) -> float:
    """Cov(W^r_tau, int r shock) / sigma_r = (tau - B_a(tau)) / a."""
    x = a * tau
    if x < 1e-3:
        return tau * tau * (0.5 - x / 6.0 + x * x / 24.0)
    return (tau - _b_factor(a, tau)) / a


def rates_descriptors(spec: RatesSpec, t: float, T: float) -> tuple[float, float, float]:
    """(B(0,t), f(0,t), sigma_B(t,T)) for the given short-rate model.

    Vasicek closed forms: B(0,t) = exp(-r0 t + sigma_r^2 V(t)/2) with
    V(t) = Var(int_0^t r)/sigma_r^2, f(0,t) = r0 - sigma_r^2 B_a(t)^2 / 2,
    and sigma_B(t,T) = sigma_r (1 - e^{-a(T-t)}) / a.  Deterministic curves
    integrate by quadrature and have sigma_B = 0.
    """
    if not 0.0 <= t <= T:
        raise DomainError("need 0 <= t <= T")
    if spec.kind == "deterministic":
        curve = _rate_curve(spec)
        if t == 0.0:
            bond = 1.0
        else:
            val, _ = quad(curve, 0.0, t, limit=200)
            bond = math.exp(-val)
        return bond, float(curve(t)), 0.0
    b_a = _b_factor(spec.a, t)
    bond = math.exp(-spec.r0 * t + 0.5 * spec.sigma_r**2 * _int_var_factor(spec.a, t))
    fwd = spec.r0 - 0.5 * (spec.sigma_r * b_a) ** 2
    sigma_b = spec.sigma_r * _b_factor(spec.a, T - t)
    return bond, fwd, sigma_b


def _log_bond_ahead(spec: RatesSpec, t: float, T: float, r_t: np.ndarray) -> np.ndarray:
    """ln B(t,T) given the time-t short rate (affine Vasicek bond).

    ln B(t,T) = -r0 tau - (r_t - r0) B_a(tau) + sigma_r^2 V(tau)/2 with
    tau = T - t; the Vasicek transition is time homogeneous.  Deterministic
    curves give a constant -int_t^T r.
    """
    tau = T - t
    if spec.kind == "deterministic":
        if tau == 0.0:
            return np.zeros_like(r_t)
        val, _ = quad(_rate_curve(spec), t, T, limit=200)
        return np.full_like(r_t, -val)
    return (
        -spec.r0 * tau
        - (r_t - spec.r0) * _b_factor(spec.a, tau)
        + 0.5 * spec.sigma_r**2 * _int_var_factor(spec.a, tau)
    )


# ---------------------------------------------------------------------------
# Joint simulation of (stock, variance, r, int r)
# ---------------------------------------------------------------------------


def _rate_block_cholesky(spec: RatesSpec, h: float) -> tuple[float, float, float]:
    """Cholesky rows (l11, l21, l22) of Cov(W^r_h, int-r shock) per substep.

    Only the Brownian increment and the integral shock need drawing: the
    rate shock follows exactly from integrating the OU SDE,
    eps_r = sigma_r W^r_h - a eps_I.  The pair is Gaussian with
    Var(W) = h, Cov(W, I) = sigma_r (h - B_a(h))/a and
    Var(I) = sigma_r^2 V(h), all stable near a = 0.
    """
    a, s = spec.a, spec.sigma_r
    l11 = math.sqrt(h)
    l21 = s * _bm_int_factor(a, h) / l11
    l22 = math.sqrt(max(s * s * _int_var_factor(a, h) - l21 * l21, 0.0))
    return l11, l21, l22


def simulate_hybrid_grid(
    model: ModelSpec, t_grid: Sequence[float], cfg: MCConfig
) -> list[PathBundle]:
    """March the hybrid model over a maturity grid; one bundle per time.

    The stock follows d ln S = (int r over the substep, exact) - V/2 h
    + sqrt(V) dW with V from either a CirSpec variance (full-truncation
    Euler, stock-variance correlation model.rho) or a local-vol surface
    (model.rho must then be 0).  The rate triple (W^r, r, int r) is drawn
    from its exact Gaussian transition per substep, and the stock shock is
    assembled as rho zeta_V + rho_rs W^r + orthogonal remainder, which
    requires rho^2 + rho_rs^2 <= 1.

    Draw order per substep is fixed (zeta_V when a CirSpec is present, the
    two rate normals when sigma_r > 0, then the orthogonal stock normal),
    so a given (model, cfg) reproduces bit-identically.
    """
    if model.kind != "hybrid":
        raise ConfigError("simulate_hybrid requires a hybrid-kind ModelSpec")
    if model.drift is not None:
        raise ConfigError("hybrid kind takes its drift from rates, not drift")
    rates = model.rates
    sv = isinstance(model.spec, CirSpec)
    if sv and model.surface is not None:
        raise ConfigError("give either a CirSpec or a surface, not both")
    rho = model.rho
    if not sv and rho != 0.0:
        raise ConfigError("surface-driven hybrid has no vol factor; rho must be 0")
    stochastic_r = rates.kind == "vasicek" and rates.sigma_r > 0.0
    rho_rs = rates.rho_rs if stochastic_r else 0.0
    if rho * rho + rho_rs * rho_rs > 1.0 + 1e-12:
        raise ConfigError("need rho^2 + rho_rs^2 <= 1 for a valid correlation")
    grid = _check_grid(t_grid)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n = cfg.paths
    curve = _rate_curve(rates) if rates.kind == "deterministic" else None

    if sv:
        cir = model.spec
        v = np.full(n, cir.v0)
        sigma2_fn, counter = None, {"clamped": 0}
    else:
        sigma2_fn, counter = sigma2_interpolator(model.surface)
        v = None
    ln_x = np.full(n, math.log(model.s0))
    int_var = np.zeros(n)
    int_r = np.zeros(n)
    r = np.full(n, rates.r0 if curve is None else float(curve(0.0)))
    orth = math.sqrt(max(1.0 - rho * rho - rho_rs * rho_rs, 0.0))

    bundles = []
    t_prev = 0.0
    for t_snap in grid:
        m = _substeps(t_snap - t_prev, cfg.steps)
        h = (t_snap - t_prev) / m
        if stochastic_r:
            l11, l21, l22 = _rate_block_cholesky(rates, h)
            alpha = math.exp(-rates.a * h)
            b_a_h = _b_factor(rates.a, h)
        for k in range(m):
            t_k = t_prev + k * h
            if sv:
                v_pos = np.maximum(v, 0.0)
                s2 = v_pos
                zeta_v = rng.standard_normal(n)
            else:
                s2 = np.maximum(sigma2_fn(t_k, ln_x), 0.0)
            if stochastic_r:
                z1 = rng.standard_normal(n)
                z2 = rng.standard_normal(n)
                dwr = l11 * z1
                eps_i = l21 * z1 + l22 * z2
                eps_r = rates.sigma_r * dwr - rates.a * eps_i
                r_new = rates.r0 + (r - rates.r0) * alpha + eps_r
                dint = rates.r0 * h + (r - rates.r0) * b_a_h + eps_i
            else:
                if curve is None:
                    r_new = r
                    dint = np.full(n, rates.r0 * h)
                else:
                    t_next = t_k + h
                    r_new = np.full(n, float(curve(t_next)))
                    simpson = (h / 6.0) * (
                        float(curve(t_k))
                        + 4.0 * float(curve(t_k + 0.5 * h))
                        + float(curve(t_next))
                    )
                    dint = np.full(n, simpson)
            zp = rng.standard_normal(n)
            dw = rho_rs * dwr if stochastic_r else 0.0
            if sv:
                dw = dw + rho * math.sqrt(h) * zeta_v
            dw = dw + orth * math.sqrt(h) * zp
            ln_x += dint - 0.5 * s2 * h + np.sqrt(s2) * dw
            int_var += s2 * h
            int_r += dint
            if sv:
                v = v + cir.kappa * (cir.theta - v_pos) * h + cir.eta * np.sqrt(
                    v_pos * h
                ) * zeta_v
            r = r_new
        t_prev = float(t_snap)
        var_out = np.maximum(v, 0.0) if sv else np.maximum(
            sigma2_fn(t_prev, ln_x), 0.0
        )
        bundles.append(
            PathBundle(
                terminal_log_stock=ln_x.copy(),
                terminal_variance=var_out,
                integrated_variance=int_var.copy(),
                integrated_rate=int_r.copy(),
                terminal_rate=r.copy(),
                seed=cfg.seed,
                t=t_prev,
                clamp_count=counter["clamped"],
            )
        )
    return bundles


def simulate_hybrid(model: ModelSpec, t: float, cfg: MCConfig) -> PathBundle:
    """Terminal hybrid samples at a single time (see simulate_hybrid_grid)."""
    return simulate_hybrid_grid(model, [t], cfg)[0]


# ---------------------------------------------------------------------------
# Forward-measure covariance slices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HybridSlice:
    """Rate-indicator covariances at one maturity under the t-forward measure.

    cov[i] = Cov^t(r_t; 1{S_t > x_levels[i]}) with delta-method standard
    errors cov_se; bond and fwd_rate are the measured B(0,t) = E[e^{-int r}]
    and f(0,t) = E^t[r_t]; r_std is the Q^t standard deviation of r_t, which
    bounds |cov| by r_std / 2 (the indicator has variance at most 1/4).
    """

    t: float
    x_levels: np.ndarray
    cov: np.ndarray
    cov_se: np.ndarray
    bond: float
    fwd_rate: float
    r_std: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x_levels, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        se = np.asarray(self.cov_se, dtype=float)
        object.__setattr__(self, "x_levels", x)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "cov_se", se)
        if not self.t > 0:
            raise DomainError("t must be positive")
        if x.ndim != 1 or x.size == 0 or x[0] <= 0 or np.any(np.diff(x) <= 0):
            raise DomainError("x_levels must be increasing and positive")
        if cov.shape != x.shape or se.shape != x.shape:
            raise DomainError("cov and cov_se must match x_levels in length")
        if np.any(se < 0):
            raise DomainError("cov_se must be nonnegative")
        if not self.bond > 0:
            raise DomainError("bond must be positive")
        if self.r_std < 0:
            raise DomainError("r_std must be nonnegative")
        bound = 0.5 * self.r_std * (1.0 + 1e-12) + 1e-300
        if np.any(np.abs(cov) > bound):
            raise DomainError("|cov| exceeds the r_std/2 covariance bound")


def hybrid_cov(bundle: PathBundle, x_levels: Sequence[float]) -> HybridSlice:
    """Cov^t(r_t; 1{S_t > x}) per level from hybrid paths.

    Paths are reweighted to the t-forward measure by e^{-int r} normalised
    by its sample mean, so the weights average to exactly 1; the standard
    error comes from the influence function of the normalised covariance
    (a smooth function of four sample means).
    """
    if bundle.paths < 1000:
        raise DomainError("hybrid_cov requires at least 1000 paths")
    levels = np.asarray(x_levels, dtype=float)
    disc = np.exp(-bundle.integrated_rate)
    bond = float(np.mean(disc))
    w = disc / bond
    r = bundle.terminal_rate
    fwd = float(np.mean(w * r))
    r_std = math.sqrt(float(np.mean(w * (r - fwd) ** 2)))
    n = bundle.paths
    cov = np.empty(levels.shape)
    cov_se = np.empty(levels.shape)
    for i, x in enumerate(levels):
        ind = (bundle.terminal_log_stock > math.log(x)).astype(float)
        p = float(np.mean(w * ind))
        c = float(np.mean(w * r * ind)) - fwd * p
        # Influence function of (A - B C)/D style ratios of means, with
        # A = mean(d r i), B = mean(d r), C = mean(d i), D = mean(d).
        psi = (
            disc * r * ind
            - p * disc * r
            - fwd * disc * ind
            + (2.0 * fwd * p - (c + fwd * p)) * disc
        ) / bond
        cov[i] = c
        cov_se[i] = float(np.std(psi)) / math.sqrt(n)
    return HybridSlice(
        t=bundle.t,
        x_levels=levels,
        cov=cov,
        cov_se=cov_se,
        bond=bond,
        fwd_rate=fwd,
        r_std=r_std,
    )


# ---------------------------------------------------------------------------
# Extended Dupire extraction
# ---------------------------------------------------------------------------


def extended_dupire(
    surface: PriceSurface, slices: Sequence[HybridSlice]
) -> LocalVolSurface:
    """Dupire extraction with the forward-measure covariance correction.

    Identical stencils, clipping and flooring to extract_local_vol, with
    x B(0,t) Cov^t(r_t; 1{S_t > x}) subtracted from each interior
    numerator.  One slice per interior maturity is required, with x_levels
    matching the interior strikes; the slice's bond scales its covariances
    while the classical terms keep the surface's own forward-rate curve,
    so zero covariances reproduce extract_local_vol exactly.
    """
    mats = surface.maturities
    ks = surface.strikes
    c = surface.prices
    if len(mats) < 3 or len(ks) < 3:
        raise DomainError("extraction needs at least 3 maturities and 3 strikes")
    interior_t = mats[1:-1]
    interior_k = ks[1:-1]
    if len(slices) != len(interior_t):
        raise DomainError(
            f"need one slice per interior maturity ({len(interior_t)}), "
            f"got {len(slices)}"
        )
    for sl, t_i in zip(slices, interior_t):
        if abs(sl.t - t_i) > 1e-9 * max(1.0, abs(t_i)):
            raise DomainError(f"slice time {sl.t} does not match maturity {t_i}")
        if sl.x_levels.shape != interior_k.shape or np.any(
            np.abs(sl.x_levels - interior_k) > 1e-9 * interior_k
        ):
            raise DomainError("slice x_levels must match the interior strikes")
    n_t, n_k = len(mats) - 2, len(ks) - 2
    sigma2 = np.empty((n_t, n_k))
    floor = 1e-10 / surface.spot
    clip_count = 0
    floor_count = 0
    for i in range(1, len(mats) - 1):
        h_m, h_p = mats[i] - mats[i - 1], mats[i + 1] - mats[i]
        c_t = _central_first(c[i - 1], c[i], c[i + 1], h_m, h_p)
        rate = surface.forward_rate(float(mats[i]))
        sl = slices[i - 1]
        for j in range(1, len(ks) - 1):
            g_m, g_p = ks[j] - ks[j - 1], ks[j + 1] - ks[j]
            c_k = _central_first(c[i, j - 1], c[i, j], c[i, j + 1], g_m, g_p)
            c_kk = _central_second(c[i, j - 1], c[i, j], c[i, j + 1], g_m, g_p)
            if c_kk < floor:
                c_kk = floor
                floor_count += 1
            numer = c_t[j] + rate * ks[j] * c_k - ks[j] * sl.bond * sl.cov[j - 1]
            if numer < 0.0:
                numer = 0.0
                clip_count += 1
            sigma2[i - 1, j - 1] = numer / (0.5 * ks[j] ** 2 * c_kk)
    if floor_count > 0.1 * sigma2.size:
        raise DegenerateDensityError(
            f"denominator floored on {floor_count}/{sigma2.size} nodes; "
            "surface density is degenerate"
        )
    return LocalVolSurface(
        t_nodes=mats[1:-1],
        x_nodes=ks[1:-1],
        sigma2=sigma2,
        clip_count=clip_count,
        floor_count=floor_count,
    )


# ---------------------------------------------------------------------------
# Mimicking regressions under stochastic rates
# ---------------------------------------------------------------------------


def _weighted_kernel(
    ln_cond: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    x0: float,
    cfg: MCConfig,
) -> CondEstimate:
    """Kernel regression of y at ln_cond = x0 with extra path weights.

    Same Gaussian kernel, bandwidth rule and refusal thresholds as
    kernel_conditional; the kernel weights are multiplied by the given
    path weights, which is the ratio of the two plain kernel estimates
    sum(w u y) / sum(w u) with a shared bandwidth, and the standard error
    is the usual weighted-residual (delta-method) form.
    """
    if len(ln_cond) < 1000:
        raise DomainError("kernel regression requires at least 1000 samples")
    h = cfg.bandwidth if cfg.bandwidth_rule == "fixed" else _silverman_bandwidth(ln_cond)
    u = (ln_cond - x0) / h
    with np.errstate(under="ignore"):
        omega = np.exp(-0.5 * u * u) * weights
    sw = float(np.sum(omega))
    sw2 = float(np.sum(omega * omega))
    if sw <= 0 or sw2 <= 0:
        raise LowMassError(f"no kernel mass at x0 = {x0}")
    n_eff = sw * sw / sw2
    if n_eff < 30.0:
        raise LowMassError(f"effective sample size {n_eff:.1f} below 30 at x0 = {x0}")
    value = float(np.sum(omega * y) / sw)
    var = float(np.sum(omega * omega * (y - value) ** 2)) / (sw * sw)
    se = math.sqrt(var)
    if se == 0.0:
        se = float(np.finfo(float).tiny)  # constant-Y regression is exact
    return CondEstimate(value=value, std_error=se, n_effective=n_eff)


def spot_mimic_var(bundle: PathBundle, x: float, cfg: MCConfig) -> CondEstimate:
    """Mimicking variance E[V_t e^{-int r} | S_t = x] / E[e^{-int r} | S_t = x].

    Both conditional expectations share one kernel bandwidth (from the
    ln S samples), so deterministic rates cancel and the estimate reduces
    to the plain kernel_conditional regression of V_t on ln S_t.
    """
    if not x > 0:
        raise DomainError("x must be positive")
    disc = np.exp(-bundle.integrated_rate)
    return _weighted_kernel(
        bundle.terminal_log_stock,
        bundle.terminal_variance,
        disc,
        math.log(x),
        cfg,
    )


def forward_sigma_T(
    bundle: PathBundle, rates: RatesSpec, T: float, x: float, cfg: MCConfig
) -> CondEstimate:
    """Forward-contract mimicking variance under the T-forward measure.

    Estimates E^T[V_t + 2 rho_rs sqrt(V_t) sigma_B(t,T) + sigma_B(t,T)^2
    | F_t^T = x B(0,t)/B(0,T)] where F_t^T = S_t / B(t,T), by reweighting
    risk-neutral paths with the likelihood ratio e^{-int_0^t r} B(t,T)
    (the tower extension of e^{-int_0^T r} to time t).  The conditioning
    point x B(0,t)/B(0,T) is x e^{int_t^T f(0,s) ds}, so with
    deterministic rates the event is S_t = x and the estimate reduces to
    kernel_conditional of V_t.
    """
    if not x > 0:
        raise DomainError("x must be positive")
    if T < bundle.t:
        raise DomainError("T must not precede the bundle time")
    t = bundle.t
    ln_fwd_bond = _log_bond_ahead(rates, t, T, bundle.terminal_rate)
    lr = np.exp(-bundle.integrated_rate + ln_fwd_bond)
    bond_t, _, sigma_b = rates_descriptors(rates, t, T)
    bond_T, _, _ = rates_descriptors(rates, T, T)
    v = bundle.terminal_variance
    y = v + 2.0 * rates.rho_rs * np.sqrt(np.maximum(v, 0.0)) * sigma_b + sigma_b**2
    ln_cond = bundle.terminal_log_stock - ln_fwd_bond
    x0 = math.log(x) + math.log(bond_t / bond_T)
    return _weighted_kernel(ln_cond, y, lr, x0, cfg)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_hybrid_csv(slices: Sequence[HybridSlice], path) -> None:
    """Rows t,x,cov,cov_se,bond,fwd_rate in maturity-major order."""
    rows = [
        (sl.t, x, sl.cov[i], sl.cov_se[i], sl.bond, sl.fwd_rate)
        for sl in slices
        for i, x in enumerate(sl.x_levels)
    ]
    np.savetxt(
        path,
        np.asarray(rows),
        delimiter=",",
        header="t,x,cov,cov_se,bond,fwd_rate",
        comments="",
        fmt="%.17g",
    )
