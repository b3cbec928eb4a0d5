"""Local-volatility extraction from call prices and forward-PDE pricing.

The two directions form a round trip:

* extract_local_vol applies Dupire's formula
  sigma^2(T, K) = (dC/dT + f(0,T) K dC/dK) / (K^2/2 d2C/dK2)
  to a discounted call-price surface with central differences,
* price_forward_pde solves the forward equation
  dC/dT = sigma^2/2 (d2C/du2 - dC/du) - f(0,T) dC/du  (u = ln K)
  by Crank-Nicolson with Rannacher startup on a uniform log-strike grid.

Prices are discounted (C = B(0,T) E[(S_T - K)^+]); rates enter through the
instantaneous forward curve f(0,t) and the discount factor B(0,t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, DegenerateDensityError, DomainError

__all__ = [
    "PriceSurface",
    "LocalVolSurface",
    "extract_local_vol",
    "price_forward_pde",
    "sigma2_interpolator",
    "discount_from_forward",
    "write_price_surface_csv",
    "read_price_surface_csv",
    "write_discount_csv",
    "read_discount_csv",
]

_MONO_TOL = 1e-8      # strike monotonicity slack, relative to spot
_CONVEX_TOL = 1e-6    # strike convexity slack, relative to spot
_FLOOR_TOL = 1e-7     # intrinsic-floor slack, relative to spot


@dataclass(frozen=True)
class PriceSurface:
    """Discounted call prices C(K, T) on a maturity-by-strike grid."""

    maturities: np.ndarray
    strikes: np.ndarray
    prices: np.ndarray
    discount: Callable[[float], float]
    forward_rate: Callable[[float], float]
    spot: float

    def __post_init__(self) -> None:
        mats = np.asarray(self.maturities, dtype=float)
        ks = np.asarray(self.strikes, dtype=float)
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "strikes", ks)
        object.__setattr__(self, "prices", prices)
        if mats.ndim != 1 or mats[0] <= 0 or np.any(np.diff(mats) <= 0):
            raise DomainError("maturities must be increasing and positive")
        if ks.ndim != 1 or ks[0] <= 0 or np.any(np.diff(ks) <= 0):
            raise DomainError("strikes must be increasing and positive")
        if prices.shape != (len(mats), len(ks)):
            raise DomainError("prices grid shape must be (maturities, strikes)")
        if not self.spot > 0:
            raise DomainError("spot must be positive")
        slack = self.spot * _MONO_TOL
        if np.any(np.diff(prices, axis=1) > slack):
            raise DomainError("prices must be nonincreasing in strike")
        d1 = np.diff(prices, axis=1) / np.diff(ks)
        if np.any(np.diff(d1, axis=1) < -_CONVEX_TOL * self.spot):
            raise DomainError("prices must be convex in strike")
        dfs = np.array([self.discount(t) for t in mats])
        floor = np.maximum(self.spot - ks[None, :] * dfs[:, None], 0.0)
        if np.any(prices < floor - _FLOOR_TOL * self.spot):
            raise DomainError("prices fall below the discounted intrinsic floor")


@dataclass(frozen=True)
class LocalVolSurface:
    """Local variance sigma^2(t, x) on a (t, x) grid, bilinear in (t, ln x).

    clip_count and floor_count carry extraction diagnostics: numerators
    clipped to zero and density denominators raised to the floor.
    """

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    sigma2: np.ndarray
    interp: str = "bilinear_in_t_logx"
    clip_count: int = 0
    floor_count: int = 0

    def __post_init__(self) -> None:
        t = np.asarray(self.t_nodes, dtype=float)
        x = np.asarray(self.x_nodes, dtype=float)
        s2 = np.asarray(self.sigma2, dtype=float)
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "sigma2", s2)
        if t.ndim != 1 or t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise DomainError("t_nodes must be increasing and positive")
        if x.ndim != 1 or x[0] <= 0 or np.any(np.diff(x) <= 0):
            raise DomainError("x_nodes must be increasing and positive")
        if s2.shape != (len(t), len(x)):
            raise DomainError("sigma2 grid shape must be (t_nodes, x_nodes)")
        if np.any(s2 < 0):
            raise DomainError("sigma2 must be nonnegative")
        if self.interp != "bilinear_in_t_logx":
            raise DomainError(f"unknown interpolation {self.interp!r}")


def sigma2_interpolator(surface: LocalVolSurface):
    """Return (sigma2_of(t, ln_x_array), clamp_counter) for a surface.

    Lookups outside the grid are clamped to the boundary and counted in
    counter["clamped"] (path-step events, not unique paths).
    """
    t_nodes = np.asarray(surface.t_nodes, dtype=float)
    lx_nodes = np.log(np.asarray(surface.x_nodes, dtype=float))
    grid = np.asarray(surface.sigma2, dtype=float)
    counter = {"clamped": 0}

    def sigma2(t: float, ln_x: np.ndarray) -> np.ndarray:
        tc = min(max(t, t_nodes[0]), t_nodes[-1])
        if len(t_nodes) == 1:
            row = grid[0]
        else:
            idx = np.searchsorted(t_nodes, tc, side="right") - 1
            idx = min(max(idx, 0), len(t_nodes) - 2)
            w = (tc - t_nodes[idx]) / (t_nodes[idx + 1] - t_nodes[idx])
            row = (1.0 - w) * grid[idx] + w * grid[idx + 1]
        counter["clamped"] += int(
            np.count_nonzero((ln_x < lx_nodes[0]) | (ln_x > lx_nodes[-1]))
        )
        return np.interp(ln_x, lx_nodes, row)

    return sigma2, counter


def discount_from_forward(forward_rate: Callable[[float], float]):
    """B(0, t) = exp(-int_0^t f(0,s) ds) as a callable, by quadrature."""

    def discount(t: float) -> float:
        if t == 0.0:
            return 1.0
        val, _ = quad(forward_rate, 0.0, float(t), limit=200)
        return math.exp(-val)

    return discount


# ---------------------------------------------------------------------------
# Dupire extraction
# ---------------------------------------------------------------------------


def _central_first(f_prev, f_mid, f_next, h_m, h_p):
    """Second-order first derivative on a nonuniform 3-point stencil."""
    return (
        h_m * h_m * f_next - h_p * h_p * f_prev + (h_p * h_p - h_m * h_m) * f_mid
    ) / (h_p * h_m * (h_p + h_m))


def _central_second(f_prev, f_mid, f_next, h_m, h_p):
    """Second-order second derivative on a nonuniform 3-point stencil."""
    return 2.0 * (h_m * f_next + h_p * f_prev - (h_p + h_m) * f_mid) / (
        h_p * h_m * (h_p + h_m)
    )


def extract_local_vol(surface: PriceSurface) -> LocalVolSurface:
    """Dupire local variance on the interior nodes of a price surface.

    Central differences in both maturity and strike; the density denominator
    d2C/dK2 is floored at 1e-10 / spot per node (floored nodes counted), and
    negative numerators are clipped to zero (counted).  If more than 10% of
    interior nodes need the denominator floor the surface is rejected as
    effectively non-convex.
    """
    mats = surface.maturities
    ks = surface.strikes
    c = surface.prices
    if len(mats) < 3 or len(ks) < 3:
        raise DomainError("extraction needs at least 3 maturities and 3 strikes")
    n_t, n_k = len(mats) - 2, len(ks) - 2
    sigma2 = np.empty((n_t, n_k))
    floor = 1e-10 / surface.spot
    clip_count = 0
    floor_count = 0
    for i in range(1, len(mats) - 1):
        h_m, h_p = mats[i] - mats[i - 1], mats[i + 1] - mats[i]
        c_t = _central_first(c[i - 1], c[i], c[i + 1], h_m, h_p)
        rate = surface.forward_rate(float(mats[i]))
        for j in range(1, len(ks) - 1):
            g_m, g_p = ks[j] - ks[j - 1], ks[j + 1] - ks[j]
            c_k = _central_first(c[i, j - 1], c[i, j], c[i, j + 1], g_m, g_p)
            c_kk = _central_second(c[i, j - 1], c[i, j], c[i, j + 1], g_m, g_p)
            if c_kk < floor:
                c_kk = floor
                floor_count += 1
            numer = c_t[j] + rate * ks[j] * c_k
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
# Forward PDE
# ---------------------------------------------------------------------------


def _solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm; diag is modified copy-free safe (inputs are copies)."""
    n = len(diag)
    c_star = np.empty(n)
    d_star = np.empty(n)
    c_star[0] = upper[0] / diag[0]
    d_star[0] = rhs[0] / diag[0]
    for k in range(1, n):
        denom = diag[k] - lower[k] * c_star[k - 1]
        c_star[k] = upper[k] / denom if k < n - 1 else 0.0
        d_star[k] = (rhs[k] - lower[k] * d_star[k - 1]) / denom
    x = np.empty(n)
    x[-1] = d_star[-1]
    for k in range(n - 2, -1, -1):
        x[k] = d_star[k] - c_star[k] * x[k + 1]
    return x


def _oscillatory(c: np.ndarray, spot: float) -> bool:
    """A discounted call must be nonincreasing in strike up to roundoff."""
    if np.any(c < -1e-9 * spot):
        return True
    slopes = np.diff(c)
    return bool(np.any(slopes > 1e-7 * spot))


def price_forward_pde(
    lv: LocalVolSurface,
    spot: float,
    forward_rate: Callable[[float], float],
    maturities: Sequence[float],
    strikes: Sequence[float],
    n_nodes: int = 400,
    steps_per_unit: int = 200,
) -> PriceSurface:
    """Price a discounted call surface from a local-variance surface.

    Crank-Nicolson (theta = 1/2) on a uniform ln-strike grid with two
    implicit Rannacher startup steps; Dirichlet boundaries
    C -> spot - K B(0,T) on the left, C -> 0 on the right.  An oscillation
    monitor halves the time step and restarts on instability, giving up
    after 4 halvings.
    """
    mats = np.asarray(maturities, dtype=float)
    ks = np.asarray(strikes, dtype=float)
    if mats.ndim != 1 or mats[0] <= 0 or np.any(np.diff(mats) <= 0):
        raise DomainError("maturities must be increasing and positive")
    if ks.ndim != 1 or ks[0] <= 0 or np.any(np.diff(ks) <= 0):
        raise DomainError("strikes must be increasing and positive")
    t_max = float(mats[-1])
    s2_fn, _ = sigma2_interpolator(lv)
    s2_max = float(np.max(lv.sigma2))
    width = max(1.5, 5.0 * math.sqrt(max(s2_max, 1e-4) * t_max))
    u_lo = min(math.log(ks[0]), math.log(spot)) - width
    u_hi = max(math.log(ks[-1]), math.log(spot)) + width
    u = np.linspace(u_lo, u_hi, n_nodes)
    du = u[1] - u[0]

    for halving in range(5):
        steps = steps_per_unit * 2**halving
        c = np.maximum(spot - np.exp(u), 0.0)
        t_now = 0.0
        int_f = 0.0  # int_0^t f(0,s) ds, for the left boundary
        rows = []
        step_index = 0
        unstable = False
        for t_target in mats:
            m = max(1, int(math.ceil((t_target - t_now) * steps - 1e-12)))
            dt = (t_target - t_now) / m
            for _ in range(m):
                t_new = t_now + dt
                theta = 1.0 if step_index < 2 else 0.5
                c = _theta_step(
                    c, u, du, dt, theta, t_now, t_new, s2_fn, forward_rate, spot, int_f
                )
                int_f += _simpson_rate(forward_rate, t_now, t_new)
                t_now = t_new
                step_index += 1
                if _oscillatory(c, spot):
                    unstable = True
                    break
            if unstable:
                break
            # Cubic resampling in ln K: linear interpolation of the native
            # grid breaks strike convexity at the 1e-4 level, the spline
            # keeps it at roundoff.  Clamping to the discounted intrinsic
            # floor (a convex function of K) preserves convexity.
            row = CubicSpline(u, c)(np.log(ks))
            floor = np.maximum(spot - ks * math.exp(-int_f), 0.0)
            rows.append(np.maximum(row, floor))
        if not unstable:
            prices = np.vstack(rows)
            discount = discount_from_forward(forward_rate)
            return PriceSurface(
                maturities=mats,
                strikes=ks,
                prices=prices,
                discount=discount,
                forward_rate=forward_rate,
                spot=spot,
            )
    raise ConvergenceError("forward PDE unstable after 4 time-step halvings")


def _simpson_rate(forward_rate, t0: float, t1: float) -> float:
    mid = 0.5 * (t0 + t1)
    return (t1 - t0) / 6.0 * (
        forward_rate(t0) + 4.0 * forward_rate(mid) + forward_rate(t1)
    )


def _theta_step(c, u, du, dt, theta, t_old, t_new, s2_fn, forward_rate, spot, int_f_old):
    """One theta-scheme step of C_T = s2/2 (C_uu - C_u) - f C_u."""
    n = len(u)

    def operator_coeffs(t):
        s2 = np.maximum(s2_fn(t, u), 0.0)
        r = forward_rate(t)
        # L C = alpha C_{j-1} + beta C_j + gamma C_{j+1}
        diff = 0.5 * s2 / du**2
        conv = (0.5 * s2 + r) / (2.0 * du)
        alpha = diff + conv
        beta = -2.0 * diff
        gamma = diff - conv
        return alpha, beta, gamma

    a_o, b_o, g_o = operator_coeffs(t_old)
    a_n, b_n, g_n = operator_coeffs(t_new)

    rhs = c.copy()
    rhs[1:-1] = (
        c[1:-1]
        + (1.0 - theta) * dt * (a_o[1:-1] * c[:-2] + b_o[1:-1] * c[1:-1] + g_o[1:-1] * c[2:])
    )
    lower = np.zeros(n)
    diag = np.ones(n)
    upper = np.zeros(n)
    lower[1:-1] = -theta * dt * a_n[1:-1]
    diag[1:-1] = 1.0 - theta * dt * b_n[1:-1]
    upper[1:-1] = -theta * dt * g_n[1:-1]
    # Dirichlet boundaries at the new time level
    int_f_new = int_f_old + _simpson_rate(forward_rate, t_old, t_new)
    rhs[0] = spot - math.exp(u[0]) * math.exp(-int_f_new)
    rhs[-1] = 0.0
    return _solve_tridiagonal(lower, diag, upper, rhs)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def write_price_surface_csv(surface: PriceSurface, path) -> None:
    """Rows maturity,strike,price in maturity-major order."""
    rows = [
        (t, k, surface.prices[i, j])
        for i, t in enumerate(surface.maturities)
        for j, k in enumerate(surface.strikes)
    ]
    np.savetxt(
        path,
        np.asarray(rows),
        delimiter=",",
        header="maturity,strike,price",
        comments="",
        fmt="%.17g",
    )


def write_discount_csv(times: np.ndarray, discount: Callable[[float], float], path) -> None:
    data = np.column_stack([times, [discount(float(t)) for t in times]])
    np.savetxt(path, data, delimiter=",", header="t,df", comments="", fmt="%.17g")


def read_discount_csv(path) -> Callable[[float], float]:
    """Discount curve from a t,df table, log-linear between nodes."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    log_df = np.log(data[:, 1])
    if np.any(np.diff(t) <= 0):
        raise DomainError("discount curve times must be increasing")

    def discount(s: float) -> float:
        return math.exp(float(np.interp(s, t, log_df)))

    return discount


def read_price_surface_csv(
    path, discount: Callable[[float], float], spot: float
) -> PriceSurface:
    """Rebuild a PriceSurface from maturity,strike,price rows.

    The forward-rate curve is recovered from the discount curve by a central
    difference of -ln B(0,t).
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise DomainError("price surface CSV must have columns maturity,strike,price")
    mats = np.unique(data[:, 0])
    ks = np.unique(data[:, 1])
    prices = np.full((len(mats), len(ks)), np.nan)
    mat_index = {t: i for i, t in enumerate(mats)}
    k_index = {k: j for j, k in enumerate(ks)}
    for t, k, p in data:
        prices[mat_index[t], k_index[k]] = p
    if np.any(np.isnan(prices)):
        raise DomainError("price surface CSV is not a full maturity-by-strike grid")

    def forward_rate(t: float) -> float:
        step = 1e-5 * max(1.0, abs(t))
        lo = max(t - step, 0.0)
        return -(math.log(discount(t + step)) - math.log(discount(lo))) / (t + step - lo)

    return PriceSurface(
        maturities=mats,
        strikes=ks,
        prices=prices,
        discount=discount,
        forward_rate=forward_rate,
        spot=spot,
    )
