"""Scalar special functions needed by the Bessel-bridge series.

Three ingredients, all classical:

* rising factorials / the Gamma function (Pochhammer symbols drive every
  series in :mod:`mimicvol.bessel`),
* Mc Donald functions ``K_0`` and ``K_1`` (modified Bessel, second kind),
  evaluated by the ascending series for small argument (Abramowitz & Stegun
  9.6.11/9.6.13) and the divergent asymptotic expansion for large argument,
* parabolic cylinder functions ``D_nu(xi)`` for real order, evaluated from
  the Laplace-type integral representation for negative orders plus the
  stable upward three-term recurrence (see Gil, Segura & Temme,
  *Numerical Methods for Special Functions*, ch. 12, for the stability
  direction).

scipy/mpmath implementations are deliberately not called here; the test
suite uses them (and direct quadrature of the defining integrals) as
independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "SpecFunConfig",
    "gamma_pochhammer",
    "bessel_k",
    "parabolic_d",
]

_EULER_GAMMA = 0.5772156649015328606

# Validated evaluation box for parabolic_d.
_D_NU_MAX = 50.0
_D_XI_MAX = 100.0


@dataclass(frozen=True)
class SpecFunConfig:
    """Tolerances shared by the special-function evaluators.

    abs_tol : absolute truncation target for series tails.
    max_terms : hard cap on series length before we give up.
    quad_points : total Gauss-Legendre node budget for integral seeds.
    """

    abs_tol: float = 1e-12
    max_terms: int = 200
    quad_points: int = 512

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.max_terms < 10:
            raise DomainError("max_terms must be at least 10")
        if self.quad_points < 32:
            raise DomainError("quad_points must be at least 32")


DEFAULT_CONFIG = SpecFunConfig()


def gamma_pochhammer(nu: float, k: int) -> float:
    """Rising factorial ``(nu)_k``; with ``k = 0`` acts as a ``Gamma(nu)`` accessor.

    The ``k = 0`` convention mirrors how the series code uses this helper:
    ``gamma_pochhammer(nu, 0)`` returns ``Gamma(nu)`` (so e.g. ``(5, 0) -> 24``),
    while ``k >= 1`` returns the plain product ``nu (nu+1) ... (nu+k-1)``,
    which is well defined for any real ``nu``.
    """
    if k < 0 or k != int(k):
        raise DomainError("k must be a nonnegative integer")
    if k == 0:
        if nu <= 0 and float(nu) == int(nu):
            raise DomainError(f"Gamma pole at nu={nu}")
        return math.gamma(nu)
    out = 1.0
    for j in range(int(k)):
        out *= nu + j
    return out


def _leggauss_cached(n: int, _cache: dict = {}) -> tuple[np.ndarray, np.ndarray]:
    if n not in _cache:
        _cache[n] = np.polynomial.legendre.leggauss(n)
    return _cache[n]


# ---------------------------------------------------------------------------
# Mc Donald functions K_0, K_1
# ---------------------------------------------------------------------------

_K_SERIES_TERMS = 40  # covers z <= 8 to below 1e-15 relative on the worst term
_K_CROSSOVER = 8.0


def _bessel_k_series(order: int, z: np.ndarray) -> np.ndarray:
    """Ascending series, reliable for 0 < z <= 8 (A&S 9.6.11 / 9.6.13)."""
    q = 0.25 * z * z
    log_half_z = np.log(0.5 * z)
    if order == 0:
        # I_0 and the companion harmonic-number sum, accumulated together.
        term = np.ones_like(z)
        i0 = np.ones_like(z)
        s = np.zeros_like(z)
        h = 0.0
        for k in range(1, _K_SERIES_TERMS):
            term = term * q / (k * k)
            h += 1.0 / k
            i0 += term
            s += h * term
        return -(log_half_z + _EULER_GAMMA) * i0 + s
    # order == 1
    term = np.ones_like(z)  # q^k / (k! (k+1)!)
    i1_sum = np.ones_like(z)
    s = np.full_like(z, 1.0 - 2.0 * _EULER_GAMMA)  # k = 0: H_0 + H_1 - 2 gamma
    h_k, h_k1 = 0.0, 1.0
    for k in range(1, _K_SERIES_TERMS):
        term = term * q / (k * (k + 1))
        h_k += 1.0 / k
        h_k1 += 1.0 / (k + 1)
        i1_sum += term
        s += (h_k + h_k1 - 2.0 * _EULER_GAMMA) * term
    i1 = 0.5 * z * i1_sum
    return 1.0 / z + log_half_z * i1 - 0.25 * z * s


def _bessel_k_asymptotic(order: int, z: np.ndarray, abs_tol: float) -> np.ndarray:
    """Divergent large-z expansion, truncated at the smallest term (z > 8)."""
    mu = 4.0 * order * order
    total = np.ones_like(z)
    term = np.ones_like(z)
    active = np.ones_like(z, dtype=bool)
    for k in range(1, 30):
        new_term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        # Stop per element once terms grow again or are negligible.
        active &= np.abs(new_term) < np.abs(term)
        active &= np.abs(new_term) > abs_tol
        total = np.where(active, total + new_term, total)
        term = new_term
        if not active.any():
            break
    return np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) * total


def bessel_k(order: int, z, config: SpecFunConfig = DEFAULT_CONFIG):
    """Mc Donald function ``K_order(z)`` for order in {0, 1}, z > 0.

    Accepts scalars or arrays.  Underflows quietly to 0 for very large z
    (the asymptotic prefactor exp(-z) drops below the float range near
    z ~ 745), which is the documented overflow-safe behaviour.
    """
    if order not in (0, 1):
        raise DomainError("order must be 0 or 1")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise DomainError("bessel_k requires z > 0")
    out = np.empty_like(z_arr)
    small = z_arr <= _K_CROSSOVER
    if small.any():
        out[small] = _bessel_k_series(order, z_arr[small])
    if (~small).any():
        out[~small] = _bessel_k_asymptotic(order, z_arr[~small], config.abs_tol)
    return float(out) if np.isscalar(z) or z_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Parabolic cylinder D_nu(xi)
# ---------------------------------------------------------------------------
#
# For nu < 0 the Laplace-type representation
#
#   D_nu(xi) = exp(-xi^2/4) / Gamma(-nu) * I(-nu-1, xi),
#   I(p, xi) = int_0^inf s^p exp(-s^2/2 - xi s) ds,
#
# holds.  The integrand is singular at s = 0 when p < 0 (orders in (-1, 0));
# integrating by parts (boundary terms vanish) lifts the exponent by 2:
#
#   I(p, xi) = [I(p+2, xi) + xi I(p+1, xi)] / (p + 1),
#
# applied once or twice until every base exponent is >= 1 (or exactly 0).
#
# Orders nu >= 0 with xi >= 0 are reached from the two seeds D_mu, D_{mu-1}
# with mu = nu - floor(nu) - 1 in [-1, 0) via the upward recurrence
# D_{lam+1} = xi D_lam - lam D_{lam-1}.  |D_lam(xi)| grows with lam for
# xi >= 0, so upward is the stable direction there.  For xi < 0 it is NOT:
# |D_lam(xi)| starts at the e^{+xi^2/4} scale, dips, and regrows, so any
# seed rounding rides the companion solution and destroys the result (this
# is observable already at xi ~ -8).  That branch instead integrates the
# Weber ODE  y'' = (xi^2/4 - nu - 1/2) y  outward from xi = 0, where
# D_nu(0) and D_nu'(0) are exact Gamma expressions; marching toward
# negative xi follows the dominant solution and is numerically stable.


def _base_integral_grid(p: np.ndarray, xi: np.ndarray, n_gl: int) -> np.ndarray:
    """Vectorized I(p, xi) = int_0^inf s^p exp(-s^2/2 - xi s) ds for p >= 1 or p == 0.

    For xi < 0 returns the *shifted* integral J = int (v - xi)^p exp(-v^2/2) dv,
    i.e. I = exp(xi^2/2) * J; the caller folds the exponential into the final
    exp() so values near the float64 ceiling stay representable.
    """
    n_panels = 12
    nodes, weights = _leggauss_cached(n_gl)  # nodes are strictly interior
    pad = 11.0 + 1.5 * np.sqrt(p)
    neg = xi < 0
    out = np.zeros(p.shape[0])

    if (~neg).any():
        pp = p[~neg][:, None, None]
        xx = xi[~neg][:, None, None]
        s_star = 0.5 * (-xi[~neg] + np.sqrt(xi[~neg] ** 2 + 4.0 * p[~neg]))
        s_hi = s_star + pad[~neg]
        # Quadratically clustered breakpoints resolve the boundary layer that
        # forms near s = 0 when xi is large.
        frac = (np.arange(n_panels + 1) / n_panels) ** 2
        brk = s_hi[:, None] * frac[None, :]
        half = 0.5 * (brk[:, 1:] - brk[:, :-1])
        mid = 0.5 * (brk[:, 1:] + brk[:, :-1])
        s = mid[:, :, None] + half[:, :, None] * nodes  # (elem, panel, node), all > 0
        f = np.exp(pp * np.log(s) - 0.5 * s * s - xx * s)
        out[~neg] = np.einsum("epn,n,ep->e", f, weights, half)

    if neg.any():
        pp = p[neg][:, None, None]
        xx = xi[neg][:, None, None]
        v_star = 0.5 * (xi[neg] + np.sqrt(xi[neg] ** 2 + 4.0 * p[neg]))
        lo = np.maximum(xi[neg], v_star - pad[neg])
        hi = v_star + pad[neg]
        step = ((hi - lo) / n_panels)[:, None]
        plo = lo[:, None] + step * np.arange(n_panels)[None, :]
        half = np.broadcast_to(0.5 * step, plo.shape)
        mid = plo + half
        v = mid[:, :, None] + half[:, :, None] * nodes  # v - xi > 0 strictly
        f = np.exp(pp * np.log(v - xx) - 0.5 * v * v)
        out[neg] = np.einsum("epn,n,ep->e", f, weights, half)

    return out


def _integral_combo(p: np.ndarray, xi: np.ndarray, n_gl: int) -> np.ndarray:
    """I(p, xi) for any p > -1, lifting singular exponents by parts.

    Returned WITHOUT the exp(xi^2/2) factor on the xi < 0 branch (see
    _base_integral_grid); the caller works in log space.
    """
    out = np.zeros_like(p)
    smooth = (p >= 1.0) | (p == 0.0)
    if smooth.any():
        out[smooth] = _base_integral_grid(p[smooth], xi[smooth], n_gl)
    mid = (p > 0.0) & (p < 1.0)
    if mid.any():
        pm, xm = p[mid], xi[mid]
        i2 = _base_integral_grid(pm + 2.0, xm, n_gl)
        i1 = _base_integral_grid(pm + 1.0, xm, n_gl)
        out[mid] = (i2 + xm * i1) / (pm + 1.0)
    low = p < 0.0
    if low.any():
        pl, xl = p[low], xi[low]
        i3 = _base_integral_grid(pl + 3.0, xl, n_gl)
        i2 = _base_integral_grid(pl + 2.0, xl, n_gl)
        # two integrations by parts: all base exponents land in [1, 3)
        inner = (i3 + xl * i2) / (pl + 2.0)
        out[low] = (i2 + xl * inner) / (pl + 1.0)
    return out


def _d_negative_order(nu: np.ndarray, xi: np.ndarray, n_gl: int) -> np.ndarray:
    """D_nu(xi) for nu < 0 via the integral representation (log-space assembly)."""
    p = -nu - 1.0
    raw = _integral_combo(p, xi, n_gl)
    lgam = np.array([math.lgamma(v) for v in -nu])
    with np.errstate(over="ignore", divide="ignore"):
        ln = np.where(raw > 0, np.log(np.maximum(raw, 1e-300)), -np.inf)
        expo = np.where(xi < 0, 0.25 * xi * xi, -0.25 * xi * xi)
        return np.exp(expo + ln - lgam)


def _rgamma(z: float) -> float:
    """1 / Gamma(z), returning 0 at the poles (z a non-positive integer)."""
    if z <= 0 and z == int(z):
        return 0.0
    if z > 0:
        return math.exp(-math.lgamma(z))
    # math.lgamma returns log|Gamma|; Gamma(z) for z < 0 has the sign of sin(pi z)
    # (reflection formula with Gamma(1 - z) > 0).
    return math.copysign(math.exp(-math.lgamma(z)), math.sin(math.pi * z))


def _d_weber_march(nu: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """D_nu(xi) for nu >= 0, xi < 0 by outward integration of the Weber ODE.

    y'' = (xi^2/4 - nu - 1/2) y with y(0) = D_nu(0), y'(0) = D_nu'(0):

        D_nu(0)  = sqrt(pi) 2^{nu/2}   / Gamma((1 - nu)/2)
        D_nu'(0) = -sqrt(pi) 2^{(nu+1)/2} / Gamma(-nu/2)

    Marching toward negative xi tracks the e^{+xi^2/4}-type dominant
    solution, so the integration is stable; values beyond the float64
    ceiling come back as inf.
    """
    from scipy.integrate import solve_ivp

    out = np.empty_like(nu)
    sqrt_pi = math.sqrt(math.pi)
    for i, (n, x) in enumerate(zip(nu, xi)):
        y0 = sqrt_pi * 2.0 ** (0.5 * n) * _rgamma(0.5 * (1.0 - n))
        dy0 = -sqrt_pi * 2.0 ** (0.5 * (n + 1.0)) * _rgamma(-0.5 * n)
        # e^{xi^2/4} overflows past |xi| ~ 53; beyond that the target value
        # itself exceeds float64 for generic nu.
        if x < -53.0:
            out[i] = math.inf
            continue
        # atol rides the initial scale: one of y0/dy0 is exactly 0 at integer
        # nu (Gamma pole) and a fixed tiny atol would blow up the step-size
        # heuristic; the solution envelope only grows along the march.
        atol = 1e-19 * max(abs(y0), abs(dy0), 1e-250)
        sol = solve_ivp(
            lambda t, y, q=n + 0.5: [y[1], (0.25 * t * t - q) * y[0]],
            (0.0, x),
            [y0, dy0],
            method="DOP853",
            rtol=1e-12,
            atol=atol,
            dense_output=False,
        )
        out[i] = sol.y[0, -1] if sol.success else math.nan
    return out


def parabolic_d(nu, xi, config: SpecFunConfig = DEFAULT_CONFIG):
    """Parabolic cylinder function ``D_nu(xi)`` (Whittaker normalization).

    Vectorized over broadcastable ``nu`` and ``xi``.  Validated for
    ``|nu| <= 50`` and ``|xi| <= 100``; outside that box a DomainError is
    raised.  Where the true value exceeds the float64 range (large negative
    xi) the function returns ``inf``, which downstream series treat as a
    range failure rather than silently wrong numbers.
    """
    nu_arr, xi_arr = np.broadcast_arrays(
        np.asarray(nu, dtype=float), np.asarray(xi, dtype=float)
    )
    scalar = nu_arr.ndim == 0
    nu_flat = np.atleast_1d(nu_arr).ravel().copy()
    xi_flat = np.atleast_1d(xi_arr).ravel().copy()
    if np.any(np.abs(nu_flat) > _D_NU_MAX) or np.any(np.abs(xi_flat) > _D_XI_MAX):
        raise DomainError(
            f"parabolic_d validated for |nu| <= {_D_NU_MAX}, |xi| <= {_D_XI_MAX}"
        )
    n_gl = max(config.quad_points // 12, 20)
    out = np.empty_like(nu_flat)

    # Orders in (-2, 0) at negative xi would go through the integrated-by-parts
    # quadrature, whose 1/(p+1) amplification costs a few digits; the ODE march
    # covers them at full precision instead (its initial conditions are valid
    # for any order).
    neg = (nu_flat < 0) & ((xi_flat >= 0) | (nu_flat <= -2))
    if neg.any():
        out[neg] = _d_negative_order(nu_flat[neg], xi_flat[neg], n_gl)

    # Nonnegative integer order at negative argument is purely recessive (the
    # growing component's coefficient 1/Gamma(-n) vanishes); use the exact
    # reflection D_n(-x) = (-1)^n D_n(x) instead of the march, which cannot
    # track it.
    integer = (
        ~neg
        & (nu_flat >= 0)
        & (xi_flat < 0)
        & (np.abs(nu_flat - np.round(nu_flat)) < 1e-12)
    )
    if integer.any():
        sign = np.where(np.round(nu_flat[integer]).astype(int) % 2 == 0, 1.0, -1.0)
        xi_flat[integer] = -xi_flat[integer]
        nu_flat[integer] = np.round(nu_flat[integer])
        refl_sign = np.ones_like(nu_flat)
        refl_sign[integer] = sign
    else:
        refl_sign = None

    march = ~neg & (xi_flat < 0)
    if march.any():
        out[march] = _d_weber_march(nu_flat[march], xi_flat[march])

    pos = ~neg & ~march
    if pos.any():
        nu_p, xi_p = nu_flat[pos], xi_flat[pos]
        m = np.floor(nu_p).astype(int) + 1  # recurrence steps, >= 1
        mu = nu_p - m  # in [-1, 0)
        d_lo = _d_negative_order(mu - 1.0, xi_p, n_gl)
        d_hi = _d_negative_order(mu, xi_p, n_gl)
        lam = mu.copy()
        for _ in range(int(m.max())):
            step = m > 0
            nxt = xi_p * d_hi - lam * d_lo
            d_lo = np.where(step, d_hi, d_lo)
            d_hi = np.where(step, nxt, d_hi)
            lam = np.where(step, lam + 1.0, lam)
            m = m - 1
        out[pos] = d_hi

    if refl_sign is not None:
        out *= refl_sign

    if scalar:
        return float(out[0])
    return out.reshape(nu_arr.shape)
