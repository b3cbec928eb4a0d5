"""Analytic local-volatility surfaces for squared-Bessel stochastic volatility.

For the zero-correlation model dS/S = R dbeta, with R an independent
BES_delta started at 0 and S_0 = 1, the mimicking (Gyongy) local variance
sigma^2(t, x) = E[R_t^2 | S_t = x] reduces in closed form: conditionally on
the variance path, ln S_t is N(-A_t/2, A_t) with A_t the integrated
variance, and E[R_t^2 | A_t] = 2 A_t / t turns the conditional ratio into

    sigma^2(t, e^l) = -2 t (dk/db) / k   at (a, b) = (l^2 / 2t^2, t^2 / 8)

with k the Mc Donald series of bessel.k_pair.  With leverage correlation
rho the conditional Gaussian picks up the mean shift rho (R_t^2 - delta t)/2
and shrunk variance (1 - rho^2) A_t; the same ratio then needs the joint law
of (R_t^2, A_t) and is evaluated by quadrature against bessel's joint
density on its validated box.  Time-changed models (CIR variance via
bessel.cir_bessel_map, start 0) rescale an underlying surface:
sigma~^2(t, x) = g'(t) sigma^2(g(t), x / S_0).

Routes and method tags
----------------------
series : Mc Donald k-series, zero correlation only; fails below b ~ 6e-3,
         that is for maturities under roughly 0.22 on the variance clock.
quad   : Gauss-Legendre quadrature, either 1-D against the integrated-
         variance density (zero correlation at short maturities; alpha_fn
         with c = 0, where the variance state integrates out exactly) or
         2-D against the joint density on its validated box.
mc     : plain average over simulated (R_t^2, A_t) pairs, used when the
         2-D integrand has material mass outside the validated box.

The 2-D box route truncates the variance-state tail at R_1^2 = 18; the
induced bias on the conditional ratio (about 2e-4 at delta = 2) is bounded
analytically through the gamma marginal and folded into `err`, and the
route falls back to Monte Carlo once that bound passes _QUAD_TAIL_TOL.
All quadrature paths are deterministic and single-threaded; the Monte
Carlo fallback uses a fixed default seed, so every route is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaincc

from .bessel import (
    G_VALIDATED_BOX,
    BesselSpec,
    CirSpec,
    SeriesEval,
    _density_a1_grid,
    cir_bessel_map,
    joint_density_g_grid,
    k_pair,
)
from .dupire import LocalVolSurface
from .errors import ConvergenceError, DomainError, UnsupportedBranchError
from .montecarlo import MCConfig, simulate_besq
from .specfun import DEFAULT_CONFIG, SpecFunConfig

__all__ = [
    "AlphaResult",
    "LocalVolPoint",
    "TransformSpec",
    "alpha_fn",
    "build_surface",
    "heston_transform",
    "local_var_corr",
    "local_var_transformed",
    "local_var_zero_corr",
    "read_localvol_csv",
    "write_localvol_csv",
]

#: Times at which TransformSpec probes positivity of f and monotonicity of g.
_PROBE_TIMES = (1e-4, 0.01, 0.05, 0.25, 1.0, 4.0)

#: Gamma-tail bound above which the 2-D box quadrature defers to Monte Carlo.
_QUAD_TAIL_TOL = 2e-3

#: Boundary-cell fraction above which the 2-D integrand is treated as leaking
#: out of the box (catches weights that grow in the variance state).
_BOUNDARY_TOL = 1e-6

#: Boundary occupancy admitted for the conditional-ratio rule; sized like the
#: gamma-tail bound because occupancy enters the error budget at that order.
#: Tail conditioning pushes the weight toward the box edge long before real
#: mass leaks, and the Monte Carlo fallback is far worse there (the weight
#: degenerates onto a handful of paths), so the rule keeps the wing nodes.
_CORR_OCCUPANCY_TOL = 2e-3

#: Main and refinement Gauss-Legendre orders of the 2-D box rule.
_GL_MAIN = 96
_GL_CHECK = 64

#: Order and cutoff of the 1-D integrated-variance rule; beyond the cutoff
#: the density's exp(-pi^2 y / 8) tail is below 1e-13 of the total mass.
_GL_1D = 384
_Y_MAX_1D = 25.0

_MC_FALLBACK = MCConfig(paths=300_000, steps=200, seed=2718)

_VALID_METHODS = ("series", "quad", "mc")


@dataclass(frozen=True)
class TransformSpec:
    """Deterministic time change of a squared-Bessel variance clock.

    The stock follows S~_t = S_t' at t' = g(t) with instantaneous variance
    f(t) R^2_{g(t)}; f must stay positive and g strictly increasing on the
    working horizon, which is probed at construction on _PROBE_TIMES.
    """

    f: Callable[[float], float]
    g: Callable[[float], float]
    spec: BesselSpec
    s0: float = 1.0

    def __post_init__(self) -> None:
        if not self.s0 > 0:
            raise DomainError("s0 must be positive")
        probes = np.array(_PROBE_TIMES)
        f_vals = np.array([self.f(t) for t in probes], dtype=float)
        if not np.all(f_vals > 0.0):
            raise DomainError("f must be positive on the working horizon")
        g_vals = np.array([self.g(t) for t in probes], dtype=float)
        if not np.all(np.diff(g_vals) > 0.0):
            raise DomainError("g must be strictly increasing on the working horizon")


@dataclass(frozen=True)
class LocalVolPoint:
    """One mimicking local-variance evaluation sigma^2(t, x).

    sigma2 is a variance rate (1/time); err bounds the numerical error of
    the chosen route (series truncation, quadrature refinement plus tail
    bound, or Monte Carlo standard error); diagnostics optionally carries
    the underlying (k, dk/db) series evaluations.
    """

    t: float
    x: float
    sigma2: float
    method: str
    err: float
    diagnostics: tuple[SeriesEval, SeriesEval] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.t > 0:
            raise DomainError("t must be positive")
        if not self.x > 0:
            raise DomainError("x must be positive")
        if not self.sigma2 >= 0.0:
            raise DomainError("sigma2 must be nonnegative")
        if self.method not in _VALID_METHODS:
            raise DomainError(f"method must be one of {_VALID_METHODS}")
        if not self.err >= 0.0:
            raise DomainError("err must be nonnegative")


@dataclass(frozen=True)
class AlphaResult:
    """Value and b-derivative of the alpha transform, with route info."""

    value: float
    db: float
    method: str
    err: float


# ---------------------------------------------------------------------------
# Cached quadrature rules
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_A1_CACHE: dict[tuple[float, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
_G1_CACHE: dict[tuple[float, int], tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
_PAIR_CACHE: dict[tuple[float, float, MCConfig], tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _a1_nodes(delta: float, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on (0, _Y_MAX_1D] with cached A_1 density values."""
    key = (delta, n)
    if key not in _A1_CACHE:
        xg, wg = _gl(n)
        y = 0.5 * _Y_MAX_1D * (xg + 1.0)
        w = 0.5 * _Y_MAX_1D * wg
        _A1_CACHE[key] = (y, w, _density_a1_grid(delta, y))
    return _A1_CACHE[key]


def _g1_grid(
    delta: float, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """2-D Gauss-Legendre grid over the unit-time validated box with g_1 values."""
    key = (delta, n)
    if key not in _G1_CACHE:
        xg, wg = _gl(n)
        x = 0.5 * G_VALIDATED_BOX["x_over_t"] * (xg + 1.0)
        wx = 0.5 * G_VALIDATED_BOX["x_over_t"] * wg
        y = 0.5 * G_VALIDATED_BOX["y_over_t2"] * (xg + 1.0)
        wy = 0.5 * G_VALIDATED_BOX["y_over_t2"] * wg
        xx, yy = np.meshgrid(x, y, indexing="ij")
        g = joint_density_g_grid(delta, 1.0, xx.ravel(), yy.ravel()).reshape(xx.shape)
        _G1_CACHE[key] = (xx, yy, np.outer(wx, wy), g)
    return _G1_CACHE[key]


def _besq_pairs(delta: float, t: float, cfg: MCConfig) -> tuple[np.ndarray, np.ndarray]:
    """Simulated (R_t^2, A_t) samples, cached: they do not depend on the weight."""
    key = (delta, t, cfg)
    if key not in _PAIR_CACHE:
        bundle = simulate_besq(BesselSpec(delta=delta), [t], cfg)[0]
        _PAIR_CACHE[key] = (bundle.terminal_variance, bundle.integrated_variance)
    return _PAIR_CACHE[key]


def _box_delta_ok(delta: float) -> bool:
    lo, hi = G_VALIDATED_BOX["delta"]
    return lo <= delta <= hi


def _gamma_tail(delta: float, weighted: bool) -> float:
    """Mass fraction of R_1^2 ~ Gamma(delta/2, 2) beyond the box edge.

    With weighted=True this is the R^2-weighted fraction E[Z 1{Z > c}]/E[Z],
    the right scale for biases of conditional ratios E[Z w]/E[w].
    """
    k = 0.5 * delta + (1.0 if weighted else 0.0)
    return float(gammaincc(k, 0.5 * G_VALIDATED_BOX["x_over_t"]))


# ---------------------------------------------------------------------------
# Zero correlation
# ---------------------------------------------------------------------------


def _zero_corr_quad(delta: float, a_arg: float, b_arg: float, n: int) -> float:
    """Conditional ratio 2 E[sqrt(Y) e] / E[e / sqrt(Y)] on the unit-time density.

    The exponent is max-shifted before exponentiating (the constant cancels
    in the ratio), so extreme arguments degrade to a boundary-dominated
    estimate instead of 0/0.
    """
    y, w, f = _a1_nodes(delta, n)
    expo = -a_arg / y - b_arg * y
    e = np.exp(expo - expo.max()) / np.sqrt(y) * w * f
    return 2.0 * float((e * y).sum() / e.sum())


def local_var_zero_corr(
    delta: float, t: float, l: float, config: SpecFunConfig = DEFAULT_CONFIG
) -> LocalVolPoint:
    """Mimicking local variance E[R_t^2 | ln S_t = l] at zero correlation.

    Evaluates -2 t (dk/db)/k at (l^2/2t^2, t^2/8) through the k-series; when
    the series budget is exhausted (small t^2/8) the same ratio is taken by
    1-D quadrature against the integrated-variance density.  Even in l by
    construction and strictly positive.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    if not t > 0:
        raise DomainError("t must be positive")
    a_arg = l * l / (2.0 * t * t)
    b_arg = t * t / 8.0
    try:
        ev_k, ev_db = k_pair(delta, a_arg, b_arg, config)
    except ConvergenceError:
        main = _zero_corr_quad(delta, a_arg, b_arg, _GL_1D)
        check = _zero_corr_quad(delta, a_arg, b_arg, _GL_1D // 2)
        sigma2 = t * main
        return LocalVolPoint(
            t=t, x=math.exp(l), sigma2=sigma2, method="quad", err=t * abs(main - check)
        )
    sigma2 = -2.0 * t * ev_db.value / ev_k.value
    # First-order propagation of the two truncation bounds through the ratio.
    err = 2.0 * t * (
        ev_db.truncation_bound / ev_k.value
        + abs(ev_db.value) * ev_k.truncation_bound / ev_k.value**2
    )
    return LocalVolPoint(
        t=t,
        x=math.exp(l),
        sigma2=sigma2,
        method="series",
        err=err,
        diagnostics=(ev_k, ev_db),
    )


# ---------------------------------------------------------------------------
# Alpha transform
# ---------------------------------------------------------------------------


def _alpha_quad_2d(
    delta: float, t: float, a: float, b: float, c: float, n: int
) -> tuple[float, float, float]:
    """(value, db, boundary fraction) of the alpha integrals on the box."""
    xx, yy, w2, g = _g1_grid(delta, n)
    expo = -((a - c * t * xx) ** 2) / (t * t * yy) - b * b * t * t * yy - b * c * t * xx
    base = np.exp(expo) / np.sqrt(yy) * g * w2
    total = float(base.sum())
    boundary = float(base[-1, :].sum() + base[:, -1].sum())
    value = total / t
    db = float((base * (-2.0 * b * t * t * yy - c * t * xx)).sum()) / t
    frac = boundary / total if total > 0.0 else math.inf
    return value, db, frac


def alpha_fn(
    delta: float,
    t: float,
    a: float,
    b: float,
    c: float,
    config: SpecFunConfig = DEFAULT_CONFIG,
    mc_config: MCConfig | None = None,
) -> AlphaResult:
    """alpha_t(a, b, c) = E[A_t^{-1/2} exp(-(a - c R_t^2)^2/A_t - b^2 A_t - b c R_t^2)].

    Returns the value and its partial derivative in b.  At c = 0 the variance
    state integrates out exactly and a 1-D rule against the integrated-
    variance density applies (this reduction equals scale_k(delta, t, a^2,
    b^2) analytically); otherwise the pair is integrated against the joint
    density on its validated box, deferring to Monte Carlo when the gamma
    tail bound or the boundary occupancy says the box truncates real mass.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    if not t > 0:
        raise DomainError("t must be positive")
    if not b > 0:
        raise DomainError("b must be positive")
    if c == 0.0:
        y, w, f = _a1_nodes(delta, _GL_1D)
        yh, wh, fh = _a1_nodes(delta, _GL_1D // 2)

        def pair(yv: np.ndarray, wv: np.ndarray, fv: np.ndarray) -> tuple[float, float]:
            e = np.exp(-a * a / (t * t * yv) - b * b * t * t * yv) / np.sqrt(yv) * wv * fv
            return float(e.sum()) / t, float((e * (-2.0 * b * t * t * yv)).sum()) / t

        value, db = pair(y, w, f)
        v2, d2 = pair(yh, wh, fh)
        return AlphaResult(value=value, db=db, method="quad", err=abs(value - v2))
    tail = _gamma_tail(delta, weighted=False)
    if _box_delta_ok(delta) and tail <= _QUAD_TAIL_TOL:
        value, db, frac = _alpha_quad_2d(delta, t, a, b, c, _GL_MAIN)
        if frac <= _BOUNDARY_TOL:
            v2, _, _ = _alpha_quad_2d(delta, t, a, b, c, _GL_CHECK)
            err = abs(value - v2) + tail * abs(value)
            return AlphaResult(value=value, db=db, method="quad", err=err)
    cfg = mc_config if mc_config is not None else _MC_FALLBACK
    z, av = _besq_pairs(delta, t, cfg)
    w = np.exp(-((a - c * z) ** 2) / av - b * b * av - b * c * z) / np.sqrt(av)
    dw = w * (-2.0 * b * av - c * z)
    value = float(w.mean())
    se = float(w.std(ddof=1)) / math.sqrt(w.size)
    return AlphaResult(value=value, db=float(dw.mean()), method="mc", err=se)


# ---------------------------------------------------------------------------
# Leverage correlation
# ---------------------------------------------------------------------------


def _corr_weights(
    delta: float, rho: float, t: float, l: float, xx: np.ndarray, yy: np.ndarray
) -> np.ndarray:
    """Conditional-Gaussian weight of ln S_t = l on unit-time (R^2, A) nodes.

    With rbar^2 = 1 - rho^2, conditioning ln S_t = rho (Z_t - delta t)/2
    + rbar I_t - A_t/2 on the variance path leaves a N(rho(z - delta t)/2
    - a/2, rbar^2 a) weight; constants independent of (z, a) are dropped
    and the exponent is max-shifted, both cancel in conditional ratios.
    """
    rbar = math.sqrt(1.0 - rho * rho)
    m = rho / (2.0 * rbar)
    mu = 1.0 / (2.0 * rbar)
    zb = (l + rho * delta * t / 2.0) / rbar
    expo = (
        -((zb - m * t * xx) ** 2) / (2.0 * t * t * yy)
        - 0.5 * mu * mu * t * t * yy
        + mu * m * t * xx
    )
    return np.exp(expo - expo.max()) / np.sqrt(yy)


def _corr_quad(
    delta: float, rho: float, t: float, l: float, n: int
) -> tuple[float, float]:
    """(conditional ratio E[Z|ln S = l], boundary fraction) on the box rule."""
    xx, yy, w2, g = _g1_grid(delta, n)
    w = _corr_weights(delta, rho, t, l, xx, yy) * g * w2
    num = t * xx * w
    ratio = float(num.sum() / w.sum())
    frac = float((num[-1, :].sum() + num[:, -1].sum()) / num.sum())
    return ratio, frac


def _corr_mc(
    delta: float, rho: float, t: float, l: float, cfg: MCConfig
) -> tuple[float, float]:
    """Monte Carlo conditional ratio with its delta-method standard error.

    The standard error carries an effective-sample-size floor: under tail
    conditioning the weight degenerates onto a few paths and the plain
    delta-method estimate collapses (the dominant path sits at the ratio),
    so sqrt(1/n_eff - 1/n) of the value is the honest scale.
    """
    z, av = _besq_pairs(delta, t, cfg)
    w = _corr_weights(delta, rho, t, l, z, av)
    sw = float(w.sum())
    ratio = float((w * z).sum()) / sw
    se = math.sqrt(float((w * w * (z - ratio) ** 2).sum())) / sw
    n_eff = sw * sw / float((w * w).sum())
    floor = abs(ratio) * math.sqrt(max(1.0 / n_eff - 1.0 / w.size, 0.0))
    return ratio, max(se, floor)


def local_var_corr(
    delta: float,
    rho: float,
    t: float,
    l: float,
    config: SpecFunConfig = DEFAULT_CONFIG,
    mc_config: MCConfig | None = None,
) -> LocalVolPoint:
    """Mimicking local variance E[R_t^2 | ln S_t = l] with leverage rho.

    At rho = 0 the conditional weight depends on the variance path through
    A_t alone and the zero-correlation route applies verbatim; otherwise
    the ratio is integrated against the joint (R_t^2, A_t) density on its
    validated box, falling back to Monte Carlo when the box would truncate
    real mass or the rule stops resolving the weight.
    """
    if not -1.0 < rho < 1.0:
        raise DomainError("rho must lie in (-1, 1)")
    if not delta > 0:
        raise DomainError("delta must be positive")
    if not t > 0:
        raise DomainError("t must be positive")
    if rho == 0.0:
        return local_var_zero_corr(delta, t, l, config)
    tail = _gamma_tail(delta, weighted=True)
    if _box_delta_ok(delta) and tail <= _QUAD_TAIL_TOL:
        sigma2, frac = _corr_quad(delta, rho, t, l, _GL_MAIN)
        check, _ = _corr_quad(delta, rho, t, l, _GL_CHECK)
        refine = abs(sigma2 - check)
        if frac <= _CORR_OCCUPANCY_TOL and refine <= 5e-3 * sigma2:
            return LocalVolPoint(
                t=t,
                x=math.exp(l),
                sigma2=sigma2,
                method="quad",
                err=refine + (tail + frac) * sigma2,
            )
    cfg = mc_config if mc_config is not None else _MC_FALLBACK
    sigma2, se = _corr_mc(delta, rho, t, l, cfg)
    return LocalVolPoint(t=t, x=math.exp(l), sigma2=sigma2, method="mc", err=se)


# ---------------------------------------------------------------------------
# Time-changed models
# ---------------------------------------------------------------------------


def _g_prime_fd(g: Callable[[float], float], t: float) -> float:
    """Central-difference g'(t) with a step kept inside (0, infinity)."""
    h = min(1e-6 * max(t, 1.0), 0.5 * t)
    return (g(t + h) - g(t - h)) / (2.0 * h)


def local_var_transformed(
    transform: TransformSpec,
    rho: float,
    t: float,
    x: float,
    config: SpecFunConfig = DEFAULT_CONFIG,
    mc_config: MCConfig | None = None,
) -> LocalVolPoint:
    """Local variance of the time-changed stock S~_t = S_{g(t)}.

    The mimicking surface rescales as sigma~^2(t, x) = g'(t) sigma^2(g(t),
    x / s0); the closed-form inner surface needs the variance clock started
    at zero, otherwise the Monte Carlo mimicking route (montecarlo.
    mimic_check) is the supported path.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not x > 0:
        raise DomainError("x must be positive")
    if transform.spec.start != 0.0:
        raise UnsupportedBranchError(
            "closed-form surfaces need the variance clock started at zero; "
            "use the Monte Carlo mimicking route for started clocks"
        )
    u = float(transform.g(t))
    if not u > 0:
        raise DomainError("g(t) must be positive")
    g_prime = _g_prime_fd(transform.g, t)
    l = math.log(x / transform.s0)
    base = local_var_corr(transform.spec.delta, rho, u, l, config, mc_config)
    return LocalVolPoint(
        t=t,
        x=x,
        sigma2=g_prime * base.sigma2,
        method=base.method,
        err=g_prime * base.err,
        diagnostics=base.diagnostics,
    )


def heston_transform(cir: CirSpec, s0: float = 1.0) -> TransformSpec:
    """TransformSpec of the CIR-variance (Heston) model via cir_bessel_map."""
    f, g, spec = cir_bessel_map(cir)
    return TransformSpec(f=f, g=g, spec=spec, s0=s0)


# ---------------------------------------------------------------------------
# Surfaces and export
# ---------------------------------------------------------------------------


def build_surface(
    t_nodes: np.ndarray,
    x_nodes: np.ndarray,
    *,
    delta: float | None = None,
    rho: float = 0.0,
    transform: TransformSpec | None = None,
    config: SpecFunConfig = DEFAULT_CONFIG,
    mc_config: MCConfig | None = None,
) -> tuple[LocalVolSurface, list[LocalVolPoint]]:
    """Evaluate the mimicking surface on a (t, x) grid, row-major in t.

    Either delta (plain squared-Bessel stock, S0 = 1) or transform must be
    given.  Points are evaluated sequentially in a fixed order, so the
    output is bit-identical across runs and worker settings.
    """
    if (delta is None) == (transform is None):
        raise DomainError("exactly one of delta and transform must be given")
    t_nodes = np.asarray(t_nodes, dtype=float)
    x_nodes = np.asarray(x_nodes, dtype=float)
    points: list[LocalVolPoint] = []
    for t in t_nodes:
        for x in x_nodes:
            if transform is not None:
                points.append(
                    local_var_transformed(transform, rho, float(t), float(x), config, mc_config)
                )
            else:
                points.append(
                    local_var_corr(delta, rho, float(t), math.log(float(x)), config, mc_config)
                )
    sigma2 = np.array([p.sigma2 for p in points]).reshape(t_nodes.size, x_nodes.size)
    return LocalVolSurface(t_nodes=t_nodes, x_nodes=x_nodes, sigma2=sigma2), points


def write_localvol_csv(points: list[LocalVolPoint], path: str) -> None:
    """Write evaluated points as `t,x,sigma2,method,err` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,sigma2,method,err\n")
        for p in points:
            fh.write(f"{p.t:.17g},{p.x:.17g},{p.sigma2:.17g},{p.method},{p.err:.17g}\n")


def read_localvol_csv(path: str) -> LocalVolSurface:
    """Rebuild a LocalVolSurface from the first three columns t,x,sigma2.

    Accepts both the five-column point dump above and plain t,x,sigma2
    tables; rows must fill a complete (t, x) grid.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, usecols=(0, 1, 2), ndmin=2)
    t_nodes = np.unique(data[:, 0])
    x_nodes = np.unique(data[:, 1])
    grid = np.full((len(t_nodes), len(x_nodes)), np.nan)
    t_index = {t: i for i, t in enumerate(t_nodes)}
    x_index = {x: j for j, x in enumerate(x_nodes)}
    for t, x, s2 in data:
        grid[t_index[t], x_index[x]] = s2
    if np.any(np.isnan(grid)):
        raise DomainError("local-vol CSV is not a full (t, x) grid")
    return LocalVolSurface(t_nodes=t_nodes, x_nodes=x_nodes, sigma2=grid)
