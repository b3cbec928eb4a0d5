"""Monte Carlo engines and the kernel conditional-expectation estimator.

This module is the independent oracle for the analytic layers: squared
Bessel paths are sampled with the exact transition law (noncentral
chi-squared via a Poisson-mixed gamma), the correlated stock is assembled
from its closed-form decomposition

    ln S_t = (rho/2) (R_t^2 - delta t) + sqrt(1 - rho^2) I_t - A_t / 2,

and conditional expectations E[Y | X = x0] are estimated by Nadaraya-Watson
regression.  Time-changed models (CIR/Heston style) reuse the same engine on
the transformed clock: the stock of the time-changed model is the base stock
read at u = g(t), its variance state f(t) R^2_{g(t)} (the CIR variance when
the clock comes from a CirSpec), and its integrated variance A_{g(t)}, which
equals the calendar-time quadratic variation of the log-stock.

Randomness comes from a single counter-based Philox stream keyed by the
seed, with a fixed draw order per substep (Poisson, gamma, I-increment
normal for the exact scheme; driver normal, I-increment normal for Euler),
vectorized across paths.  Results are bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .bessel import BesselSpec, CirSpec, cir_bessel_map
from .dupire import sigma2_interpolator
from .errors import ConfigError, DomainError, LowMassError

if TYPE_CHECKING:  # pragma: no cover - annotations only
    from .dupire import LocalVolSurface
    from .hybrid import RatesSpec
    from .localvol import TransformSpec

__all__ = [
    "MCConfig",
    "ModelSpec",
    "PathBundle",
    "CondEstimate",
    "MimicCell",
    "MimicReport",
    "simulate_besq",
    "simulate_model",
    "kernel_conditional",
    "mimic_check",
    "call_price_stats",
    "write_path_csv",
]

_MODEL_KINDS = (
    "bessel_zero_corr",
    "bessel_corr",
    "transformed",
    "heston",
    "local_vol",
    "hybrid",
)


@dataclass(frozen=True)
class MCConfig:
    """Path count, per-unit-time step count, seed, scheme, and bandwidth rule."""

    paths: int = 100_000
    steps: int = 200
    seed: int = 0
    scheme: str = "exact_besq"
    bandwidth_rule: str = "silverman"
    bandwidth: float | None = None

    def __post_init__(self) -> None:
        if self.paths < 1:
            raise ConfigError("paths must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be positive")
        if self.scheme not in ("exact_besq", "euler"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "euler" and self.steps < 50:
            raise ConfigError("euler scheme requires steps >= 50 per unit time")
        if self.bandwidth_rule not in ("silverman", "fixed"):
            raise ConfigError(f"unknown bandwidth_rule {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed" and not (
            self.bandwidth is not None and self.bandwidth > 0
        ):
            raise ConfigError("fixed bandwidth_rule requires a positive bandwidth")


@dataclass(frozen=True)
class ModelSpec:
    """A simulatable model: kind plus the pieces that kind requires.

    For kind "transformed" the initial stock is taken from transform.s0; the
    other kinds use s0.  drift is a deterministic short-rate function r(t)
    entering the stock as exp(int_0^t r ds).
    """

    kind: str
    spec: BesselSpec | CirSpec | None = None
    rho: float = 0.0
    transform: "TransformSpec | None" = None
    rates: "RatesSpec | None" = None
    surface: "LocalVolSurface | None" = None
    s0: float = 1.0
    drift: Callable[[float], float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [-1, 1]")
        if not self.s0 > 0:
            raise ConfigError("s0 must be positive")
        if self.kind == "bessel_zero_corr":
            if not isinstance(self.spec, BesselSpec):
                raise ConfigError("bessel_zero_corr requires a BesselSpec")
            if self.rho != 0.0:
                raise ConfigError("bessel_zero_corr has rho = 0 by definition")
        elif self.kind == "bessel_corr":
            if not isinstance(self.spec, BesselSpec):
                raise ConfigError("bessel_corr requires a BesselSpec")
        elif self.kind == "transformed":
            if self.transform is None:
                raise ConfigError("transformed kind requires a TransformSpec")
        elif self.kind == "heston":
            if not isinstance(self.spec, CirSpec):
                raise ConfigError("heston kind requires a CirSpec")
        elif self.kind == "local_vol":
            if self.surface is None:
                raise ConfigError("local_vol kind requires a surface")
        elif self.kind == "hybrid":
            if self.rates is None:
                raise ConfigError("hybrid kind requires a RatesSpec")
            if self.surface is None and not isinstance(self.spec, CirSpec):
                raise ConfigError("hybrid kind requires a surface or a CirSpec")


@dataclass(frozen=True)
class PathBundle:
    """Terminal-time samples of one simulation run.

    For pure Bessel runs terminal_log_stock is the zero-correlation stock
    I_t - A_t/2 (S0 = 1, no drift), so I_t is recoverable as
    terminal_log_stock + integrated_variance / 2.  Rate fields are zero for
    models without stochastic rates.  clamp_count reports how many path-step
    local-vol lookups were clamped to the surface boundary.
    """

    terminal_log_stock: np.ndarray
    terminal_variance: np.ndarray
    integrated_variance: np.ndarray
    integrated_rate: np.ndarray
    terminal_rate: np.ndarray
    seed: int
    t: float
    clamp_count: int = 0

    def __post_init__(self) -> None:
        n = len(self.terminal_log_stock)
        for name in (
            "terminal_variance",
            "integrated_variance",
            "integrated_rate",
            "terminal_rate",
        ):
            if len(getattr(self, name)) != n:
                raise DomainError(f"{name} length differs from terminal_log_stock")
        if not self.t > 0:
            raise DomainError("t must be positive")
        if np.any(self.integrated_variance < 0):
            raise DomainError("integrated_variance must be nonnegative")

    @property
    def paths(self) -> int:
        return len(self.terminal_log_stock)


@dataclass(frozen=True)
class CondEstimate:
    """A kernel-regression point estimate with its standard error."""

    value: float
    std_error: float
    n_effective: float

    def __post_init__(self) -> None:
        if not self.std_error > 0:
            raise DomainError("std_error must be positive")
        if not self.n_effective > 1:
            raise DomainError("n_effective must exceed 1")


# ---------------------------------------------------------------------------
# Core path engines
# ---------------------------------------------------------------------------


def _check_grid(t_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("t_grid must be a nonempty 1-D sequence")
    if grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("t_grid must be strictly increasing and positive")
    return grid


def _substeps(length: float, steps_per_unit: int) -> int:
    return max(1, int(math.ceil(length * steps_per_unit - 1e-12)))


def _besq_snapshots(
    spec: BesselSpec,
    t_grid: np.ndarray,
    cfg: MCConfig,
    rng: np.random.Generator,
    steps_per_unit: int | None = None,
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """March (R^2, A, I) over the grid; one (v, a, i) triple per grid time.

    Exact scheme: the BESQ_delta transition over h starting from v is
    Gamma(delta/2 + J, scale 2h) with J ~ Poisson(v / 2h).  A_t accumulates
    by trapezoid, I_t by midpoint-variance normal increments.
    """
    n = cfg.paths
    steps = cfg.steps if steps_per_unit is None else steps_per_unit
    v = np.full(n, spec.start**2)
    a = np.zeros(n)
    i_acc = np.zeros(n)
    out = []
    t_prev = 0.0
    half_delta = 0.5 * spec.delta
    exact = cfg.scheme == "exact_besq"
    for t_snap in t_grid:
        m = _substeps(t_snap - t_prev, steps)
        h = (t_snap - t_prev) / m
        for _ in range(m):
            if exact:
                j = rng.poisson(v / (2.0 * h))
                v_new = rng.gamma(half_delta + j, 2.0 * h)
            else:
                zeta = rng.standard_normal(n)
                v_pos = np.maximum(v, 0.0)
                v_new = v + spec.delta * h + 2.0 * np.sqrt(v_pos * h) * zeta
            v_mid = (
                0.5 * (v + v_new) if exact else 0.5 * (np.maximum(v, 0.0) + np.maximum(v_new, 0.0))
            )
            v_mid = np.maximum(v_mid, 0.0)
            xi = rng.standard_normal(n)
            a += v_mid * h
            i_acc += np.sqrt(v_mid * h) * xi
            v = v_new
        t_prev = t_snap
        v_out = v if exact else np.maximum(v, 0.0)
        out.append((v_out.copy(), a.copy(), i_acc.copy()))
    return out


def simulate_besq(
    spec: BesselSpec, t_grid: Sequence[float], cfg: MCConfig
) -> list[PathBundle]:
    """Simulate a BESQ_delta started at spec.start^2; one bundle per grid time.

    Each bundle's terminal_log_stock holds the zero-correlation stock
    I_t - A_t / 2 so that a single run serves both the (R^2, A) oracle uses
    and stock-level checks.
    """
    grid = _check_grid(t_grid)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    zeros = np.zeros(cfg.paths)
    bundles = []
    for t_snap, (v, a, i_acc) in zip(grid, _besq_snapshots(spec, grid, cfg, rng)):
        bundles.append(
            PathBundle(
                terminal_log_stock=i_acc - 0.5 * a,
                terminal_variance=v,
                integrated_variance=a,
                integrated_rate=zeros.copy(),
                terminal_rate=zeros.copy(),
                seed=cfg.seed,
                t=float(t_snap),
            )
        )
    return bundles


def recover_orthogonal_integral(bundle: PathBundle) -> np.ndarray:
    """I_t = int_0^t R dbeta from a Bessel bundle (see PathBundle docstring)."""
    return bundle.terminal_log_stock + 0.5 * bundle.integrated_variance


def assemble_correlated_log_stock(
    bundle: PathBundle, delta: float, rho: float, s0: float = 1.0
) -> np.ndarray:
    """ln S_t of the correlated model from a zero-correlation Bessel bundle.

    Reuses the same (R^2, A, I) draws for any rho (common random numbers).
    """
    i_acc = recover_orthogonal_integral(bundle)
    return (
        math.log(s0)
        + 0.5 * rho * (bundle.terminal_variance - delta * bundle.t)
        + math.sqrt(1.0 - rho * rho) * i_acc
        - 0.5 * bundle.integrated_variance
    )


def _drift_integral(drift: Callable[[float], float] | None, t: float) -> float:
    if drift is None:
        return 0.0
    val, _ = quad(drift, 0.0, t, limit=200)
    return val


def _deterministic_rate_fields(
    drift: Callable[[float], float] | None, drift_int: float, t: float, paths: int
) -> tuple[np.ndarray, np.ndarray]:
    """(integrated_rate, terminal_rate) columns for a deterministic drift."""
    if drift is None:
        zeros = np.zeros(paths)
        return zeros, zeros.copy()
    return np.full(paths, drift_int), np.full(paths, float(drift(t)))


def _local_vol_snapshots(
    surface,
    s0: float,
    drift: Callable[[float], float] | None,
    t_grid: np.ndarray,
    cfg: MCConfig,
    rng: np.random.Generator,
) -> tuple[list[tuple[np.ndarray, np.ndarray, np.ndarray]], int]:
    """Log-Euler marching of d ln X = (r - sigma^2/2) dt + sigma dW."""
    sigma2_fn, counter = sigma2_interpolator(surface)
    n = cfg.paths
    ln_x = np.full(n, math.log(s0))
    int_var = np.zeros(n)
    out = []
    t_prev = 0.0
    for t_snap in t_grid:
        m = _substeps(t_snap - t_prev, cfg.steps)
        h = (t_snap - t_prev) / m
        for k in range(m):
            t_k = t_prev + k * h
            s2 = np.maximum(sigma2_fn(t_k, ln_x), 0.0)
            r_k = drift(t_k) if drift is not None else 0.0
            ln_x += (r_k - 0.5 * s2) * h + np.sqrt(s2 * h) * rng.standard_normal(n)
            int_var += s2 * h
        t_prev = t_snap
        out.append((ln_x.copy(), np.maximum(sigma2_fn(t_prev, ln_x), 0.0), int_var.copy()))
    return out, counter["clamped"]


def simulate_model(model: ModelSpec, t: float, cfg: MCConfig) -> PathBundle:
    """Terminal samples of the given model at time t (see ModelSpec kinds)."""
    if not t > 0:
        raise DomainError("t must be positive")
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    drift_int = _drift_integral(model.drift, t)
    int_r, term_r = _deterministic_rate_fields(model.drift, drift_int, t, cfg.paths)

    if model.kind in ("bessel_zero_corr", "bessel_corr"):
        spec = model.spec
        (v, a, i_acc), = _besq_snapshots(spec, np.array([t]), cfg, rng)
        rho = model.rho
        ln_s = (
            math.log(model.s0)
            + drift_int
            + 0.5 * rho * (v - spec.delta * t)
            + math.sqrt(1.0 - rho * rho) * i_acc
            - 0.5 * a
        )
        return PathBundle(ln_s, v, a, int_r, term_r, cfg.seed, t)

    if model.kind in ("transformed", "heston"):
        if model.kind == "heston":
            f, g, spec = cir_bessel_map(model.spec)
            s0 = model.s0
        else:
            tr = model.transform
            f, g, spec = tr.f, tr.g, tr.spec
            s0 = tr.s0
        u = float(g(t))
        if not u > 0:
            raise DomainError("transformed clock g(t) must be positive")
        # One base-model run on the transformed clock: S_t = S~_{g(t)}, with
        # the substep count matched to cfg.steps per unit of calendar time.
        steps_u = max(1, int(math.ceil(cfg.steps * t / u)))
        (z, a_u, i_u), = _besq_snapshots(spec, np.array([u]), cfg, rng, steps_per_unit=steps_u)
        rho = model.rho
        ln_s = (
            math.log(s0)
            + drift_int
            + 0.5 * rho * (z - spec.delta * u)
            + math.sqrt(1.0 - rho * rho) * i_u
            - 0.5 * a_u
        )
        # Variance state of the time-changed model: f(t) R^2_{g(t)} (the CIR
        # variance V_t when the clock comes from a CirSpec).
        return PathBundle(ln_s, float(f(t)) * z, a_u, int_r, term_r, cfg.seed, t)

    if model.kind == "local_vol":
        snapshots, clamped = _local_vol_snapshots(
            model.surface, model.s0, model.drift, np.array([t]), cfg, rng
        )
        ln_x, var_t, int_var = snapshots[0]
        return PathBundle(
            ln_x, var_t, int_var, int_r, term_r, cfg.seed, t, clamp_count=clamped
        )

    # hybrid: stochastic-rate dynamics live next to the rate analytics
    from .hybrid import simulate_hybrid

    return simulate_hybrid(model, t, cfg)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _silverman_bandwidth(x: np.ndarray) -> float:
    n = len(x)
    sd = float(np.std(x))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        raise DomainError("conditioning sample is degenerate (zero spread)")
    return 0.9 * spread * n ** (-0.2)


def kernel_conditional(
    x_samples: np.ndarray, y_samples: np.ndarray, x0: float, cfg: MCConfig
) -> CondEstimate:
    """Nadaraya-Watson estimate of E[Y | X = x0] with a Gaussian kernel.

    The standard error is the usual weighted-residual form
    sum w^2 (y - m)^2 / (sum w)^2 and n_effective = (sum w)^2 / sum w^2;
    below 30 effective points the estimate is refused as undersampled.
    """
    x = np.asarray(x_samples, dtype=float)
    y = np.asarray(y_samples, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y samples must be equal-length 1-D arrays")
    if len(x) < 1000:
        raise DomainError("kernel regression requires at least 1000 samples")
    h = cfg.bandwidth if cfg.bandwidth_rule == "fixed" else _silverman_bandwidth(x)
    u = (x - x0) / h
    with np.errstate(under="ignore"):
        w = np.exp(-0.5 * u * u)
    sw = float(np.sum(w))
    sw2 = float(np.sum(w * w))
    if sw <= 0 or sw2 <= 0:
        raise LowMassError(f"no kernel mass at x0 = {x0}")
    n_eff = sw * sw / sw2
    if n_eff < 30.0:
        raise LowMassError(
            f"effective sample size {n_eff:.1f} below 30 at x0 = {x0}"
        )
    value = float(np.sum(w * y) / sw)
    var = float(np.sum(w * w * (y - value) ** 2)) / (sw * sw)
    se = math.sqrt(var)
    if se == 0.0:
        se = float(np.finfo(float).tiny)  # constant-Y regression is exact
    return CondEstimate(value=value, std_error=se, n_effective=n_eff)


def call_price_stats(ln_s: np.ndarray, strike: float) -> tuple[float, float]:
    """Mean and standard error of the undiscounted call payoff (S - K)^+."""
    payoff = np.maximum(np.exp(ln_s) - strike, 0.0)
    n = len(payoff)
    price = float(np.mean(payoff))
    se = float(np.std(payoff)) / math.sqrt(n)
    return price, se


@dataclass(frozen=True)
class MimicCell:
    t: float
    strike: float
    price_sv: float
    se_sv: float
    price_lv: float
    se_lv: float
    passed: bool


@dataclass(frozen=True)
class MimicReport:
    cells: tuple[MimicCell, ...] = field(default_factory=tuple)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.cells)

    @property
    def n_failed(self) -> int:
        return sum(not c.passed for c in self.cells)


def _stochastic_snapshots(
    model: ModelSpec, t_grid: np.ndarray, cfg: MCConfig
) -> list[np.ndarray]:
    """ln S_t at each grid time for the stochastic side of mimic_check."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    if model.kind in ("bessel_zero_corr", "bessel_corr"):
        spec = model.spec
        snaps = _besq_snapshots(spec, t_grid, cfg, rng)
        out = []
        for t_snap, (v, a, i_acc) in zip(t_grid, snaps):
            out.append(
                math.log(model.s0)
                + _drift_integral(model.drift, float(t_snap))
                + 0.5 * model.rho * (v - spec.delta * t_snap)
                + math.sqrt(1.0 - model.rho**2) * i_acc
                - 0.5 * a
            )
        return out
    if model.kind == "local_vol":
        snaps, _ = _local_vol_snapshots(
            model.surface, model.s0, model.drift, t_grid, cfg, rng
        )
        return [ln_x for ln_x, _, _ in snaps]
    # transformed/heston/hybrid: one full run per requested time
    return [
        simulate_model(model, float(t_snap), cfg).terminal_log_stock for t_snap in t_grid
    ]


def mimic_check(
    model: ModelSpec,
    surface,
    t_list: Sequence[float],
    strikes: Sequence[float],
    cfg: MCConfig,
) -> MimicReport:
    """Marginal-matching check: stochastic model vs its local-vol SDE.

    Simulates both the stochastic-volatility model and d Sigma / Sigma =
    sigma(t, Sigma) dW with the given surface (independent seeds), compares
    undiscounted call prices per (t, K) cell at 3 combined standard errors.
    """
    if cfg.paths < 1000:
        raise ConfigError("mimic_check requires paths >= 1000")
    t_grid = _check_grid(t_list)
    if float(t_grid[-1]) > float(np.max(surface.t_nodes)) + 1e-9:
        raise DomainError("surface does not cover the requested maturities")
    sv_side = _stochastic_snapshots(model, t_grid, cfg)
    lv_cfg = replace(cfg, seed=cfg.seed + 1)
    rng = np.random.Generator(np.random.Philox(lv_cfg.seed))
    lv_snaps, _ = _local_vol_snapshots(
        surface, model.s0, model.drift, t_grid, lv_cfg, rng
    )
    cells = []
    for t_snap, ln_sv, (ln_lv, _, _) in zip(t_grid, sv_side, lv_snaps):
        for k in strikes:
            p_sv, se_sv = call_price_stats(ln_sv, float(k))
            p_lv, se_lv = call_price_stats(ln_lv, float(k))
            combined = math.hypot(se_sv, se_lv)
            passed = abs(p_sv - p_lv) <= 3.0 * combined
            cells.append(
                MimicCell(float(t_snap), float(k), p_sv, se_sv, p_lv, se_lv, passed)
            )
    return MimicReport(cells=tuple(cells))


# ---------------------------------------------------------------------------
# Auxiliary oracles and exports
# ---------------------------------------------------------------------------


def euler_cir_terminal(cir: CirSpec, t: float, cfg: MCConfig) -> np.ndarray:
    """Full-truncation Euler samples of a CIR variance at t (test oracle)."""
    if cfg.steps < 50:
        raise ConfigError("euler CIR requires steps >= 50 per unit time")
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n = cfg.paths
    m = _substeps(t, cfg.steps)
    h = t / m
    v = np.full(n, cir.v0)
    for _ in range(m):
        v_pos = np.maximum(v, 0.0)
        v = (
            v
            + cir.kappa * (cir.theta - v_pos) * h
            + cir.eta * np.sqrt(v_pos * h) * rng.standard_normal(n)
        )
    return np.maximum(v, 0.0)


def write_path_csv(bundle: PathBundle, path) -> None:
    """Dump a bundle as CSV with header path_id,ln_s,v,int_v,int_r,r."""
    data = np.column_stack(
        [
            np.arange(bundle.paths, dtype=float),
            bundle.terminal_log_stock,
            bundle.terminal_variance,
            bundle.integrated_variance,
            bundle.integrated_rate,
            bundle.terminal_rate,
        ]
    )
    np.savetxt(
        path,
        data,
        delimiter=",",
        header="path_id,ln_s,v,int_v,int_r,r",
        comments="",
        fmt=["%d", "%.17g", "%.17g", "%.17g", "%.17g", "%.17g"],
    )
