"""Local-volatility surfaces implied by Bessel-driven stochastic volatility.

The package computes the mimicking local variance E[V_t | S_t = x] of
squared-Bessel and CIR (Heston) volatility models in closed form, checks
every analytic value against an independent Monte Carlo kernel estimator,
extracts local volatility from call price surfaces (Dupire) and prices back
through the forward PDE, and extends both directions to stochastic interest
rates (Vasicek) via the t-forward-measure covariance correction.

Module map:

* specfun: modified Bessel K and parabolic cylinder D evaluators.
* bessel: squared-Bessel/CIR specs, joint Laplace transforms, the k-series,
  and the joint density of (R_t^2, A_t).
* localvol: analytic local-variance routes (zero correlation, leverage,
  time-changed CIR clocks) and surface construction.
* montecarlo: exact BESQ sampling, model simulation, kernel regression,
  and the marginal-matching (mimicking) check.
* dupire: price-surface extraction and the Crank-Nicolson forward PDE.
* hybrid: Vasicek short rate, joint stock-rate simulation, the extended
  Dupire numerator, and forward-measure variance regressions.
* cli: the ``mimicvol`` command-line front end.
"""

__version__ = "0.1.0"

from .bessel import (
    G_VALIDATED_BOX,
    BesselSpec,
    CirSpec,
    SeriesEval,
    cir_bessel_map,
    density_a1,
    joint_density_g,
    k_pair,
    laplace_joint,
    scale_k,
)
from .dupire import (
    LocalVolSurface,
    PriceSurface,
    discount_from_forward,
    extract_local_vol,
    price_forward_pde,
    read_discount_csv,
    read_price_surface_csv,
    sigma2_interpolator,
    write_discount_csv,
    write_price_surface_csv,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateDensityError,
    DomainError,
    LowMassError,
    MimicvolError,
    UnsupportedBranchError,
)
from .hybrid import (
    HybridSlice,
    RatesSpec,
    extended_dupire,
    forward_sigma_T,
    hybrid_cov,
    rates_descriptors,
    simulate_hybrid,
    simulate_hybrid_grid,
    spot_mimic_var,
    write_hybrid_csv,
)
from .localvol import (
    AlphaResult,
    LocalVolPoint,
    TransformSpec,
    alpha_fn,
    build_surface,
    heston_transform,
    local_var_corr,
    local_var_transformed,
    local_var_zero_corr,
    read_localvol_csv,
    write_localvol_csv,
)
from .montecarlo import (
    CondEstimate,
    MCConfig,
    MimicCell,
    MimicReport,
    ModelSpec,
    PathBundle,
    call_price_stats,
    kernel_conditional,
    mimic_check,
    simulate_besq,
    simulate_model,
    write_path_csv,
)
from .specfun import SpecFunConfig, bessel_k, gamma_pochhammer, parabolic_d

__all__ = [
    "__version__",
    # specfun
    "SpecFunConfig",
    "bessel_k",
    "gamma_pochhammer",
    "parabolic_d",
    # bessel
    "BesselSpec",
    "CirSpec",
    "SeriesEval",
    "G_VALIDATED_BOX",
    "cir_bessel_map",
    "density_a1",
    "joint_density_g",
    "k_pair",
    "laplace_joint",
    "scale_k",
    # localvol
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
    # montecarlo
    "CondEstimate",
    "MCConfig",
    "MimicCell",
    "MimicReport",
    "ModelSpec",
    "PathBundle",
    "call_price_stats",
    "kernel_conditional",
    "mimic_check",
    "simulate_besq",
    "simulate_model",
    "write_path_csv",
    # dupire
    "LocalVolSurface",
    "PriceSurface",
    "discount_from_forward",
    "extract_local_vol",
    "price_forward_pde",
    "read_discount_csv",
    "read_price_surface_csv",
    "sigma2_interpolator",
    "write_discount_csv",
    "write_price_surface_csv",
    # hybrid
    "HybridSlice",
    "RatesSpec",
    "extended_dupire",
    "forward_sigma_T",
    "hybrid_cov",
    "rates_descriptors",
    "simulate_hybrid",
    "simulate_hybrid_grid",
    "spot_mimic_var",
    "write_hybrid_csv",
    # errors
    "MimicvolError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateDensityError",
    "DomainError",
    "LowMassError",
    "UnsupportedBranchError",
]
