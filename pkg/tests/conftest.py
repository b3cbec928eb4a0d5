"""Session-scoped Monte Carlo fixtures shared across test modules.

The heavy simulation runs (the 1e6-path oracle in particular) are produced
once per session and reused by both the module tests and the acceptance
suite; seeds are fixed so every assertion is deterministic.
"""

import pytest

from mimicvol.bessel import BesselSpec, CirSpec
from mimicvol.montecarlo import MCConfig, ModelSpec, simulate_besq, simulate_model


@pytest.fixture(scope="session")
def besq2_1m():
    """delta = 2 BESQ run, 1e6 paths, bundles at t = 0.5 and t = 1.0.

    The bundles' terminal_log_stock is the zero-correlation stock, so one
    run serves the analytic-vs-kernel comparisons at both maturities.
    """
    cfg = MCConfig(paths=1_000_000, steps=200, seed=101)
    half, one = simulate_besq(BesselSpec(delta=2.0), [0.5, 1.0], cfg)
    return {"cfg": cfg, 0.5: half, 1.0: one}


@pytest.fixture(scope="session")
def corr_bundle():
    """rho = -0.5 correlated squared-Bessel stock at t = 1, 400k paths."""
    cfg = MCConfig(paths=400_000, steps=200, seed=103)
    model = ModelSpec(kind="bessel_corr", spec=BesselSpec(delta=2.0), rho=-0.5)
    return {"cfg": cfg, "bundle": simulate_model(model, 1.0, cfg)}


@pytest.fixture(scope="session")
def heston_bundle():
    """Zero-leverage CIR-variance stock at t = 1, 400k paths, v0 = 0."""
    cir = CirSpec(kappa=2.0, eta=0.4, theta=0.04, v0=0.0)
    cfg = MCConfig(paths=400_000, steps=200, seed=105)
    model = ModelSpec(kind="heston", spec=cir)
    return {"cfg": cfg, "cir": cir, "bundle": simulate_model(model, 1.0, cfg)}
