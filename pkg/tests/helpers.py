"""Shared oracles for the test suite: closed forms independent of mimicvol."""

from __future__ import annotations

import math

import numpy as np


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bs_call(spot: float, strike: float, t: float, sigma: float, rate: float = 0.0) -> float:
    """Discounted Black-Scholes call price with constant rate."""
    if t <= 0.0:
        return max(spot - strike, 0.0)
    fwd = spot * math.exp(rate * t)
    sq = sigma * math.sqrt(t)
    d1 = (math.log(fwd / strike) + 0.5 * sq * sq) / sq
    return math.exp(-rate * t) * (fwd * norm_cdf(d1) - strike * norm_cdf(d1 - sq))


def bs_surface(maturities, strikes, sigma_of_t, rate: float = 0.0, spot: float = 1.0):
    """Price grid with maturity-dependent implied volatility sigma_of_t(t)."""
    return np.array(
        [[bs_call(spot, k, t, sigma_of_t(t), rate) for k in strikes] for t in maturities]
    )
