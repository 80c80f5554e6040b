"""Shared fixtures: figure-regime rates and per-geometry reference coefficients."""

import numpy as np
import pytest

import wgcharge as w

GAMMA = 0.01


@pytest.fixture
def figure_rates():
    """Equal couplings with both intrinsic losses at the waveguide rate."""
    return w.CouplingRates.equal_rates(GAMMA, kappa1=GAMMA, kappa2=GAMMA)


@pytest.fixture
def reference_coeffs(figure_rates):
    """Factory: resonant coefficients at a geometry's cancellation point."""

    def build(kind):
        return w.network_coefficients(
            kind, w.nonreciprocal_point(kind), figure_rates
        )

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(1729)
