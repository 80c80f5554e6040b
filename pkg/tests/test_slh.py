"""Composition algebra for the two-mode waveguide network elements."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import wgcharge as w
from wgcharge import (
    SLHTriplet,
    chain,
    concatenate,
    coupling_point,
    extract_coefficients,
    identity_element,
    phase_element,
    series,
)
from wgcharge.errors import UnsupportedNetworkError

phase_st = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def _triplets_close(a, b, atol=1e-12):
    assert len(a.scattering) == len(b.scattering)
    for sa, sb in zip(a.scattering, b.scattering):
        assert abs(sa - sb) <= atol
    np.testing.assert_allclose(np.array(a.coupling), np.array(b.coupling), atol=atol)
    np.testing.assert_allclose(a.hamiltonian, b.hamiltonian, atol=atol)


def test_zero_phase_is_the_identity():
    el = phase_element(0.0)
    ident = identity_element()
    assert el.scattering == ident.scattering
    assert el.coupling == ident.coupling
    assert not el.hamiltonian.any()


def test_half_turn_phase_flips_the_field_sign():
    (s,) = phase_element(math.pi).scattering
    assert abs(s + 1.0) < 1e-12


def test_phase_element_rejects_nonfinite():
    with pytest.raises(ValueError):
        phase_element(math.inf)


@given(phase_st, phase_st)
def test_phases_add_under_series(a, b):
    (s,) = series(phase_element(a), phase_element(b)).scattering
    assert abs(s - cmath.exp(1j * (a + b))) < 1e-12


def test_coupling_point_coefficient_value():
    el = coupling_point(2, 0.6, 0.7)
    c1, c2 = el.coupling[0]
    assert c1 == 0.0
    assert abs(c2 - math.sqrt(0.3) * cmath.exp(0.7j)) < 1e-15


def test_zero_rate_point_couples_nothing():
    el = coupling_point(2, 0.0, 1.3)
    assert el.coupling == ((0.0j, 0.0j),)
    assert abs(el.scattering[0] - 1.0) < 1e-15


def test_coupling_point_validation():
    with pytest.raises(ValueError):
        coupling_point(3, 1.0, 0.0)
    with pytest.raises(ValueError):
        coupling_point(1, -1.0, 0.0)


def test_coupling_point_carries_bare_detuning():
    h = np.diag([0.25, 0.0]).astype(complex)
    el = coupling_point(1, 1.0, 0.0, hamiltonian=h)
    np.testing.assert_allclose(el.hamiltonian, h)
    np.testing.assert_allclose(el.bare_detuning, h)


def _random_element(rng):
    if rng.integers(3) == 0:
        return phase_element(float(rng.uniform(-math.pi, math.pi)))
    mode = int(rng.integers(1, 3))
    return coupling_point(
        mode, float(rng.uniform(0.0, 2.0)), float(rng.uniform(-math.pi, math.pi))
    )


def test_series_is_associative(rng):
    for _ in range(200):
        a, b, c = (_random_element(rng) for _ in range(3))
        _triplets_close(series(series(a, b), c), series(a, series(b, c)))


def test_chain_is_the_right_fold_of_series(rng):
    for _ in range(50):
        a, b, c, d = (_random_element(rng) for _ in range(4))
        _triplets_close(chain(a, b, c, d), series(a, series(b, series(c, d))))


def test_empty_chain_is_identity():
    _triplets_close(chain(), identity_element())


@given(phase_st, phase_st, st.floats(min_value=0.0, max_value=3.0))
@settings(max_examples=60)
def test_same_mode_double_pass_interference(phi, theta, gamma):
    """Two points on one mode through a phase gap add their path amplitudes."""
    net = chain(
        coupling_point(1, gamma, theta),
        phase_element(phi),
        coupling_point(1, gamma, 0.0),
    )
    c1, c2 = net.coupling[0]
    root = math.sqrt(gamma / 2.0)
    assert abs(c1 - root * (cmath.exp(1j * theta) + cmath.exp(1j * phi))) < 1e-12
    assert c2 == 0.0
    coeffs = extract_coefficients(net, 0.0, 0.0)
    assert abs(coeffs.decay_1 - gamma * (1.0 + math.cos(phi - theta))) < 1e-12


def test_three_point_right_channel_coupling_vector():
    """Near mode couples once upstream, far mode twice with a local phase."""
    gamma, phiw, phi2, theta2 = 0.8, 1.1, 0.4, 2.2
    net = chain(
        coupling_point(2, gamma, theta2),
        phase_element(phi2),
        coupling_point(2, gamma, 0.0),
        phase_element(phiw),
        coupling_point(1, gamma, 0.0),
    )
    ((c1, c2),) = net.coupling
    root = math.sqrt(gamma / 2.0)
    assert abs(c1 - root * cmath.exp(1j * (phiw + phi2))) < 1e-12
    assert abs(c2 - root * (cmath.exp(1j * phi2) + cmath.exp(1j * theta2))) < 1e-12


def test_concatenate_stacks_channels():
    a = coupling_point(1, 1.0, 0.3)
    b = coupling_point(2, 2.0, -0.4)
    net = concatenate(a, b)
    assert net.n_channels == 2
    assert net.scattering == a.scattering + b.scattering
    assert net.coupling == a.coupling + b.coupling
    np.testing.assert_allclose(net.hamiltonian, a.hamiltonian + b.hamiltonian)


def test_series_requires_single_channel_elements():
    two = concatenate(identity_element(), identity_element())
    with pytest.raises(ValueError):
        series(two, identity_element())


def test_extraction_rejects_more_than_two_channels():
    net = concatenate(
        concatenate(identity_element(), identity_element()), identity_element()
    )
    with pytest.raises(UnsupportedNetworkError):
        extract_coefficients(net, 0.0, 0.0)


def test_extraction_rejects_negative_intrinsic_rates():
    with pytest.raises(ValueError):
        extract_coefficients(identity_element(), -0.1, 0.0)


def test_triplet_rejects_nonunit_scattering():
    with pytest.raises(ValueError):
        SLHTriplet((0.5 + 0.0j,), ((0.0j, 0.0j),), np.zeros((2, 2), dtype=complex))


def test_triplet_rejects_nonhermitian_hamiltonian():
    h = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    with pytest.raises(ValueError):
        SLHTriplet((1.0 + 0.0j,), ((0.0j, 0.0j),), h)


def test_triplet_rejects_channel_count_mismatch():
    with pytest.raises(ValueError):
        SLHTriplet(
            (1.0 + 0.0j, 1.0 + 0.0j),
            ((0.0j, 0.0j),),
            np.zeros((2, 2), dtype=complex),
        )


def test_extracted_decays_are_channel_sums():
    net = concatenate(coupling_point(1, 1.2, 0.0), coupling_point(1, 0.8, 2.0))
    coeffs = extract_coefficients(net, 0.0, 0.0)
    assert abs(coeffs.decay_1 - (0.6 + 0.4)) < 1e-15
    assert coeffs.decay_2 == 0.0
    assert coeffs.collective == 0.0


def test_collective_rate_ordering_matches_cross_dissipator():
    # one shared channel: coefficient product coeff1 * conj(coeff2)
    down = coupling_point(2, 2.0, 0.9)
    net = series(down, coupling_point(1, 2.0, 0.0))
    coeffs = extract_coefficients(net, 0.0, 0.0)
    assert abs(coeffs.collective - cmath.exp(-0.9j)) < 1e-12
