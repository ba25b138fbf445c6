import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from kbalayage.specfun import (
    SERIES_SWITCH,
    BesselDomainError,
    UnsupportedOrderError,
    bessel_derivatives,
    bessel_j,
    bessel_y,
    bessel_zeros,
    first_positive_zero,
)

ORDERS = (0.0, 0.5, 1.0, 1.5)
T = np.linspace(0.1, 20.0, 1000)


@pytest.mark.parametrize("nu", ORDERS)
def test_against_reference_implementation(nu):
    t = np.linspace(0.05, 40, 2000)
    assert np.max(np.abs(bessel_j(nu, t) - special.jv(nu, t))) < 1e-11
    assert np.max(np.abs(bessel_y(nu, t) - special.yv(nu, t))) < 1e-11


def test_half_order_closed_forms():
    assert abs(bessel_j(0.5, math.pi)) < 1e-15
    assert bessel_j(0.5, math.pi / 2) == pytest.approx(2 / math.pi, abs=1e-14)
    assert abs(bessel_y(0.5, math.pi / 2)) < 1e-15
    assert bessel_y(0.5, math.pi) == pytest.approx(math.sqrt(2) / math.pi, abs=1e-14)
    t = 1.3
    expect = math.sqrt(2 / (math.pi * t)) * (math.sin(t) / t - math.cos(t))
    assert bessel_j(1.5, t) == pytest.approx(expect, rel=1e-13)


def test_values_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    for nu in (0.5, 1, 1.5):
        assert bessel_j(nu, 0.0) == 0.0


@pytest.mark.parametrize("nu", ORDERS)
def test_wronskian(nu):
    J = bessel_j(nu, T)
    Y = bessel_y(nu, T)
    dJ, dY = bessel_derivatives(nu, T)
    assert np.max(np.abs(J * dY - Y * dJ - 2 / (math.pi * T))) < 1e-10


@pytest.mark.parametrize("nu", (0.0, 0.5))
def test_cross_product(nu):
    lhs = bessel_j(nu, T) * bessel_y(nu + 1, T) - bessel_y(nu, T) * bessel_j(nu + 1, T)
    assert np.max(np.abs(lhs + 2 / (math.pi * T))) < 1e-10


def test_derivative_spot_values():
    dJ, _ = bessel_derivatives(0, 1.0)
    assert dJ == pytest.approx(-0.4400505857449335, abs=1e-12)
    # closed-form derivative of sqrt(2/(pi t)) sin t at pi/2
    t = math.pi / 2
    expect = math.sqrt(2 / math.pi) * (math.cos(t) / math.sqrt(t) - 0.5 * math.sin(t) * t**-1.5)
    assert bessel_derivatives(0.5, t)[0] == pytest.approx(expect, abs=1e-12)


def test_small_argument_limits():
    t = 1e-4
    # the log ratio converges like (gamma - log 2) / log t, so compare with the full asymptote
    asym = 2 / math.pi * (math.log(t / 2) + np.euler_gamma)
    assert bessel_y(0, t) / asym == pytest.approx(1, rel=1e-3)
    ratios = [math.pi / 2 * bessel_y(0, s) / math.log(s) for s in (1e-2, 1e-4, 1e-8, 1e-16)]
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 1) < 5e-3
    for nu in (0.5, 1.0, 1.5):
        lead_j = (t / 2) ** nu / math.gamma(nu + 1)
        assert bessel_j(nu, t) / lead_j == pytest.approx(1, rel=1e-3)
        lead_y = -math.gamma(nu) / math.pi * (2 / t) ** nu
        assert bessel_y(nu, t) / lead_y == pytest.approx(1, rel=1e-3)


@pytest.mark.parametrize("nu", (0.0, 1.0))
def test_seam_agreement(nu):
    below = bessel_j(nu, SERIES_SWITCH - 1e-12)
    above = bessel_j(nu, SERIES_SWITCH + 1e-12)
    assert abs(below - above) < 1e-9
    assert abs(bessel_y(nu, SERIES_SWITCH - 1e-12) - bessel_y(nu, SERIES_SWITCH + 1e-12)) < 1e-9


def test_first_zeros():
    assert abs(first_positive_zero(0.5) - math.pi) < 1e-10
    assert abs(first_positive_zero(0) - 2.4048255577) < 1e-8
    assert abs(first_positive_zero(1) - 3.8317059702) < 1e-8
    for nu in ORDERS:
        assert abs(bessel_j(nu, first_positive_zero(nu))) < 1e-9


def test_zero_iterator_matches_reference():
    zs = [z for _, z in zip(range(5), bessel_zeros(0, 5))]
    np.testing.assert_allclose(zs, special.jn_zeros(0, 5), atol=1e-10)


def test_errors():
    with pytest.raises(UnsupportedOrderError):
        bessel_j(2.0, 1.0)
    with pytest.raises(UnsupportedOrderError):
        first_positive_zero(0.25)
    with pytest.raises(BesselDomainError):
        bessel_j(0, -1.0)
    with pytest.raises(BesselDomainError):
        bessel_y(0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from((0.5, 1.0)), st.floats(0.1, 30.0))
def test_recurrence_property(nu, t):
    # C_{nu-1} + C_{nu+1} = (2 nu / t) C_nu, checked where all three orders are in scope
    if nu not in (0.5, 1.0):
        return
    lo = bessel_j(nu - 1, t) if nu == 1.0 else math.sqrt(2 / (math.pi * t)) * math.cos(t)
    hi = bessel_j(nu + 1, t) if nu == 0.5 else special.jv(2, t)
    assert lo + hi == pytest.approx(2 * nu / t * bessel_j(nu, t), abs=1e-12)
