import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hotspots import bessel
from hotspots.bessel import (bessel_i, bessel_i_derivative, envelope_ratio, integral_log_iv, log_iv, log_iv_upper,
                             select_method, series_log_iv, small_z_ratio, uniform_log_iv)

mpmath.mp.dps = 40


def oracle_log_iv(g, z):
    return float(mpmath.log(mpmath.besseli(g, z)))


# -- examples --------------------------------------------------------------------

def test_half_order_closed_form():
    ev = bessel_i(0.5, 1.0)
    assert abs(ev.value - math.sqrt(2 / math.pi) * math.sinh(1.0)) < 1e-14
    assert round(ev.value, 5) == 0.93767
    assert ev.method == "series"


def test_zero_argument():
    assert bessel_i(1.5, 0.0).value == 0.0
    assert bessel_i(1.5, 0.0).log_value == -math.inf
    assert bessel_i(0.0, 0.0).value == 1.0


@pytest.mark.parametrize("bad", [(-1.0, 1.0), (1.0, -1.0), (math.nan, 1.0), (1.0, math.inf)])
def test_rejects_invalid(bad):
    with pytest.raises(ValueError):
        bessel_i(*bad)


def test_derivative_examples():
    h = 1e-5
    fd = (bessel_i(0.5, 1 + h).value - bessel_i(0.5, 1 - h).value) / (2 * h)
    assert abs(bessel_i_derivative(0.5, 1.0) - fd) <= 1e-6 * abs(fd)
    assert bessel_i_derivative(2.0, 0.0) == 0.0
    assert bessel_i_derivative(2.0, 1e-8) < 1e-8
    z = 2.0
    i15 = math.sqrt(2 / (math.pi * z)) * (math.cosh(z) - math.sinh(z) / z)
    i05 = math.sqrt(2 / (math.pi * z)) * math.sinh(z)
    assert abs(bessel_i_derivative(0.5, z) - (i15 + 0.25 * i05)) < 1e-13
    with pytest.raises(ValueError):
        bessel_i_derivative(0.5, 0.0)


def test_small_z_ratio_examples():
    assert abs(small_z_ratio(1.5, 1e-4) - 1) < 1e-7
    # the next term, z^4 / (32 (g+1)(g+2)), is 8e-7 here
    assert abs(small_z_ratio(0.5, 0.1) - (1 + 0.01 / 6)) < 1e-6


# -- high-precision oracle -------------------------------------------------------------

def test_against_mpmath_random_grid():
    rng = np.random.default_rng(7)
    g = rng.uniform(0, 60, 300)
    z = np.concatenate([rng.uniform(0, 30, 150), rng.uniform(30, 700, 150)])
    got = log_iv(g, z)
    for gi, zi, lv in zip(g, z, got):
        ref = oracle_log_iv(gi, zi)
        # 1e-10 relative on the value is 1e-10 absolute on the log
        assert abs(lv - ref) <= 1e-10, (gi, zi)


@pytest.mark.parametrize("g", [0.0, 0.5, 1.0, 9.99, 10.0, 30.0, 60.0])
@pytest.mark.parametrize("z", [1e-12, 1e-3, 0.7, 19.99, 20.01, 75.0, 400.0, 700.0])
def test_against_mpmath_edges(g, z):
    assert abs(log_iv(g, z) - oracle_log_iv(g, z)) <= 1e-10


def test_overflow_handled_in_log_domain():
    ev = bessel_i(0.0, 700.0)
    assert math.isfinite(ev.log_value) and ev.log_value > 690
    assert np.isfinite(log_iv(2.0, 700.0))


# -- route agreement (reproduces the switchover constants) -------------------------------

def test_series_integral_overlap():
    g = np.linspace(0.0, bessel.UNIFORM_MIN_ORDER - 1e-9, 25)
    z = np.linspace(bessel.SERIES_Z_MAX, 60.0, 25)
    G, Z = np.meshgrid(g, z)
    s = series_log_iv(G, Z)
    for gi in g:
        sel = G == gi
        assert np.max(np.abs(integral_log_iv(gi, Z[sel]) - s[sel])) <= 1e-9


def test_series_uniform_overlap():
    g = np.linspace(bessel.UNIFORM_MIN_ORDER, 60.0, 20)
    z = np.linspace(bessel.SERIES_Z_MAX, 60.0, 20)
    G, Z = np.meshgrid(g, z)
    assert np.max(np.abs(uniform_log_iv(G, Z) - series_log_iv(G, Z))) <= 1e-10


def test_switchover_sweep_is_reproducible():
    # the integral route degrades below z = 20 (cut at 2z), the Debye route below gamma = 10 for moderate z
    g = np.linspace(0.0, 9.5, 20)
    err_at_switch = max(abs(integral_log_iv(gi, 20.0) - series_log_iv(gi, 20.0)) for gi in g)
    err_below = max(abs(integral_log_iv(gi, 8.0) - series_log_iv(gi, 8.0)) for gi in g)
    assert err_at_switch <= 1e-12 < err_below
    deb_switch = np.max(np.abs(uniform_log_iv(10.0, np.linspace(0.1, 60, 50))
                               - series_log_iv(10.0, np.linspace(0.1, 60, 50))))
    deb_low = abs(uniform_log_iv(2.0, 1.0) - series_log_iv(2.0, 1.0))
    assert deb_switch <= 1e-11 < deb_low


def test_method_tags():
    tags = select_method([1.0, 1.0, 20.0], [1.0, 50.0, 50.0])
    assert list(tags) == ["series", "integral", "uniform-asymptotic"]


# -- properties ------------------------------------------------------------------

@given(st.floats(0.0, 59.0), st.floats(1e-6, 700.0), st.floats(0.01, 1.0))
def test_order_monotonicity(g, z, dg):
    assert log_iv(g + dg, z) <= log_iv(g, z) + 1e-13 * abs(log_iv(g, z))


@given(st.floats(0.0, 60.0), st.floats(0.0, 700.0))
def test_corrected_upper_bound_holds(g, z):
    if z == 0:
        assert log_iv(g, z) == log_iv_upper(g, z)
        return
    assert log_iv(g, z) <= log_iv_upper(g, z) + 1e-12 * max(1.0, abs(log_iv_upper(g, z)))


@given(st.floats(0.6412, 60.0), st.floats(0.0, 700.0))
def test_envelope_holds_above_threshold_order(g, z):
    assert envelope_ratio(g, z) <= 1.0 + 1e-12


def test_envelope_fails_for_small_orders():
    # I_g(z) ~ (z/2)^g / Gamma(g+1) near 0, so the ratio tends to 2^-g / g, above 1 when g 2^g < 1
    gstar = 0.6411857445049859
    assert abs(gstar * 2**gstar - 1) < 1e-12
    assert envelope_ratio(0.5, 0.0) == pytest.approx(2**-0.5 / 0.5)
    assert envelope_ratio(0.5, 1e-3) > 1
    assert envelope_ratio(0.7, 1e-3) < 1


@given(st.floats(0.0, 40.0), st.floats(0.01, 600.0))
def test_recurrence(g, z):
    # I_{g-1} - I_{g+1} = (2g/z) I_g, checked for g >= 1 in the log domain
    g = g + 1.0
    lm, l0, lp = log_iv(g - 1, z), log_iv(g, z), log_iv(g + 1, z)
    lhs = math.exp(lm - l0) - math.exp(lp - l0)
    assert abs(lhs - 2 * g / z) <= 1e-9 * max(1.0, 2 * g / z)
