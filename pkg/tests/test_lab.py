import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hotspots.cone import ConeHeatModel, HeatField, InitialCondition, RadialProfile
from hotspots.fiber import sphere_spectrum
from hotspots.lab import (HotspotTracker, PowerLawRegressor, classify_regime, find_hotspots, fit_window,
                          negative_band_onset, radial_grid, track)

RES = (16, 32)


def bump(k=1, lo=1.0, hi=2.0, amp=1.0):
    return (k, RadialProfile("bump", lo, hi, amp))


@pytest.fixture(scope="module")
def r3_model():
    fib = sphere_spectrum(2, 1.0, 400)
    phi = InitialCondition((bump(), bump(2, amp=0.3), bump(3, amp=0.2)))
    return ConeHeatModel(fiber=fib, R=8.0).fit(phi)


@pytest.fixture(scope="module")
def wide_model():
    fib = sphere_spectrum(2, 2.0, 64)
    return ConeHeatModel(fiber=fib, R=12.0, t_min=4.0).fit(InitialCondition((bump(), bump(2, amp=0.25))))


def synthetic(u, r=None, pts=None):
    u = np.asarray(u, float)
    r = np.arange(u.shape[0], dtype=float) if r is None else r
    pts = np.tile([0.0, 0.0, 1.0], (u.shape[1], 1)) if pts is None else pts
    du = np.gradient(u, r, axis=0) if np.all(np.diff(r) > 0) else np.zeros_like(u)
    return HeatField(1.0, r, pts, u, du, 0)


# -- find_hotspots ---------------------------------------------------------------------------

def test_radial_data_peak_at_cone_point():
    fib = sphere_spectrum(2, 1.0, 64)
    model = ConeHeatModel(fiber=fib, R=8.0).fit(InitialCondition((bump(),)))
    pts = fib.sample_grid(RES).points
    hs = find_hotspots(model.field(100.0, radial_grid(100.0, 8.0, 64), pts))
    assert hs.r_sup == 0.0


def test_fiber_constant_field_reports_full_fiber():
    fib = sphere_spectrum(2, 1.0, 64)
    model = ConeHeatModel(fiber=fib, R=6.0, t_min=0.25).fit(InitialCondition((bump(1, 2.0, 3.0),)))
    pts = fib.sample_grid(RES).points
    hs = find_hotspots(model.field(0.25, np.linspace(0, 3.0, 301), pts))
    assert hs.full_fiber.all()
    assert 2.0 < hs.r_sup < 3.0


def test_zero_tolerance_returns_grid_maximizer(rng):
    U = rng.normal(size=(30, 12))
    hs = find_hotspots(synthetic(U), rel_tol=0.0, refine=False)
    assert np.all(hs.values == U.max())
    i, j = np.unravel_index(np.argmax(U), U.shape)
    assert hs.radii[hs.best] == float(i)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        find_hotspots(synthetic(np.ones((3, 2))), rel_tol=1.0)
    with pytest.raises(ValueError):
        find_hotspots(synthetic(np.ones((3, 2)), r=np.array([0.0, 1.0, 1.0])))


@given(st.floats(0.5, 9.5), st.floats(0.1, 4.0))
def test_refined_radius_of_parabola(peak, width):
    # u = -(r - peak)^2 has its maximum between grid nodes; refinement must land on it
    r = np.linspace(0, 10, 41)

    def ev(rr, pp):
        rr = np.atleast_1d(rr)
        u = -((rr - peak) / width) ** 2
        return np.repeat(u[:, None], len(pp), axis=1), np.repeat((-2 * (rr - peak) / width**2)[:, None], len(pp), 1)

    u, du = ev(r, np.zeros((2, 3)))
    fld = HeatField(1.0, r, np.tile([0.0, 0.0, 1.0], (2, 1)), u, du, 0, ev, None)
    hs = find_hotspots(fld)
    assert hs.radii[hs.best] == pytest.approx(peak, abs=1e-6)


# -- tracking and regime checks --------------------------------------------------------------------

def test_window_enlargement_keeps_argmax(wide_model):
    times = [10.0, 100.0]
    a = track(wide_model, times, R=8.0, nodes_per_decade=64, fiber_resolution=RES)
    b = track(wide_model, times, R=12.0, nodes_per_decade=64, fiber_resolution=RES)
    assert np.allclose(a.r_sup, b.r_sup, rtol=1e-8)
    assert np.allclose(a.fiber_coords, b.fiber_coords, atol=1e-6)


def test_grid_refinement_moves_argmax_less_than_a_cell(wide_model):
    t = 1000.0
    coarse = track(wide_model, [t], R=8.0, nodes_per_decade=32, fiber_resolution=RES)
    fine = track(wide_model, [t], R=8.0, nodes_per_decade=64, fiber_resolution=RES)
    r = coarse.r_sup[0]
    cell = r * (10 ** (1 / 32) - 1)
    assert abs(fine.r_sup[0] - r) < cell


def test_trajectory_rows(wide_model):
    traj = track(wide_model, [10.0, 100.0], nodes_per_decade=32, fiber_resolution=RES)
    rows = traj.rows()
    assert len(rows) == 2 and len(rows[0]) == len(traj.header)
    assert traj.header[:4] == ["t", "r_sup", "r_inf", "max_u"]
    assert np.all(traj.max_u > 0)
    with pytest.raises(ValueError):
        track(wide_model, [10.0, 5.0])


def test_fiber_confinement(wide_model):
    pred = wide_model.prediction(epsilon=0.05)
    traj = track(wide_model, [1e3, 1e4], nodes_per_decade=64, fiber_resolution=RES, prediction=pred)
    for hs in traj.sets:
        assert pred.U_epsilon(hs.points[hs.best][None, :])[0]


def test_own_prediction_infinite_tolerance(wide_model):
    pred = wide_model.prediction()
    traj = track(wide_model, np.logspace(1, 3, 5), nodes_per_decade=32, fiber_resolution=RES, prediction=pred)
    v = classify_regime(traj, pred, alpha_rtol=math.inf, R_rtol=math.inf)
    assert v.passed and v.regime == 4


def test_regime_three_distance(r3_model):
    pred = r3_model.prediction()
    assert pred.regime == 3
    traj = track(r3_model, [1e2, 1e3, 1e4], nodes_per_decade=64, fiber_resolution=RES, prediction=pred)
    assert traj.dist_to_H[-1] < traj.dist_to_H[0]
    v = classify_regime(traj, pred, dist_time=1e4)
    assert v.passed and v.distance <= 0.05


def test_tracker_without_transverse_data():
    fib = sphere_spectrum(2, 1.0, 16)
    model = ConeHeatModel(fiber=fib).fit(InitialCondition((bump(),)))
    tr = HotspotTracker(times=[10.0, 100.0], nodes_per_decade=16, fiber_resolution=(8, 16)).fit(model)
    assert tr.prediction_ is None and tr.verdict_ is None
    assert np.all(tr.trajectory_.r_sup == 0)


def test_negative_band(wide_model):
    t0 = negative_band_onset(wide_model, [10.0, 100.0, 1000.0], fiber_resolution=(8, 16))
    assert t0 <= 1000.0


# -- fitting helpers ------------------------------------------------------------------------------------

@given(st.floats(-1.0, 1.0), st.floats(0.01, 100.0))
def test_power_law_exact(alpha, c):
    t = np.logspace(0, 5, 11)
    fit = PowerLawRegressor().fit(t[:, None], c * t**alpha)
    assert fit.exponent_ == pytest.approx(alpha, abs=1e-10)
    assert fit.prefactor_ == pytest.approx(c, rel=1e-9)
    assert fit.exponent_ci_[0] <= fit.exponent_ <= fit.exponent_ci_[1]
    assert np.allclose(fit.predict(t[:, None]), c * t**alpha, rtol=1e-9)


def test_power_law_rejects_nonpositive():
    with pytest.raises(ValueError):
        PowerLawRegressor().fit(np.array([[1.0], [2.0]]), np.array([1.0, 0.0]))


def test_fit_window_fraction():
    mask = fit_window(np.logspace(0, 5, 21))
    assert mask.sum() == 13
    assert mask[-1] and not mask[0]
