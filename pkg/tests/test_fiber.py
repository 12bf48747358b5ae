import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hotspots.fiber import (calibrate_sup_norm_constant, calibrate_weyl_constant, circle_spectrum, fiber_from_dict,
                            gamma_of, gammas, maximize_on_fiber, sphere_spectrum, sup_norm_estimate, torus_spectrum)


def test_unit_sphere_eigenvalues():
    sp = sphere_spectrum(2, 1.0, 5)
    assert np.allclose(sp.eigenvalues, [0, 2, 2, 2, 6])
    assert sp.multiplicity(2) == 3


def test_constant_mode():
    sp = sphere_spectrum(2, 1.0, 2)
    x = sp.sample_grid().points[:10]
    assert np.allclose(sp.eigenfunction(1, x), (4 * math.pi) ** -0.5)


def test_sphere_scaling():
    assert sphere_spectrum(2, 0.5, 2).nu(2) == pytest.approx(8.0)


@given(st.floats(0.2, 5.0))
def test_sphere_eigenvalue_scaling_property(rho):
    a = sphere_spectrum(2, 1.0, 9).eigenvalues
    b = sphere_spectrum(2, rho, 9).eigenvalues
    assert np.allclose(b, a / rho**2)


def test_circle_examples():
    assert np.allclose(circle_spectrum(1.0, 3).eigenvalues, [0, 1, 1])
    assert circle_spectrum(2.0, 3).nu(2) == pytest.approx(0.25)
    sp = circle_spectrum(1.0, 3)
    th, w = sp.quadrature_grid(512)
    v2 = sp.eigenfunction(2, th)
    assert np.allclose(v2, np.cos(th[:, 0]) / math.sqrt(math.pi))
    assert abs(np.sum(w * v2**2) - 1) < 1e-12


def test_torus_examples():
    assert np.allclose(torus_spectrum([1.0], 3).eigenvalues, [0, 4 * math.pi**2, 4 * math.pi**2])
    t2 = torus_spectrum([1.0, 1.0], 5)
    assert t2.nu(2) == pytest.approx(4 * math.pi**2) and t2.multiplicity(2) == 4
    assert torus_spectrum([2.0, 1.0], 2).nu(2) == pytest.approx(math.pi**2)


def test_gamma_examples(unit_sphere):
    assert gamma_of(unit_sphere, 3, 1) == pytest.approx(0.5)
    assert gamma_of(unit_sphere, 3, 2) == pytest.approx(1.5)
    assert gamma_of(sphere_spectrum(2, 2.0, 3), 3, 2) == pytest.approx(math.sqrt(0.75))
    assert np.all(np.diff(gammas(unit_sphere, 3)) >= 0)


def test_sup_norm_examples(unit_sphere):
    assert sup_norm_estimate(unit_sphere, 1) == pytest.approx((4 * math.pi) ** -0.5, rel=1e-12)
    assert sup_norm_estimate(unit_sphere, 2) == pytest.approx(math.sqrt(3 / (4 * math.pi)), rel=1e-12)
    assert sup_norm_estimate(torus_spectrum([2 * math.pi], 3), 2) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-9)


@pytest.mark.parametrize("spec", [sphere_spectrum(2, 1.3, 25), circle_spectrum(0.7, 9), torus_spectrum([1.0, 2.0], 12),
                                  sphere_spectrum(3, 1.0, 20)])
def test_orthonormality(spec):
    pts, w = spec.quadrature_grid()
    ks = [k for k in range(1, spec.count + 1) if spec.evaluable(k)]
    V = spec.eigenfunctions(ks, pts)
    G = (V * w) @ V.T
    assert np.max(np.abs(G - np.eye(len(ks)))) < 1e-12


def test_eigenfunctions_are_laplace_eigenvectors():
    # finite-difference Laplace-Beltrami in spherical coordinates away from the poles
    sp = sphere_spectrum(2, 1.0, 16)
    th, ph, h = 1.1, 0.4, 1e-4

    def v(k, a, b):
        p = np.array([[math.sin(a) * math.cos(b), math.sin(a) * math.sin(b), math.cos(a)]])
        return sp.eigenfunction(k, p)[0]

    for k in range(1, 17):
        lap = ((v(k, th + h, ph) - 2 * v(k, th, ph) + v(k, th - h, ph)) / h**2
               + math.cos(th) / math.sin(th) * (v(k, th + h, ph) - v(k, th - h, ph)) / (2 * h)
               + (v(k, th, ph + h) - 2 * v(k, th, ph) + v(k, th, ph - h)) / (h * math.sin(th)) ** 2)
        assert abs(-lap - sp.nu(k) * v(k, th, ph)) < 1e-5


def test_addition_theorem_bound(unit_sphere):
    # sum over a level of v_k^2 equals mult / Vol, so |v_k| <= sqrt(mult/Vol)
    pts = unit_sphere.sample_grid((16, 32)).points
    for a, b in unit_sphere.level_slices[:5]:
        V = unit_sphere.eigenfunctions(list(range(a + 1, b + 1)), pts)
        assert np.allclose(np.sum(V**2, axis=0), (b - a) / unit_sphere.volume)


def test_level_iterator_matches_table(unit_sphere):
    it = unit_sphere.iter_levels()
    for (a, b) in unit_sphere.level_slices:
        nu, mult = next(it)
        assert mult == b - a and nu == pytest.approx(unit_sphere.nu(a + 1))


def test_calibrated_constants(unit_sphere):
    assert calibrate_weyl_constant(unit_sphere) > 0
    assert calibrate_sup_norm_constant(unit_sphere) > 0


def test_maximize_on_fiber(unit_sphere):
    x, val = maximize_on_fiber(unit_sphere, lambda p: -np.sum((p - np.array([0.6, 0.0, 0.8])) ** 2, axis=1))
    assert np.allclose(x, [0.6, 0.0, 0.8], atol=1e-7)
    assert val > -1e-12


def test_from_dict_roundtrip():
    sp = fiber_from_dict({"kind": "torus", "side_lengths": [1.0, 2.0], "count": 7})
    again = fiber_from_dict(sp.describe())
    assert np.allclose(again.eigenvalues, sp.eigenvalues)
    with pytest.raises(ValueError):
        fiber_from_dict({"kind": "klein"})


def test_bad_index(unit_sphere):
    with pytest.raises(ValueError):
        unit_sphere.nu(0)
    with pytest.raises(IndexError):
        unit_sphere.nu(unit_sphere.count + 1)
