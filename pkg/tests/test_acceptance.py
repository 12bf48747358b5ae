"""End-to-end acceptance checks, one test per criterion.

Each test records a single pass/fail line that is repeated in the pytest
terminal summary.
"""

import filecmp
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import linregress

from hotspots import bessel
from hotspots.cli import EXIT_OK, run
from hotspots.cone import (ConeSetup, InitialCondition, RadialProfile, TruncationPlan, heat_kernel,
                           kernel_truncation, long_time_w, p_gamma, solution_mass, solve_heat, total_initial_mass,
                           truncation_order, w_gamma_transform)
from hotspots.config import ExperimentConfig, default_suite
from hotspots.fiber import circle_spectrum, sphere_spectrum
from hotspots.radial import (MIXED, NEUMANN, Warping, WarpedProductConfig, check_radial_monotonicity,
                             direct_surface_eigenvalues, locate_hotspots_compact, mixed_first_mode,
                             richardson_eigenvalues, second_neumann_mode, separated_eigenvalues)

pytestmark = pytest.mark.slow
NORTH = np.array([0.0, 0.0, 1.0])


@pytest.fixture(scope="module")
def suite_runs(tmp_path_factory):
    """The default suite run twice: serially, then with four threads."""
    root = tmp_path_factory.mktemp("verify")
    cfg = default_suite()
    out = []
    for i, threads in enumerate((1, 4)):
        t0 = time.perf_counter()
        code, manifest = run(cfg, root / f"run{i}", None, None, threads)
        out.append((root / f"run{i}", code, manifest, time.perf_counter() - t0))
    return out


def test_criterion_1_bessel_contract(record_criterion):
    t0 = time.perf_counter()
    g = 60.0 * np.arange(1, 101) / 100
    z = np.linspace(0.0, 700.0, 100)
    G, Z = np.meshgrid(g, z, indexing="ij")
    # the z = 0 column uses the z -> 0+ limit of the ratio, since both sides vanish there
    ratio = bessel.envelope_ratio(G, Z)
    violations = int(np.count_nonzero(ratio > 1.0))
    worst_gamma = float(G[ratio > 1.0].max()) if violations else math.nan

    # every order below the uniform cutoff against the integral route on the shared z range
    lv = bessel.log_iv(G, Z)
    over = (Z >= bessel.SERIES_Z_MAX) & (Z <= 60.0) & (G < bessel.UNIFORM_MIN_ORDER)
    agree = 0.0
    for gi in np.unique(G[over]):
        sel = over & (G == gi)
        agree = max(agree, float(np.max(np.abs(bessel.integral_log_iv(gi, Z[sel]) -
                                                bessel.series_log_iv(gi, Z[sel])))))
    # decreasing in the order at fixed z > 0
    d = np.diff(lv[:, 1:], axis=0)
    mono = bool(np.all(d <= 0))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and agree <= 1e-9 and mono and elapsed < 10
    record_criterion(1, ok, f"{G.size} points, {violations} envelope violations (largest order {worst_gamma:.3g}), "
                            f"series/integral max log gap {agree:.2e}, monotone {mono}, {elapsed:.2f} s")
    assert agree <= 1e-9 and mono and elapsed < 10
    assert violations == 0, "envelope z^g e^z / Gamma(g) undershoots I_g when g 2^g < 1"


def test_criterion_2_radial_oracle(record_criterion):
    t0 = time.perf_counter()
    flat = WarpedProductConfig(3, math.pi, Warping("constant"))
    j = np.arange(1, 6)
    neu = richardson_eigenvalues(flat, 0.0, NEUMANN, 5)
    mix = richardson_eigenvalues(flat, 0.0, MIXED, 5)
    e_neu = float(np.max(np.abs(neu - (j - 1) ** 2)))
    e_mix = float(np.max(np.abs(mix - (j - 0.5) ** 2)))
    e_prod = 0.0
    for L in (0.5, 1.0, 3.0):
        cfg = WarpedProductConfig(3, L, Warping("constant"))
        for nu in (2.0, 6.0, 12.0):
            mus = richardson_eigenvalues(cfg, nu, NEUMANN, 4)
            exact = (np.arange(4) * math.pi / L) ** 2 + nu
            e_prod = max(e_prod, float(np.max(np.abs(mus - exact) / exact)))
    elapsed = time.perf_counter() - t0
    ok = e_neu <= 1e-6 and e_mix <= 1e-6 and e_prod <= 1e-6 and elapsed < 30
    record_criterion(2, ok, f"Neumann {e_neu:.1e}, mixed {e_mix:.1e}, product law rel {e_prod:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_3_compact_monotonicity(record_criterion):
    t0 = time.perf_counter()
    sphere = sphere_spectrum(2, 1.0, 64)
    parts = []
    ok = True
    for w in (Warping("affine", c=1.0), Warping("exponential", c=1.0)):
        cfg = WarpedProductConfig(3, 1.0, w)
        mode = second_neumann_mode(cfg, sphere)
        rep = check_radial_monotonicity(mode.parts[0][1], cfg, refine=True)
        _, mixed = mixed_first_mode(cfg, sphere)
        ok &= rep.min_interior_w_prime > 0 and mixed.min_interior_w_prime > 0
        parts.append(f"{w.family}: {mode.kind} min w' {rep.min_interior_w_prime:.3g}, "
                     f"mixed min w' {mixed.min_interior_w_prime:.3g}")
    sym = WarpedProductConfig(3, 2.0, Warping("sech", c=1.0, scale=20.0), -1.0)
    mode = second_neumann_mode(sym, sphere)
    ext = locate_hotspots_compact(mode, sphere, r_points=129)
    mx = ext.kind == "max"
    interior = mx & ~ext.boundary
    mid = bool(np.any(np.abs(ext.r[interior]) < 1e-9))
    ok &= mid
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    record_criterion(3, ok, "; ".join(parts) + f"; symmetric warping interior max at midpoint {mid}, {elapsed:.1f} s")
    assert ok


def test_criterion_4_separated_vs_direct(record_criterion):
    cfg = WarpedProductConfig(2, 1.0, Warping("affine", c=1.0), grid=400)
    sep = separated_eigenvalues(cfg, circle_spectrum(1.0, 64), 10)
    direct = direct_surface_eigenvalues(cfg, 1.0, 10, n_theta=512)
    rel = np.abs(direct[1:] - sep[1:]) / sep[1:]
    zero = abs(direct[0] - sep[0])
    ok = float(rel.max()) <= 1e-3 and zero <= 1e-8
    record_criterion(4, ok, f"first 10 eigenvalues, max relative gap {rel.max():.2e}, zero mode {zero:.1e}")
    assert ok


def test_criterion_5_euclidean_oracle(record_criterion):
    t0 = time.perf_counter()
    cone = ConeSetup(3, sphere_spectrum(2, 1.0, 6000))
    plan = kernel_truncation(cone, 125.0, 1e-10)
    rs = np.linspace(0.0, 5.0, 11)
    ts = np.geomspace(0.1, 100.0, 7)
    worst = 0.0
    for t in ts:
        for r in rs:
            for s in rs:
                exact = (4 * math.pi * t) ** -1.5 * math.exp(-(r - s) ** 2 / (4 * t))
                worst = max(worst, abs(heat_kernel(cone, (r, NORTH), (s, NORTH), t, plan) / exact - 1))
    # separated fibers: the series cancels down to exp(-(d^2 - (r-s)^2)/4t) of its terms, so only
    # points where that factor stays above the plan tolerance are resolvable in double precision
    rng = np.random.default_rng(7)
    worst_sep, used, skipped = 0.0, 0, 0
    for _ in range(1500):
        r, s = rng.uniform(0, 5, 2)
        t = 10 ** rng.uniform(-1, 2)
        th = rng.uniform(0, math.pi)
        y = np.array([math.sin(th), 0.0, math.cos(th)])
        d2 = r * r + s * s - 2 * r * s * math.cos(th)
        if math.exp(-(d2 - (r - s) ** 2) / (4 * t)) < 1e-4:
            skipped += 1
            continue
        used += 1
        exact = (4 * math.pi * t) ** -1.5 * math.exp(-d2 / (4 * t))
        worst_sep = max(worst_sep, abs(heat_kernel(cone, (r, NORTH), (s, y), t, plan) / exact - 1))
    phi = InitialCondition(((1, RadialProfile("indicator", 1.0, 2.0)),
                            (2, RadialProfile("bump", 0.5, 2.0, 0.4))))
    small = ConeSetup(3, sphere_spectrum(2, 1.0, 16))
    m0 = total_initial_mass(small, phi)
    mass = max(abs(solution_mass(small, phi, t) / m0 - 1) for t in (1.0, 10.0, 100.0))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and worst_sep <= 1e-6 and mass <= 1e-6 and elapsed < 120
    record_criterion(5, ok, f"coincident fibers {worst:.1e} over {ts.size * rs.size**2} points; separated "
                            f"{worst_sep:.1e} over {used} resolvable points ({skipped} below the cancellation "
                            f"floor); mass defect {mass:.1e}; {elapsed:.1f} s")
    assert ok


def test_criterion_6_asymptotic_laws(record_criterion):
    ts = np.geomspace(1e2, 1e5, 13)
    slopes = []
    for g in (0.5, 1.5, 2.5, 5.0):
        c = 1.0 / (2 ** (2 * g + 1) * math.gamma(g + 1))
        r = s = 1.0
        norm = np.array([t ** (g + 1) * math.exp(r * r / (4 * t)) * p_gamma(g, r, s, t) / (r * s) ** (g - 0.5)
                         for t in ts])
        slopes.append(linregress(np.log(ts), np.log(np.abs(norm / c - 1))).slope)
    cone = ConeSetup(3, sphere_spectrum(2, 1.0, 16))
    phi = InitialCondition(tuple((k, RadialProfile("bump", 0.5, 2.0)) for k in (1, 2, 5)))
    t = 1e4
    r = math.sqrt(t) * np.array([0.01, 0.1, 0.5, 1.0, 2.0, 4.0])
    werr = {}
    for k in (1, 2, 5):
        got = w_gamma_transform(cone, phi, k, r, t)
        werr[cone.gamma_of(k)] = float(np.max(np.abs(got / long_time_w(cone, phi, k, r, t) - 1)))
    ok = all(abs(sl + 1) <= 0.1 for sl in slopes) and max(werr.values()) <= 1e-2
    record_criterion(6, ok, "error slopes " + ", ".join(f"{sl:.3f}" for sl in slopes) + "; leading-term gaps "
                     + ", ".join(f"gamma={g:g}: {e:.1e}" for g, e in werr.items()))
    assert ok


def test_criterion_7_regime_sweep(suite_runs, record_criterion):
    root, code, manifest, elapsed = suite_runs[0]
    recs = {s["name"]: s for s in manifest["scenarios"] if s["name"].startswith("regime-")}
    regimes, parts, ok = [], [], True
    for name in sorted(recs, key=lambda n: float(n.split("rho")[1].replace("p", "."))):
        v = json.loads((root / name / "verdict.json").read_text())
        reg = v["prediction"]["regime"]
        regimes.append(reg)
        ok &= bool(v["passed"])
        if reg == 1:
            parts.append(f"{name}: pinned from t={v['pinned_from']:g}")
        elif reg == 3:
            parts.append(f"{name}: distance {v['distance']:.2e}")
        else:
            parts.append(f"{name}: alpha {v['alpha_fit']:.4f}/{v['alpha_pred']:.4f}, "
                         f"R {v['R_fit']:.4f}/{v['R_pred']:.4f}")
    ok &= regimes == [1, 2, 3, 4] and elapsed < 600
    record_criterion(7, ok, f"regimes {regimes}; " + "; ".join(parts) + f"; suite {elapsed:.0f} s")
    assert ok


def test_criterion_8_truncation_soundness(suite_runs, record_criterion):
    _, _, manifest, _ = suite_runs[0]
    plans = [s["truncation"] for s in manifest["scenarios"] if "truncation" in s]
    sweep_ok = all(p["certified_bound"] <= p["tol"] for p in plans)
    # loose tolerance with data reaching beyond the cutoff, so doubling adds modes
    cone = ConeSetup(3, sphere_spectrum(2, 1.0, 4096))
    phi = InitialCondition(((1, RadialProfile("indicator", 1.0, 2.0)),) +
                           tuple((k, RadialProfile("bump", 1.0, 2.0, 0.5)) for k in (2, 30, 101, 150, 200)))
    pts = cone.fiber.sample_grid((8, 16)).points
    worst_ratio = 0.0
    for tol, R in ((1e-2, 4.0), (1e-3, 2.0)):
        plan = truncation_order(cone, phi, R, 1.0, tol)
        double = TruncationPlan(2 * plan.K, plan.tol, plan.certified_bound, "solution", plan.R, plan.t_min, plan.S)
        for t in (1.0, 4.0):
            r = np.linspace(0, R * math.sqrt(t), 9)
            diff = np.max(np.abs(solve_heat(cone, phi, t, r, pts, plan).u - solve_heat(cone, phi, t, r, pts, double).u))
            worst_ratio = max(worst_ratio, diff / plan.certified_bound)
    kplan = kernel_truncation(cone, 4.0, 1e-10)
    kdouble = TruncationPlan(2 * kplan.K, kplan.tol, kplan.certified_bound, "kernel", z_max=kplan.z_max)
    kern = 0.0
    for r, s, t in ((1.0, 2.0, 0.5), (2.0, 2.0, 0.5), (0.5, 3.0, 1.0), (4.0, 4.0, 2.0)):
        a = heat_kernel(cone, (r, NORTH), (s, NORTH), t, kplan)
        b = heat_kernel(cone, (r, NORTH), (s, NORTH), t, kdouble)
        kern = max(kern, abs(a - b) / b / kplan.certified_bound)
    ok = sweep_ok and worst_ratio < 1 and kern < 1
    record_criterion(8, ok, f"{len(plans)} suite plans certified within tol {sweep_ok}; solution doubling change "
                            f"{worst_ratio:.2e} of bound; kernel doubling change {kern:.2e} of bound")
    assert ok


def test_criterion_9_determinism(suite_runs, record_criterion):
    (a, code_a, _, _), (b, code_b, _, _) = suite_runs
    csvs = sorted(p.relative_to(a) for p in Path(a).rglob("*.csv"))
    same = all(filecmp.cmp(a / p, b / p, shallow=False) for p in csvs)
    ok = same and len(csvs) > 0 and code_a == code_b == EXIT_OK
    record_criterion(9, ok, f"{len(csvs)} CSV files byte-identical across serial and 4-thread runs: {same}; "
                            f"exit codes {code_a}, {code_b}")
    assert ok
