"""Hot-spot location, time tracking and regime verdicts for cone heat flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.stats import linregress, t as student_t
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .cone import ConeHeatModel, HeatField, NoTransverseData, Prediction

DEFAULT_TIMES = tuple(np.logspace(0.0, 5.0, 21))
FIT_FRACTION = 0.6
NODES_PER_DECADE = 512
MAX_REFINE_CANDIDATES = 16


@dataclass
class HotspotSet:
    """Refined maximizers of ``u(., t)``.

    ``radii`` and ``points`` describe each maximizer; a radius of zero is the
    cone point, for which the fiber entry is meaningless. ``full_fiber``
    marks maximizers where ``u`` is constant along the fiber, so the whole
    slice ``{r} x M`` belongs to the set.
    """

    t: float
    radii: np.ndarray
    points: np.ndarray
    values: np.ndarray
    full_fiber: np.ndarray
    band_size: int
    window_edge: bool = False

    @property
    def r_sup(self) -> float:
        return float(np.max(self.radii))

    @property
    def r_inf(self) -> float:
        return float(np.min(self.radii))

    @property
    def max_u(self) -> float:
        return float(np.max(self.values))

    @property
    def best(self) -> int:
        return int(np.argmax(self.values))


def _fiber_range(field: HeatField, i: int) -> float:
    row = field.u[i]
    return float(row.max() - row.min())


def _refine_fiber(field: HeatField, r: float, x0: np.ndarray, scale: float) -> np.ndarray:
    # maximize in a local chart, normalized by the fiber oscillation so tolerances are O(1)
    fib = field.fiber
    base = float(field.evaluate([r], x0[None, :])[0][0, 0])

    def obj(o):
        return -(float(field.evaluate([r], fib.local_chart(x0, o[None, :]))[0][0, 0]) - base) / scale

    step = 0.05 * fib.distance(field.points[:1], field.points[1:2])[0] if field.points.shape[0] > 1 else 0.01
    simplex = np.vstack([np.zeros(fib.dim), step * np.eye(fib.dim)])
    res = minimize(obj, np.zeros(fib.dim), method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-12, "initial_simplex": simplex, "maxiter": 400})
    if res.fun < 0:
        return fib.local_chart(x0, res.x[None, :])[0]
    return x0


def _refine_radius(field: HeatField, lo: float, hi: float, x: np.ndarray) -> float:
    def u_at(r):
        return float(field.evaluate([r], x[None, :])[0][0, 0])

    def du_at(r):
        return float(field.evaluate([r], x[None, :])[1][0, 0])

    res = minimize_scalar(lambda r: -u_at(r), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(hi, 1e-300)})
    r = float(res.x)
    # polish on the analytic derivative, which stays well conditioned where u is flat
    a, b = du_at(lo), du_at(hi)
    if lo > 0 and np.isfinite(a) and np.isfinite(b) and a > 0 > b:
        r = brentq(du_at, lo, hi, xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps)
    return r


def find_hotspots(field: HeatField, rel_tol: float = 1e-9, refine: bool = True) -> HotspotSet:
    """Locate the maximizers of a sampled solution.

    Every grid point with ``u >= (1 - rel_tol) max u`` is in the tolerance
    band. Among band rows, radial candidates are found from sign changes of
    the analytic ``du/dr`` along the fiber-wise argmax, then each candidate is
    polished by a bounded scalar search in ``r`` (then root-finding on
    ``du/dr``) and a Nelder-Mead search in a local fiber chart. Refined
    points within ``rel_tol`` of the best refined value are returned.

    Parameters
    ----------
    field : HeatField
        Solution samples with ``r`` sorted ascending.
    rel_tol : float
        Relative width of the tolerance band.
    refine : bool
        Skip the continuous refinement when False.

    Returns
    -------
    HotspotSet
    """
    if not 0 <= rel_tol < 1:
        raise ValueError("rel_tol must lie in [0, 1)")
    r = field.r
    U = field.u
    if np.any(np.diff(r) <= 0):
        raise ValueError("field radii must be strictly increasing")
    umax = float(U.max())
    thresh = umax - rel_tol * abs(umax)
    band_size = int(np.count_nonzero(U >= thresh))
    jstar = np.argmax(U, axis=1)
    rows = np.arange(r.size)
    M = U[rows, jstar]
    D = field.du_dr[rows, jstar]

    cands: list[tuple[int, int]] = []  # (lo index, hi index) brackets; (0, 0) is the cone point
    if r[0] == 0.0 and M[0] >= thresh and (r.size == 1 or not D[1] > 0):
        cands.append((0, 0))
    for i in range(r.size - 1):
        if D[i] > 0 >= D[i + 1] and max(M[i], M[i + 1]) >= thresh:
            cands.append((i, i + 1))
    edge = r.size > 1 and D[-1] > 0 and M[-1] >= thresh
    if edge:
        cands.append((r.size - 1, r.size - 1))
    if not cands:
        i = int(np.argmax(M))
        cands.append((i, i))
    if len(cands) > MAX_REFINE_CANDIDATES:
        order = np.argsort([-max(M[a], M[b]) for a, b in cands], kind="stable")
        cands = [cands[i] for i in sorted(order[:MAX_REFINE_CANDIDATES])]

    radii, pts, vals, full = [], [], [], []
    for a, b in cands:
        i = a if M[a] >= M[b] else b
        x = field.points[jstar[i]].copy()
        rr = float(r[i])
        spread = _fiber_range(field, i)
        flat = spread <= 1e-13 * abs(M[i])
        if refine and field.evaluate is not None and not (a == b == 0 and r[0] == 0.0):
            lo = float(r[max(a - 1, 0)])
            hi = float(r[min(b + 1, r.size - 1)])
            for _ in range(2):
                if hi > lo:
                    rr = _refine_radius(field, lo, hi, x)
                if not flat and field.fiber is not None:
                    x = _refine_fiber(field, rr, x, spread)
            val = float(field.evaluate([rr], x[None, :])[0][0, 0])
        else:
            val = float(U[i, jstar[i]])
        radii.append(rr)
        pts.append(x)
        vals.append(val)
        full.append(bool(flat and rr > 0))
    vals_arr = np.array(vals)
    best = vals_arr.max()
    keep = vals_arr >= best - rel_tol * abs(best)
    return HotspotSet(field.t, np.array(radii)[keep], np.array(pts)[keep], vals_arr[keep], np.array(full)[keep],
                      band_size, bool(edge))


def radial_grid(t: float, R: float, nodes_per_decade: int = NODES_PER_DECADE, r_lo_rel: float = 1e-7) -> np.ndarray:
    """``{0}`` plus a log grid from ``r_lo_rel sqrt(t)`` to ``R sqrt(t)``."""
    hi = R * math.sqrt(t)
    lo = r_lo_rel * math.sqrt(t)
    count = int(math.ceil(nodes_per_decade * math.log10(hi / lo))) + 1
    return np.concatenate([[0.0], np.geomspace(lo, hi, count)])


@dataclass
class Trajectory:
    """Hot-spot history over a time schedule."""

    times: np.ndarray
    sets: list
    fiber_coords: np.ndarray
    coordinate_names: list
    dist_to_H: np.ndarray

    @property
    def r_sup(self) -> np.ndarray:
        return np.array([s.r_sup for s in self.sets])

    @property
    def r_inf(self) -> np.ndarray:
        return np.array([s.r_inf for s in self.sets])

    @property
    def max_u(self) -> np.ndarray:
        return np.array([s.max_u for s in self.sets])

    def rows(self) -> list[list]:
        out = []
        for i, s in enumerate(self.sets):
            out.append([self.times[i], s.r_sup, s.r_inf, s.max_u, *self.fiber_coords[i], self.dist_to_H[i]])
        return out

    @property
    def header(self) -> list[str]:
        return ["t", "r_sup", "r_inf", "max_u", *self.coordinate_names, "dist_to_H_infinity"]


def _distance_to_limit(model: ConeHeatModel, pred: Prediction | None, hs: HotspotSet) -> float:
    if pred is None or pred.regime == 4:
        return math.nan
    i = hs.best
    r = hs.radii[i]
    if pred.regime == 3 and pred.r_infinity > 0:
        cone = model.cone_
        A = np.atleast_2d(pred.A_infinity)
        d = cone.distance(np.full(A.shape[0], r), np.repeat(hs.points[i][None, :], A.shape[0], axis=0),
                          np.full(A.shape[0], pred.r_infinity), A)
        return float(np.min(d))
    return float(r)


def track(model: ConeHeatModel, times=DEFAULT_TIMES, R: float | None = None,
          nodes_per_decade: int = NODES_PER_DECADE, r_lo_rel: float = 1e-7, fiber_resolution=None,
          rel_tol: float = 1e-9, prediction: Prediction | None = None) -> Trajectory:
    """Follow the hot spots of a fitted model over ``times``.

    The radial grid at time ``t`` covers ``[0, R sqrt(t)]`` with
    ``nodes_per_decade`` log-spaced nodes per decade; ``R`` defaults to the
    model's certified window.
    """
    check_is_fitted(model, "plan_")
    R = model.R if R is None else R
    fib = model.cone_.fiber
    pts = fib.sample_grid(fiber_resolution).points
    sets, coords, dists = [], [], []
    times = np.asarray(times, float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    for t in times:
        fld = model.field(float(t), radial_grid(float(t), R, nodes_per_decade, r_lo_rel), pts)
        hs = find_hotspots(fld, rel_tol)
        sets.append(hs)
        coords.append(fib.coordinates(hs.points[hs.best][None, :])[0])
        dists.append(_distance_to_limit(model, prediction, hs))
    return Trajectory(times, sets, np.array(coords), fib.coordinate_names, np.array(dists))


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``y = c t^alpha`` in log-log coordinates.

    Parameters
    ----------
    confidence : float
        Level of the two-sided interval reported for the exponent.

    Attributes
    ----------
    exponent_, prefactor_ : float
    exponent_stderr_ : float
    exponent_ci_ : tuple of float
    """

    def __init__(self, confidence: float = 0.95):
        self.confidence = confidence

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        if np.any(X[:, 0] <= 0) or np.any(y <= 0):
            raise ValueError("power-law fit needs positive t and y")
        res = linregress(np.log(X[:, 0]), np.log(y))
        self.exponent_ = float(res.slope)
        self.prefactor_ = float(math.exp(res.intercept))
        self.exponent_stderr_ = float(res.stderr)
        dof = max(X.shape[0] - 2, 1)
        q = float(student_t.ppf(0.5 + 0.5 * self.confidence, dof))
        self.exponent_ci_ = (self.exponent_ - q * self.exponent_stderr_, self.exponent_ + q * self.exponent_stderr_)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        X = check_array(X)
        return self.prefactor_ * X[:, 0] ** self.exponent_


@dataclass
class RegimeVerdict:
    """Comparison of a tracked trajectory with the predicted regime."""

    regime: int
    passed: bool
    message: str
    alpha_pred: float = math.nan
    alpha_fit: float = math.nan
    alpha_ci: tuple = (math.nan, math.nan)
    R_pred: float = math.nan
    R_fit: float = math.nan
    pinned_from: float = math.nan
    distance: float = math.nan
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"regime": self.regime, "passed": self.passed, "message": self.message,
                "alpha_pred": self.alpha_pred, "alpha_fit": self.alpha_fit, "alpha_ci": list(self.alpha_ci),
                "R_pred": self.R_pred, "R_fit": self.R_fit, "pinned_from": self.pinned_from,
                "distance": self.distance}


def fit_window(times, fraction: float = FIT_FRACTION) -> np.ndarray:
    """Mask selecting the last ``fraction`` of the schedule in ``log t``."""
    lt = np.log(np.asarray(times, float))
    cut = lt[-1] - fraction * (lt[-1] - lt[0])
    return lt >= cut - 1e-12


def classify_regime(traj: Trajectory, pred: Prediction, fit_fraction: float = FIT_FRACTION,
                    alpha_rtol: float = 0.1, R_rtol: float = 0.25, dist_tol: float = 0.05,
                    dist_time: float | None = None) -> RegimeVerdict:
    """Check a trajectory against the predicted long-time law.

    Regime 1 passes when the maximizer sits at the cone point from some
    scheduled time on. Regimes 2 and 4 fit ``r_sup = R t^alpha`` over the fit
    window and compare with the prediction. Regime 3 compares the distance to
    the limit set at ``dist_time`` (default: last time).
    """
    times = traj.times
    reg = pred.regime
    if reg == 1:
        pinned = traj.r_sup == 0.0
        tail = np.flatnonzero(~pinned)
        start = 0 if tail.size == 0 else int(tail[-1]) + 1
        ok = start < times.size
        T = float(times[start]) if ok else math.nan
        msg = f"pinned at the cone point from t={T:.6g}" if ok else "not pinned at the final time"
        return RegimeVerdict(1, ok, msg, alpha_pred=pred.alpha, pinned_from=T)
    if reg == 3:
        i = times.size - 1 if dist_time is None else int(np.argmin(np.abs(np.log(times / dist_time))))
        d = float(traj.dist_to_H[i])
        ok = bool(d <= dist_tol)
        return RegimeVerdict(3, ok, f"distance to limit set {d:.3g} at t={times[i]:.6g}", alpha_pred=pred.alpha,
                             R_pred=pred.r_infinity, distance=d)
    mask = fit_window(times, fit_fraction)
    r = traj.r_sup[mask]
    if np.any(r <= 0):
        return RegimeVerdict(reg, False, "hot spot at the cone point inside the fit window",
                             alpha_pred=pred.alpha, R_pred=pred.R_infinity)
    fit = PowerLawRegressor().fit(times[mask][:, None], r)
    a_err = abs(fit.exponent_ - pred.alpha) / abs(pred.alpha)
    R_err = abs(fit.prefactor_ - pred.R_infinity) / abs(pred.R_infinity)
    ok = bool(a_err <= alpha_rtol and R_err <= R_rtol)
    msg = (f"alpha fit {fit.exponent_:.5g} vs {pred.alpha:.5g} (rel {a_err:.2g}); "
           f"R fit {fit.prefactor_:.5g} vs {pred.R_infinity:.5g} (rel {R_err:.2g})")
    return RegimeVerdict(reg, ok, msg, pred.alpha, fit.exponent_, fit.exponent_ci_, pred.R_infinity,
                         fit.prefactor_, details={"alpha_rel_err": a_err, "R_rel_err": R_err})


class HotspotTracker(BaseEstimator):
    """Estimator that tracks hot spots of a fitted :class:`ConeHeatModel`.

    ``fit(model)`` stores ``prediction_``, ``trajectory_`` and ``verdict_``.
    Initial data without transverse moments get a trajectory and no verdict.
    """

    def __init__(self, times=DEFAULT_TIMES, nodes_per_decade=NODES_PER_DECADE, r_lo_rel=1e-7,
                 fiber_resolution=None, rel_tol=1e-9, fit_fraction=FIT_FRACTION, dist_time=None):
        self.times = times
        self.dist_time = dist_time
        self.nodes_per_decade = nodes_per_decade
        self.r_lo_rel = r_lo_rel
        self.fiber_resolution = fiber_resolution
        self.rel_tol = rel_tol
        self.fit_fraction = fit_fraction

    def fit(self, model: ConeHeatModel, y=None):
        try:
            self.prediction_ = model.prediction()
        except NoTransverseData:
            self.prediction_ = None
        self.trajectory_ = track(model, self.times, None, self.nodes_per_decade, self.r_lo_rel,
                                 self.fiber_resolution, self.rel_tol, self.prediction_)
        self.verdict_ = None if self.prediction_ is None else classify_regime(
            self.trajectory_, self.prediction_, self.fit_fraction, dist_time=self.dist_time)
        return self


def negative_band_onset(model: ConeHeatModel, times, R1: float = 2.0, R2: float = 8.0, samples: int = 64,
                        fiber_resolution=None) -> float:
    """First scheduled time from which ``du/dr < 0`` on ``[R1 sqrt(t), R2 sqrt(t)] x M`` at every later time.

    Returns ``nan`` when the sign condition fails at the last time.
    """
    check_is_fitted(model, "plan_")
    pts = model.cone_.fiber.sample_grid(fiber_resolution).points
    ok = []
    for t in np.asarray(times, float):
        r = math.sqrt(t) * np.linspace(R1, R2, samples)
        ok.append(bool(np.all(model.field(float(t), r, pts).du_dr < 0)))
    ok = np.array(ok)
    bad = np.flatnonzero(~ok)
    start = 0 if bad.size == 0 else int(bad[-1]) + 1
    return float(np.asarray(times, float)[start]) if start < ok.size else math.nan
