"""Separated radial eigenproblem on a warped product ``[a, a+L] x M``.

For each fiber eigenvalue ``nu`` the radial factor solves

    (f^(n-1) w')' - (nu / f^2) f^(n-1) w = -mu f^(n-1) w

with Neumann conditions at both ends, or Dirichlet at the left end and
Neumann at the right end ("mixed"). The operator is discretized in flux form
on a uniform vertex grid; boundary rows use the half-cell (ghost point)
closure, giving a symmetric tridiagonal generalized problem with a lumped
mass matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from ._validation import check_int, check_positive_scalar
from .fiber import FiberSpectrum, maximize_on_fiber

NEUMANN = "neumann"
MIXED = "mixed"
DEGENERACY_RTOL = 1e-6
MONOTONE_TOL = 1e-8

_FAMILIES = ("constant", "affine", "exponential", "cosh", "sech", "polynomial", "tabulated")


@dataclass(frozen=True)
class Warping:
    """Positive warping function ``f`` from a named family.

    All families carry an overall factor ``scale``:

    ========== ==========================================
    constant    ``scale``
    affine      ``scale * (1 + c r)``
    exponential ``scale * exp(c r)``
    cosh        ``scale * cosh(c (r - center))``
    sech        ``scale / cosh(c (r - center))``
    polynomial  ``scale * sum(coeffs[i] r^i)``
    tabulated   cubic spline through ``(nodes, values)``
    ========== ==========================================
    """

    family: str = "constant"
    c: float = 1.0
    scale: float = 1.0
    center: float = 0.0
    coeffs: tuple = ()
    nodes: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown warping family {self.family!r}; choose from {_FAMILIES}")
        if self.family == "tabulated" and (len(self.nodes) < 4 or len(self.nodes) != len(self.values)):
            raise ValueError("tabulated warping needs matching nodes/values with at least 4 samples")
        if self.family == "polynomial" and not self.coeffs:
            raise ValueError("polynomial warping needs coeffs")

    def _spline(self) -> CubicSpline:
        return CubicSpline(np.asarray(self.nodes, float), np.asarray(self.values, float))

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        fam, c, s = self.family, self.c, self.scale
        if fam == "constant":
            return np.full_like(r, s)
        if fam == "affine":
            return s * (1.0 + c * r)
        if fam == "exponential":
            return s * np.exp(c * r)
        if fam == "cosh":
            return s * np.cosh(c * (r - self.center))
        if fam == "sech":
            return s / np.cosh(c * (r - self.center))
        if fam == "polynomial":
            return s * np.polynomial.polynomial.polyval(r, self.coeffs)
        return self._spline()(r)

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        fam, c, s = self.family, self.c, self.scale
        if fam == "constant":
            return np.zeros_like(r)
        if fam == "affine":
            return np.full_like(r, s * c)
        if fam == "exponential":
            return s * c * np.exp(c * r)
        if fam == "cosh":
            return s * c * np.sinh(c * (r - self.center))
        if fam == "sech":
            x = c * (r - self.center)
            return -s * c * np.tanh(x) / np.cosh(x)
        if fam == "polynomial":
            return s * np.polynomial.polynomial.polyval(r, np.polynomial.polynomial.polyder(self.coeffs))
        return self._spline().derivative()(r)

    def to_dict(self) -> dict:
        out = {"family": self.family, "c": self.c, "scale": self.scale, "center": self.center}
        if self.coeffs:
            out["coeffs"] = list(self.coeffs)
        if self.nodes:
            out["nodes"] = list(self.nodes)
            out["values"] = list(self.values)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Warping":
        d = dict(d)
        for key in ("coeffs", "nodes", "values"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


@dataclass(frozen=True)
class WarpedProductConfig:
    """Data of the warped product ``[a, a+L] x M`` with metric ``dr^2 + f^2 h``.

    Parameters
    ----------
    n : int
        Total dimension (fiber dimension + 1), at least 2.
    L : float
        Interval length.
    warping : Warping
        The warping function, evaluated at the actual coordinate ``r``.
    interval_offset : float
        Left endpoint ``a``; use ``-L/2`` style offsets for symmetric intervals.
    grid : int
        Number of grid cells (the grid has ``grid + 1`` vertices).
    """

    n: int
    L: float
    warping: Warping = field(default_factory=Warping)
    interval_offset: float = 0.0
    grid: int = 2048

    def __post_init__(self):
        check_int("n", self.n, minimum=2)
        check_positive_scalar("L", self.L)
        check_int("grid", self.grid, minimum=16)
        f = self.warping(self.nodes)
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValueError("warping function must be positive on the solver grid")

    @property
    def nodes(self) -> np.ndarray:
        return self.interval_offset + np.linspace(0.0, self.L, self.grid + 1)

    @property
    def h(self) -> float:
        return self.L / self.grid

    def refined(self, factor: int = 2) -> "WarpedProductConfig":
        return WarpedProductConfig(self.n, self.L, self.warping, self.interval_offset, self.grid * factor)

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "warping": self.warping.to_dict(),
                "interval_offset": self.interval_offset, "grid": self.grid}


@dataclass(frozen=True, eq=False)
class RadialEigenpair:
    """One eigenpair of the radial problem on the solver grid.

    ``w`` is normalized by the discrete ``L^2(f^(n-1) dr)`` norm and signed
    so that ``w`` is positive at the right endpoint.
    """

    mu: float
    nu: float
    j: int
    bc: str
    r: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    zero_count: int
    k: int | None = None

    def spline(self) -> CubicSpline:
        return CubicSpline(self.r, self.w)


@dataclass
class MonotonicityReport:
    """Outcome of the monotonicity and sign-structure checks on ``w``."""

    min_interior_w_prime: float
    a_sign_pattern: str
    sign_structure_holds: bool
    interior_extremum: bool
    hypotheses_met: bool
    message: str = ""
    max_flux_increment: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class CompactMode:
    """Eigenfunction ``u(r, x) = sum_i c_i w_i(r) v_{k_i}(x)`` on the compact product."""

    kind: str
    parts: list
    mu: float
    config: WarpedProductConfig
    near_degenerate: bool = False
    nu2_multiplicity: int = 1
    info: dict = field(default_factory=dict)

    def evaluate(self, fiber: FiberSpectrum, r, points) -> np.ndarray:
        """``u`` on the product of radii ``r`` and fiber ``points``."""
        r = np.atleast_1d(np.asarray(r, float))
        out = np.zeros((r.size, fiber.as_points(points).shape[0]))
        for coef, pair, k in self.parts:
            out += coef * np.outer(pair.spline()(r), fiber.eigenfunction(k, points))
        return out

    def derivative_r(self, fiber: FiberSpectrum, r, points) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, float))
        out = np.zeros((r.size, fiber.as_points(points).shape[0]))
        for coef, pair, k in self.parts:
            out += coef * np.outer(pair.spline()(r, 1), fiber.eigenfunction(k, points))
        return out


# -- discretization ---------------------------------------------------------

def _assemble(config: WarpedProductConfig, nu: float, bc: str):
    r = config.nodes
    h = config.h
    p = config.n - 1
    f_nodes = config.warping(r)
    f_mid = config.warping(0.5 * (r[:-1] + r[1:]))
    flux = f_mid**p / h
    mass = f_nodes**p * h
    mass[0] *= 0.5
    mass[-1] *= 0.5
    diag = np.zeros_like(r)
    diag[:-1] += flux
    diag[1:] += flux
    diag += nu / f_nodes**2 * mass
    off = -flux
    if bc == MIXED:
        return r, diag[1:], off[1:], mass[1:]
    return r, diag, off, mass


def _check_bc(bc: str) -> str:
    if bc not in (NEUMANN, MIXED):
        raise ValueError(f"bc must be {NEUMANN!r} or {MIXED!r}")
    return bc


def _zero_count(w: np.ndarray) -> int:
    nz = w[np.abs(w) > 1e-12 * np.max(np.abs(w))]
    return int(np.count_nonzero(np.diff(np.sign(nz)) != 0))


def solve_radial(config: WarpedProductConfig, nu: float, bc: str = NEUMANN, j_max: int = 1,
                 k: int | None = None) -> list[RadialEigenpair]:
    """First ``j_max`` eigenpairs of the radial problem for fiber eigenvalue ``nu``.

    Parameters
    ----------
    config : WarpedProductConfig
    nu : float
        Fiber eigenvalue, ``nu >= 0``.
    bc : {"neumann", "mixed"}
    j_max : int
        Number of eigenpairs; must not exceed ``grid / 8``.
    k : int, optional
        Fiber index recorded on the returned pairs.

    Returns
    -------
    list of RadialEigenpair
        Sorted by ascending ``mu``.
    """
    bc = _check_bc(bc)
    j_max = check_int("j_max", j_max, minimum=1)
    if j_max > config.grid // 8:
        raise ValueError(f"j_max={j_max} exceeds grid capacity {config.grid // 8}")
    if nu < 0 or not np.isfinite(nu):
        raise ValueError("nu must be finite and nonnegative")
    r, diag, off, mass = _assemble(config, float(nu), bc)
    sq = np.sqrt(mass)
    d = diag / mass
    e = off / (sq[:-1] * sq[1:])
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, j_max - 1))
    out = []
    for j in range(j_max):
        w = vecs[:, j] / sq
        if bc == MIXED:
            w = np.concatenate([[0.0], w])
        if w[-1] < 0:
            w = -w
        out.append(RadialEigenpair(float(vals[j]), float(nu), j + 1, bc, r, w,
                                   np.gradient(w, config.h, edge_order=2), _zero_count(w[1:] if bc == MIXED else w), k))
    return out


def richardson_eigenvalues(config: WarpedProductConfig, nu: float, bc: str = NEUMANN,
                           j_max: int = 1) -> np.ndarray:
    """Second-order Richardson extrapolation from grids ``N`` and ``2N``."""
    coarse = np.array([p.mu for p in solve_radial(config, nu, bc, j_max)])
    fine = np.array([p.mu for p in solve_radial(config.refined(), nu, bc, j_max)])
    return (4.0 * fine - coarse) / 3.0


def discrete_norm(config: WarpedProductConfig, u: np.ndarray) -> float:
    """Trapezoidal ``int u^2 f^(n-1) dr`` on the solver grid."""
    _, _, _, mass = _assemble(config, 0.0, NEUMANN)
    return float(np.sum(mass * u**2))


def rayleigh_quotient(config: WarpedProductConfig, nu: float, u) -> float:
    """Discrete quotient ``q_nu(u) / ||u||^2`` on the solver grid.

    ``u`` may be an array of vertex values or a callable of ``r``.

    Raises
    ------
    ValueError
        If ``u`` vanishes identically or has the wrong length.
    """
    r = config.nodes
    vals = np.asarray(u(r) if callable(u) else u, float)
    if vals.shape != r.shape:
        raise ValueError(f"u must have {r.size} samples")
    if not np.any(vals):
        raise ValueError("u must not vanish identically")
    p = config.n - 1
    f_nodes = config.warping(r)
    flux = config.warping(0.5 * (r[:-1] + r[1:])) ** p / config.h
    _, _, _, mass = _assemble(config, 0.0, NEUMANN)
    q = np.sum(flux * np.diff(vals) ** 2) + np.sum(nu / f_nodes**2 * mass * vals**2)
    return float(q / np.sum(mass * vals**2))


def constant_quotient(config: WarpedProductConfig, nu: float) -> float:
    """``nu * int f^(n-3) / int f^(n-1)``, the quotient of a constant."""
    return rayleigh_quotient(config, nu, np.ones(config.grid + 1))


# -- monotonicity -----------------------------------------------------------

def _sign_pattern(a: np.ndarray) -> str:
    scale = np.max(np.abs(a)) if a.size else 0.0
    tol = 1e-10 * scale
    sym = np.where(a > tol, "+", np.where(a < -tol, "-", "0"))
    out = []
    for s in sym:
        if not out or out[-1] != s:
            out.append(s)
    return "".join(out)


def check_radial_monotonicity(pair: RadialEigenpair, config: WarpedProductConfig,
                              refine: bool = False) -> MonotonicityReport:
    """Check ``w' > 0`` inside the interval and the sign structure of ``a(r)``.

    ``a(r) = f^(n-1) (nu/f^2 - mu) w``. With ``refine=True`` the pair is
    recomputed on a doubled grid first, so the positivity threshold is
    applied to the refined solution.

    Returns
    -------
    MonotonicityReport
        Failed hypotheses are reported in ``message`` rather than raised.
    """
    if refine:
        pair = solve_radial(config.refined(), pair.nu, pair.bc, pair.j, pair.k)[pair.j - 1]
        config = config.refined()
    notes = []
    ok = pair.bc == NEUMANN
    if not ok:
        notes.append("pair is not a Neumann eigenpair")
    if pair.nu == 0 and pair.zero_count != 1:
        ok = False
        notes.append("nu = 0 pair must change sign exactly once")
    if pair.nu > 0 and np.any(pair.w <= 0):
        ok = False
        notes.append("nu > 0 pair must be positive")
    r = pair.r
    f = config.warping(r)
    a = f ** (config.n - 1) * (pair.nu / f**2 - pair.mu) * pair.w
    pattern = _sign_pattern(a)
    slopes = np.diff(pair.w) / config.h
    signs = np.sign(slopes[np.abs(slopes) > 1e-12 * np.max(np.abs(slopes))])
    interior = bool(np.any(np.diff(signs) != 0))
    return MonotonicityReport(
        min_interior_w_prime=float(np.min(slopes)),
        a_sign_pattern=pattern,
        sign_structure_holds=pattern in ("+-", "+0-"),
        interior_extremum=interior,
        hypotheses_met=ok,
        message="; ".join(notes),
    )


def mixed_first_mode(config: WarpedProductConfig, fiber: FiberSpectrum | None = None):
    """First mixed eigenfunction ``w_11 v_1`` and its monotonicity report.

    The report records ``min w'`` over the interior and the largest
    consecutive difference of the flux ``f^(n-1) w'`` (which must be
    negative).
    """
    pair = solve_radial(config, 0.0, MIXED, 1, k=1)[0]
    slopes = np.diff(pair.w) / config.h
    mids = 0.5 * (pair.r[:-1] + pair.r[1:])
    flux = config.warping(mids) ** (config.n - 1) * slopes
    report = MonotonicityReport(
        min_interior_w_prime=float(np.min(slopes)),
        a_sign_pattern=_sign_pattern(-pair.mu * pair.w[1:]),
        sign_structure_holds=True,
        interior_extremum=bool(np.any(slopes <= 0)),
        hypotheses_met=True,
        max_flux_increment=float(np.max(np.diff(flux))),
    )
    mode = CompactMode("mixed", [(1.0, pair, 1)], pair.mu, config,
                       info={"argmax_r": float(pair.r[np.argmax(pair.w)])})
    return mode, report


# -- second Neumann eigenfunction -------------------------------------------

def _second_level(fiber: FiberSpectrum) -> tuple[float, int]:
    if fiber.count < 2:
        raise ValueError("fiber spectrum needs at least two eigenvalues")
    return fiber.nu(2), fiber.multiplicity(2)


def second_neumann_mode(config: WarpedProductConfig, fiber: FiberSpectrum) -> CompactMode:
    """Second Neumann eigenfunction of the compact warped product.

    Compares ``mu_21`` (``nu = 0``, ``j = 2``) with ``mu_12``
    (``nu = nu_2``, ``j = 1``) and returns the mode of the smaller one.
    ``near_degenerate`` flags a relative gap below ``1e-6``;
    ``nu2_multiplicity > 1`` marks a repeated fiber eigenvalue.
    """
    if fiber.dim != config.n - 1:
        raise ValueError("fiber dimension must be n - 1")
    nu2, mult = _second_level(fiber)
    radial = solve_radial(config, 0.0, NEUMANN, 2, k=1)[1]
    transverse = solve_radial(config, nu2, NEUMANN, 1, k=2)[0]
    gap = abs(radial.mu - transverse.mu)
    degenerate = gap < DEGENERACY_RTOL * max(radial.mu, transverse.mu)
    info = {"mu_21": radial.mu, "mu_12": transverse.mu}
    if transverse.mu < radial.mu:
        return CompactMode("fiber", [(1.0, transverse, 2)], transverse.mu, config, degenerate, mult, info)
    return CompactMode("radial", [(1.0, radial, 1)], radial.mu, config, degenerate, mult, info)


def tune_degenerate_radius(config: WarpedProductConfig, make_fiber: Callable[[float], FiberSpectrum],
                           bracket: tuple[float, float], xtol: float = 1e-14) -> tuple[FiberSpectrum, float]:
    """Find the fiber scale ``rho`` in ``bracket`` with ``mu_12(rho) = mu_21``.

    ``mu_21`` does not depend on the fiber, so this is a 1-D root find.
    """
    mu21 = solve_radial(config, 0.0, NEUMANN, 2)[1].mu

    def gap(rho):
        return solve_radial(config, make_fiber(rho).nu(2), NEUMANN, 1)[0].mu - mu21

    rho = brentq(gap, *bracket, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return make_fiber(rho), rho


def classify_critical_point(fun: Callable[[float, np.ndarray], float], fiber: FiberSpectrum, r0: float,
                            x0, h: float = 1e-3, rtol: float = 1e-7) -> tuple[str, np.ndarray]:
    """Classify a critical point of ``u(r, x)`` from a finite-difference Hessian.

    ``fun(r, offsets)`` evaluates ``u`` at radius ``r`` and the chart point
    with the given tangent offsets at ``x0``.

    Returns
    -------
    label : {"max", "min", "saddle", "degenerate"}
    eigenvalues : ndarray
    """
    d = fiber.dim + 1
    H = np.zeros((d, d))

    def u(v):
        return fun(r0 + v[0], v[1:])

    base = u(np.zeros(d))
    for i in range(d):
        for j in range(i, d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = h
            ej[j] = h
            if i == j:
                H[i, i] = (u(ei) - 2 * base + u(-ei)) / h**2
            else:
                H[i, j] = H[j, i] = (u(ei + ej) - u(ei - ej) - u(-ei + ej) + u(-ei - ej)) / (4 * h * h)
    ev = np.linalg.eigvalsh(H)
    tol = rtol * max(1.0, np.max(np.abs(ev)))
    if np.all(ev < -tol):
        return "max", ev
    if np.all(ev > tol):
        return "min", ev
    if np.any(ev < -tol) and np.any(ev > tol):
        return "saddle", ev
    return "degenerate", ev


def degenerate_pair_mode(config: WarpedProductConfig, fiber: FiberSpectrum, r0: float,
                         rtol: float = 1e-6) -> CompactMode:
    """Combination ``w_21 v_1 + b w_12 v_2`` with a critical point at ``(r0, x0)``.

    ``x0`` is a maximizer of ``v_2`` (so its fiber gradient vanishes and
    ``v_2(x0) != 0``) and ``b = -w_21'(r0) v_1(x0) / (w_12'(r0) v_2(x0))``.
    The gradient at ``(r0, x0)`` and a Hessian classification are stored in
    ``info``.

    Raises
    ------
    ValueError
        If ``mu_21`` and ``mu_12`` differ by more than ``rtol`` relative, or
        ``w_12'(r0)`` vanishes.
    """
    lo, hi = config.nodes[0], config.nodes[-1]
    if not lo < r0 < hi:
        raise ValueError("r0 must lie strictly inside the interval")
    radial = solve_radial(config, 0.0, NEUMANN, 2, k=1)[1]
    transverse = solve_radial(config, fiber.nu(2), NEUMANN, 1, k=2)[0]
    if abs(radial.mu - transverse.mu) > rtol * max(radial.mu, transverse.mu):
        raise ValueError(f"eigenvalues not degenerate: mu_21={radial.mu}, mu_12={transverse.mu}")
    x0, v2x0 = maximize_on_fiber(fiber, lambda p: fiber.eigenfunction(2, p))
    v1 = fiber.eigenfunction(1, x0)[0]
    s21, s12 = radial.spline(), transverse.spline()
    d12 = float(s12(r0, 1))
    # derivative scale from the amplitude, so a constant w_12 is caught too
    scale = np.max(np.abs(transverse.w)) / (hi - lo)
    if abs(d12) <= 1e-8 * scale:
        raise ValueError("w_12'(r0) vanishes; the coefficient b is undefined")
    b = float(-float(s21(r0, 1)) * v1 / (d12 * v2x0))

    def u(r, offsets):
        pts = fiber.local_chart(x0, np.atleast_2d(offsets))
        return float(s21(r) * fiber.eigenfunction(1, pts)[0] + b * s12(r) * fiber.eigenfunction(2, pts)[0])

    hr = 1e-4
    zero = np.zeros(fiber.dim)
    grad = [(u(r0 + hr, zero) - u(r0 - hr, zero)) / (2 * hr)]
    for i in range(fiber.dim):
        e = np.zeros(fiber.dim)
        e[i] = hr
        grad.append((u(r0, e) - u(r0, -e)) / (2 * hr))
    grad = np.array(grad)
    label, ev = classify_critical_point(u, fiber, r0, x0)
    info = {"b": b, "x0": x0.tolist(), "r0": r0, "gradient": grad.tolist(),
            "gradient_norm": float(np.linalg.norm(grad)), "classification": label,
            "hessian_eigenvalues": ev.tolist(), "mu_21": radial.mu, "mu_12": transverse.mu}
    return CompactMode("degenerate-combination", [(1.0, radial, 1), (b, transverse, 2)],
                       0.5 * (radial.mu + transverse.mu), config, True, fiber.multiplicity(2), info)


# -- grid extrema -----------------------------------------------------------

@dataclass
class CompactExtrema:
    """Grid-local extrema of a compact mode on a product grid."""

    r: np.ndarray
    points: np.ndarray
    values: np.ndarray
    kind: np.ndarray
    boundary: np.ndarray

    def __len__(self) -> int:
        return int(self.r.size)

    @property
    def all_on_boundary(self) -> bool:
        return bool(np.all(self.boundary))

    def summary(self) -> dict:
        out = {}
        for kind in ("max", "min"):
            sel = self.kind == kind
            out[kind] = {"count": int(sel.sum()), "boundary": int((sel & self.boundary).sum()),
                         "interior": int((sel & ~self.boundary).sum()),
                         "r_values": sorted({round(float(x), 12) for x in self.r[sel]})[:16]}
        return out


def locate_hotspots_compact(mode: CompactMode, fiber: FiberSpectrum, r_points: int = 129,
                            fiber_resolution=None, rtol: float = 1e-12) -> CompactExtrema:
    """All grid-local maxima and minima of ``u`` on a product grid.

    A grid point is a local maximum when no neighbour (adjacent radius or
    adjacent fiber sample) exceeds it by more than ``rtol * max|u|``; minima
    likewise. Points with ``r`` at either end of the interval are labelled
    boundary.
    """
    nodes = mode.config.nodes
    r = np.linspace(nodes[0], nodes[-1], r_points)
    grid = fiber.sample_grid(fiber_resolution)
    U = mode.evaluate(fiber, r, grid.points)
    tol = rtol * np.max(np.abs(U))
    is_max = np.ones(U.shape, dtype=bool)
    is_min = np.ones(U.shape, dtype=bool)
    is_max[1:] &= U[1:] >= U[:-1] - tol
    is_max[:-1] &= U[:-1] >= U[1:] - tol
    is_min[1:] &= U[1:] <= U[:-1] + tol
    is_min[:-1] &= U[:-1] <= U[1:] + tol
    width = max(len(nb) for nb in grid.neighbors)
    table = np.array([np.pad(nb, (0, width - len(nb)), mode="edge") for nb in grid.neighbors])
    for col in range(width):
        other = U[:, table[:, col]]
        is_max &= U >= other - tol
        is_min &= U <= other + tol
    # exclude points that are both (locally constant); they carry no extremum information
    flat = is_max & is_min
    is_max &= ~flat
    is_min &= ~flat
    rows, cols, kinds = [], [], []
    for arr, name in ((is_max, "max"), (is_min, "min")):
        i, j = np.nonzero(arr)
        rows.append(i)
        cols.append(j)
        kinds.append(np.full(i.size, name))
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    return CompactExtrema(r[i], grid.points[j], U[i, j], np.concatenate(kinds),
                          (i == 0) | (i == r.size - 1))


def separated_eigenvalues(config: WarpedProductConfig, fiber: FiberSpectrum, count: int,
                          j_max: int = 8) -> np.ndarray:
    """Lowest ``count`` product eigenvalues ``mu_j(nu_k)`` with multiplicity.

    Each radial value is Richardson-extrapolated.
    """
    # mu_j(nu) >= nu / max f^2, so later levels cannot enter the lowest ``count``
    f_max = float(np.max(config.warping(config.nodes)))
    out = []
    for nu, mult in fiber.iter_levels():
        if len(out) >= count and nu / f_max**2 > sorted(out)[count - 1]:
            break
        mus = richardson_eigenvalues(config, nu, NEUMANN, j_max)
        out.extend(np.repeat(mus, mult))
    return np.sort(np.array(out))[:count]


def direct_surface_eigenvalues(config: WarpedProductConfig, rho: float, count: int,
                               n_theta: int = 512) -> np.ndarray:
    """Neumann eigenvalues of ``dr^2 + f^2 rho^2 dtheta^2`` by a 2-D finite-difference grid.

    The radial direction uses the same flux-form stencil as the separated
    solver and the angle a periodic second difference; nothing is separated,
    so this is an independent check for ``n = 2``.
    """
    from scipy.sparse import diags, kron
    from scipy.sparse.linalg import eigsh

    if config.n != 2:
        raise ValueError("direct surface check needs n = 2")
    rho = check_positive_scalar("rho", rho)
    r, diag, off, mass = _assemble(config, 0.0, NEUMANN)
    f = config.warping(r)
    Kr = diags([off, diag, off], [-1, 0, 1])
    Mr = diags(mass)
    Wr = diags(mass / f**2)
    ht = 2 * np.pi / n_theta
    ones = np.ones(n_theta)
    Kt = diags([-ones[:-1], 2 * ones, -ones[:-1]], [-1, 0, 1]).tolil()
    Kt[0, -1] = Kt[-1, 0] = -1.0
    Kt = Kt.tocsr() / (ht * ht * rho * rho)
    It = diags(ones)
    A = (kron(Kr, It) + kron(Wr, Kt)).tocsc()
    B = kron(Mr, It).tocsc()
    vals = eigsh(A, k=count, M=B, sigma=-1e-3, which="LM", return_eigenvectors=False)
    return np.sort(vals)
