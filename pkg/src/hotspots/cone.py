"""Heat flow on the cone over a closed fiber.

The cone ``C(M) = [0, inf) x M / ({0} x M)`` carries the metric
``dr^2 + r^2 h``. Its heat kernel separates into fiber modes,

    p_t((r,x),(s,y)) = sum_k P_{gamma_k}(r, s, t) v_k(x) v_k(y),
    P_gamma(r, s, t) = (rs)^(-n/2) (rs/2t) exp(-(r^2+s^2)/4t) I_gamma(rs/2t),

with ``gamma_k = sqrt((n-2)^2/4 + nu_k)``. Initial data are finite mode
sums ``phi(s, y) = sum_k psi_k(s) v_k(y)``, so each mode of the solution is
a 1-D radial integral ``w_k(r, t) = int P_{gamma_k}(r, s, t) psi_k(s) s^(n-1) ds``.
Everything is evaluated in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from ._gamma import lgamma
from ._validation import check_finite_nonneg, check_int, check_positive_scalar
from .bessel import log_iv
from .fiber import FiberSpectrum, gammas, maximize_on_fiber

DEFAULT_MAX_TERMS = 4096
KERNEL_MAX_TERMS = 16384
F_ZERO_THRESHOLD = 1e-12


class HypothesisViolation(ValueError):
    """Initial data violate the positivity or transversality assumptions."""


class NoTransverseData(HypothesisViolation):
    """Every transverse moment of the initial data vanishes."""


class UncertifiedPlanError(ValueError):
    """A truncation plan is used outside the window it was certified for."""


class TruncationError(ValueError):
    """The requested tolerance cannot be certified below the term cap."""


# -- setup types ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConeSetup:
    """Cone of total dimension ``n`` over ``fiber`` (``fiber.dim == n - 1``)."""

    n: int
    fiber: FiberSpectrum

    def __post_init__(self):
        check_int("n", self.n, minimum=3)
        if self.fiber.dim != self.n - 1:
            raise ValueError(f"fiber dimension {self.fiber.dim} must equal n - 1 = {self.n - 1}")

    @property
    def gamma(self) -> np.ndarray:
        return gammas(self.fiber, self.n)

    @property
    def gamma1(self) -> float:
        return 0.5 * (self.n - 2)

    def gamma_of(self, k: int) -> float:
        return float(self.gamma[self.fiber._check_index(k) - 1])

    def distance(self, r, x, s, y) -> np.ndarray:
        """Cone distance between ``(r, x)`` and ``(s, y)`` (rows matched)."""
        r = np.asarray(r, float)
        s = np.asarray(s, float)
        ang = np.minimum(self.fiber.distance(x, y) / _fiber_unit(self.fiber), np.pi)
        return np.sqrt(np.maximum(r * r + s * s - 2 * r * s * np.cos(ang), 0.0))


def _fiber_unit(fiber: FiberSpectrum) -> float:
    # intrinsic distance on the cone's unit-radius slice is the fiber distance itself
    return 1.0


_PROFILE_KINDS = ("indicator", "bump", "poly")


@dataclass(frozen=True)
class RadialProfile:
    """Compactly supported radial profile on ``[lo, hi]``.

    ``indicator`` is ``amplitude`` on the support, ``bump`` is the smooth
    ``amplitude * exp(1 - 1/(1 - x^2))`` with ``x`` mapped to ``(-1, 1)``,
    and ``poly`` is ``amplitude * sum(coeffs[i] s^i)`` on the support.
    """

    kind: str = "indicator"
    lo: float = 1.0
    hi: float = 2.0
    amplitude: float = 1.0
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise ValueError(f"profile kind must be one of {_PROFILE_KINDS}")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo < 0 or self.hi <= self.lo:
            raise ValueError("profile support must satisfy 0 <= lo < hi < inf")
        if self.kind == "poly" and not self.coeffs:
            raise ValueError("poly profile needs coeffs")

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, float)
        inside = (s >= self.lo) & (s <= self.hi)
        if self.kind == "indicator":
            val = np.full_like(s, self.amplitude)
        elif self.kind == "bump":
            x = (2 * s - self.lo - self.hi) / (self.hi - self.lo)
            with np.errstate(divide="ignore", over="ignore"):
                val = self.amplitude * np.exp(1.0 - 1.0 / np.maximum(1.0 - x * x, 1e-300))
        else:
            val = self.amplitude * np.polynomial.polynomial.polyval(s, self.coeffs)
        return np.where(inside, val, 0.0)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "lo": self.lo, "hi": self.hi, "amplitude": self.amplitude}
        if self.coeffs:
            out["coeffs"] = list(self.coeffs)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RadialProfile":
        d = dict(d)
        if "coeffs" in d:
            d["coeffs"] = tuple(float(c) for c in d["coeffs"])
        return cls(**d)


@dataclass(frozen=True)
class InitialCondition:
    """``phi(s, y) = sum psi(s) v_k(y)`` over ``terms = ((k, profile), ...)``."""

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ValueError("initial condition needs at least one term")
        for k, prof in self.terms:
            check_int("mode index", k, minimum=1)
            if not isinstance(prof, RadialProfile):
                raise TypeError("terms must pair an index with a RadialProfile")

    @property
    def S(self) -> float:
        """Support radius."""
        return max(p.hi for _, p in self.terms)

    @property
    def indices(self) -> list[int]:
        return sorted({k for k, _ in self.terms})

    def profiles(self, k: int) -> list[RadialProfile]:
        return [p for kk, p in self.terms if kk == k]

    def psi(self, k: int, s) -> np.ndarray:
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        for p in self.profiles(k):
            out = out + p(s)
        return out

    def validate(self, cone: ConeSetup) -> None:
        """Check indices against the fiber and the positivity of total mass."""
        for k in self.indices:
            if k > cone.fiber.count:
                raise ValueError(f"mode index {k} beyond fiber spectrum count {cone.fiber.count}")
            if not cone.fiber.evaluable(k):
                raise ValueError(f"mode {k} cannot be evaluated on this fiber")
        if total_initial_mass(cone, self) <= 0:
            raise HypothesisViolation("initial data must have positive total mass")

    def to_dict(self) -> dict:
        return {"terms": [{"k": k, **p.to_dict()} for k, p in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "InitialCondition":
        terms = []
        for item in d["terms"]:
            item = dict(item)
            k = item.pop("k")
            terms.append((int(k), RadialProfile.from_dict(item)))
        return cls(tuple(terms))


# -- quadrature helpers ----------------------------------------------------------

@lru_cache(maxsize=64)
def _legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def gauss_legendre(lo: float, hi: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to ``[lo, hi]``."""
    x, w = _legendre(int(nodes))
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _integrate_doubling(fun: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, rtol: float,
                        nodes: int = 32, max_nodes: int = 4096) -> tuple[np.ndarray, int]:
    """Integrate a vector-valued ``fun(s)`` (last axis = nodes) with node doubling.

    The node count doubles until every component changes by at most
    ``rtol`` relative (with a floor of ``1e-20`` times the largest entry).
    """
    s, w = gauss_legendre(lo, hi, nodes)
    prev = fun(s) @ w
    while nodes < max_nodes:
        nodes *= 2
        s, w = gauss_legendre(lo, hi, nodes)
        cur = fun(s) @ w
        scale = np.maximum(np.abs(cur), 1e-20 * np.max(np.abs(cur), initial=0.0))
        if np.all(np.abs(cur - prev) <= rtol * scale):
            return cur, nodes
        prev = cur
    return prev, nodes


# -- the radial kernel -------------------------------------------------------------

def log_p_gamma(gamma, r, s, t, n: int) -> np.ndarray:
    """Log of ``P_gamma(r, s, t)``, exact at ``r s = 0``.

    Uses ``P = ratio * (rs)^(gamma+1-n/2) (2t)^-(gamma+1) 2^-gamma
    exp(-(r^2+s^2)/4t) / Gamma(gamma+1)`` where ``ratio`` is
    ``I_gamma(z) / ((z/2)^gamma / Gamma(gamma+1))`` and equals 1 at ``z = 0``.
    """
    gamma, r, s, t = np.broadcast_arrays(*(np.asarray(a, float) for a in (gamma, r, s, t)))
    z = r * s / (2.0 * t)
    lg1 = lgamma(gamma + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(z > 0, log_iv(gamma, z) - gamma * np.log(0.5 * z) + lg1, 0.0)
        e = gamma + 1.0 - 0.5 * n
        power = np.where(np.abs(e) < 1e-14, 0.0, e * np.log(r * s))
    return (log_ratio + power - (gamma + 1.0) * np.log(2.0 * t) - gamma * math.log(2.0) - lg1
            - (r * r + s * s) / (4.0 * t))


def p_gamma(gamma, r, s, t, n: int = 3):
    """Radial heat-kernel factor ``P_gamma(r, s, t)``.

    Parameters
    ----------
    gamma : float or array_like
        Order, at least ``(n-2)/2``.
    r, s : float or array_like
        Radii, nonnegative.
    t : float or array_like
        Time, positive.
    n : int
        Cone dimension.

    Returns
    -------
    float or ndarray
        ``exp(log I_gamma(z) + log z - (r^2+s^2)/4t - (n/2) log(rs))`` with
        ``z = rs/2t``; the ``rs = 0`` limit is taken analytically.
    """
    check_finite_nonneg("r", r)
    check_finite_nonneg("s", s)
    check_finite_nonneg("t", t, strict=True)
    out = np.exp(log_p_gamma(gamma, r, s, t, n))
    return float(out) if out.ndim == 0 else out


def p_gamma_bound(gamma, r, s, t, n: int = 3):
    """Upper bound ``(rs)^(-n/2) e^{-(r-s)^2/4t} (rs/2t)^(gamma+1) / Gamma(gamma)``."""
    gamma, r, s, t = np.broadcast_arrays(*(np.asarray(a, float) for a in (gamma, r, s, t)))
    with np.errstate(divide="ignore"):
        lv = (-0.5 * n * np.log(r * s) - (r - s) ** 2 / (4 * t) + (gamma + 1) * np.log(r * s / (2 * t))
              - lgamma(gamma))
    out = np.exp(lv)
    return float(out) if out.ndim == 0 else out


def _leading_coefficient(gamma: float, s, t: float, n: int) -> np.ndarray:
    # lim_{r->0} P_gamma(r, s, t) / r^(gamma - (n-2)/2)
    e = gamma + 1.0 - 0.5 * n
    with np.errstate(divide="ignore"):
        lv = (e * np.log(s) - (gamma + 1) * math.log(2 * t) - gamma * math.log(2.0) - lgamma(gamma + 1.0)
              - s * s / (4 * t))
    return np.exp(lv)


# -- truncation plans ----------------------------------------------------------------

@dataclass(frozen=True)
class TruncationPlan:
    """Certified cutoff ``K`` for the mode series.

    For ``kind == "solution"`` the bound is absolute: on the window
    ``r <= R sqrt(t)``, ``t >= t_min`` and for data supported in ``[0, S]``,
    ``|u - u_K| <= certified_bound``. For ``kind == "kernel"`` the bound is
    relative to the coincident-fiber kernel ``p_t((r,x),(s,x))`` for
    ``rs/2t <= z_max``.
    """

    K: int
    tol: float
    certified_bound: float
    kind: str = "solution"
    R: float = math.inf
    t_min: float = 0.0
    S: float = 0.0
    z_max: float = 0.0
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.certified_bound <= self.tol:
            raise TruncationError("certified bound exceeds the requested tolerance")

    def covers(self, r_max: float, t: float, S: float | None = None) -> bool:
        if self.kind != "solution":
            return False
        ok = t >= self.t_min * (1 - 1e-12) and r_max <= self.R * math.sqrt(t) * (1 + 1e-12)
        return ok and (S is None or S <= self.S * (1 + 1e-12))

    def to_dict(self) -> dict:
        return {"K": self.K, "tol": self.tol, "certified_bound": self.certified_bound, "kind": self.kind,
                "R": self.R, "t_min": self.t_min, "S": self.S, "z_max": self.z_max}


def radial_mass(cone: ConeSetup, phi: InitialCondition, rtol: float = 1e-12) -> float:
    """``int sqrt(sum_k psi_k(s)^2) s^(n-1) ds`` (the fiber-L2 radial mass)."""
    edges = sorted({p.lo for _, p in phi.terms} | {p.hi for _, p in phi.terms})
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        def fun(s):
            sq = sum(phi.psi(k, s) ** 2 for k in phi.indices)
            return np.sqrt(sq) * s ** (cone.n - 1)
        val, _ = _integrate_doubling(fun, a, b, rtol)
        total += float(val)
    return total


def _level_envelopes(cone: ConeSetup, log_coef: Callable[[float], float], max_terms: int):
    """Per-level envelope sums ``mult * sqrt(mult/Vol) * exp(log_coef(gamma))``.

    On a homogeneous fiber every mode of a level obeys
    ``|v_k| <= sqrt(mult/Vol)``. Enumeration stops once the terms shrink
    geometrically (ratio at most 1/2) below ``1e-30`` of the running sum; the
    last term then bounds the remainder.
    """
    ends, terms = [], []
    idx = 0
    total = 0.0
    for nu, mult in cone.fiber.iter_levels():
        idx += mult
        g = math.sqrt(0.25 * (cone.n - 2) ** 2 + nu)
        term = mult * math.sqrt(mult / cone.fiber.volume) * math.exp(log_coef(g))
        total += term
        ends.append(idx)
        terms.append(term)
        if len(terms) > 1 and term <= 0.5 * terms[-2] and term <= 1e-30 * total:
            terms[-1] = 2 * term
            break
        if idx > 64 * max_terms:
            raise TruncationError("envelope series does not decay within the enumeration budget")
    return np.array(ends), np.array(terms)


def truncation_order(cone: ConeSetup, phi: InitialCondition, R: float, t_min: float, tol: float,
                     max_terms: int = DEFAULT_MAX_TERMS) -> TruncationPlan:
    """Smallest ``K`` (ending a complete fiber level) whose dropped modes sum to at most ``tol``.

    The per-mode envelope on ``{r <= R sqrt(t), t >= t_min}`` is

        (R S)^(g - n/2 + 1) t_min^(-g/2 - n/4 - 1/2) / (2^(2g+1) Gamma(g+1))
        * |v_k|_inf * m_phi,

    with ``g = gamma_k`` and ``m_phi`` the radial mass. It follows from
    ``I_g(z) <= (z/2)^g e^z / Gamma(g+1)`` and ``e^(-(r-s)^2/4t) <= 1``.

    Raises
    ------
    TruncationError
        If more than ``max_terms`` modes would be needed, or the fiber is
        not homogeneous.
    """
    R = check_positive_scalar("R", R)
    t_min = check_positive_scalar("t_min", t_min)
    tol = check_positive_scalar("tol", tol)
    if not cone.fiber.homogeneous:
        raise TruncationError("sup-norm envelopes need a homogeneous fiber")
    n = cone.n
    S = phi.S
    mass = radial_mass(cone, phi)

    def log_coef(g):
        return ((g - 0.5 * n + 1) * math.log(R * S) + (-0.5 * g - 0.25 * n - 0.5) * math.log(t_min)
                - (2 * g + 1) * math.log(2.0) - float(lgamma(g + 1.0)) + math.log(mass))

    ends, terms = _level_envelopes(cone, log_coef, max_terms)
    tails = np.concatenate([np.cumsum(terms[::-1])[::-1][1:], [0.0]])
    ok = np.flatnonzero(tails <= tol)
    if not ok.size or ends[ok[0]] > max_terms:
        need = int(ends[ok[0]]) if ok.size else -1
        raise TruncationError(f"tolerance {tol} needs K = {need} > cap {max_terms}")
    j = int(ok[0])
    return TruncationPlan(int(ends[j]), tol, float(tails[j]), "solution", R, t_min, S, 0.0,
                          {"radial_mass": mass, "levels": j + 1})


def kernel_truncation(cone: ConeSetup, z_max: float, tol: float,
                      max_terms: int = KERNEL_MAX_TERMS, z_samples: int = 64) -> TruncationPlan:
    """Cutoff ``K`` for the kernel series on ``rs/2t <= z_max``.

    With homogeneous fibers the tail obeys
    ``|p - p_K| <= l(r,s,t) / Vol * sum_{levels beyond K} mult I_g(z)``,
    so the certified quantity is the largest ratio of that tail to
    the kept coincident-point sum, taken over a grid of ``z`` values.
    ``K`` always ends on a complete level.
    """
    z_max = check_finite_nonneg("z_max", z_max).item()
    tol = check_positive_scalar("tol", tol)
    if not cone.fiber.homogeneous:
        raise UncertifiedPlanError("kernel plans need a homogeneous fiber")
    zs = np.unique(np.concatenate([[z_max], np.geomspace(max(z_max, 1e-8) * 1e-6, max(z_max, 1e-8), z_samples)]))
    zs = zs[zs > 0] if z_max > 0 else np.array([1e-8])
    levels = []
    idx = 0
    for nu, mult in cone.fiber.iter_levels():
        g = math.sqrt(0.25 * (cone.n - 2) ** 2 + nu)
        idx += mult
        levels.append((g, mult, idx))
        if g > 4 * z_max + 40 and idx > 8:
            break
        if idx > 4 * max_terms:
            break
    g_arr = np.array([lv[0] for lv in levels])
    mult = np.array([lv[1] for lv in levels], float)
    # scaled by exp(-z) to keep magnitudes finite
    logI = log_iv(g_arr[:, None], zs[None, :]) - zs[None, :]
    terms = mult[:, None] * np.exp(logI)
    head = np.cumsum(terms, axis=0)
    tail = np.cumsum(terms[::-1], axis=0)[::-1]
    tail = np.vstack([tail[1:], np.zeros((1, zs.size))])
    # remainder past the enumerated levels: terms decay faster than geometrically there
    tail = tail + terms[-1][None, :]
    ratio = np.max(tail / head, axis=1)
    ok = np.flatnonzero(ratio <= tol)
    if not ok.size or levels[ok[0]][2] > max_terms:
        raise TruncationError(f"kernel tolerance {tol} not reachable with {max_terms} terms at z_max={z_max}")
    j = int(ok[0])
    K = levels[j][2]
    return TruncationPlan(K, tol, float(ratio[j]), "kernel", z_max=z_max,
                          details={"levels": j + 1})


def heat_kernel(cone: ConeSetup, a, b, t: float, plan: TruncationPlan) -> float:
    """Truncated heat kernel ``p_t(a, b)`` for points ``a = (r, x)``, ``b = (s, y)``.

    The sum runs over ``k <= plan.K`` in ascending order, so the value is
    bitwise symmetric in ``a`` and ``b``.

    Raises
    ------
    UncertifiedPlanError
        If ``plan`` is not a kernel plan covering ``rs/2t``.
    """
    t = check_positive_scalar("t", t)
    r, x = a
    s, y = b
    r = float(check_finite_nonneg("r", r))
    s = float(check_finite_nonneg("s", s))
    if plan.kind != "kernel" or r * s / (2 * t) > plan.z_max * (1 + 1e-12):
        raise UncertifiedPlanError("kernel plan does not cover rs/2t")
    if plan.K > cone.fiber.count:
        raise UncertifiedPlanError(f"fiber spectrum has {cone.fiber.count} modes but the plan needs {plan.K}")
    ks = np.arange(1, plan.K + 1)
    g = cone.gamma[: plan.K]
    P = np.exp(log_p_gamma(g, r, s, t, cone.n))
    vx = cone.fiber.eigenfunctions(ks, x)[:, 0]
    vy = cone.fiber.eigenfunctions(ks, y)[:, 0]
    return float(np.sum(P * (vx * vy)))


def calibrate_gaussian_constants(cone: ConeSetup, samples: np.ndarray, values: np.ndarray,
                                 C2: float = 8.0) -> float:
    """Smallest ``C1`` with ``p <= C1 t^(-n/2) exp(-(r-s)^2 / (C2 t))`` on the samples.

    ``samples`` has columns ``(r, s, t)``.
    """
    r, s, t = samples.T
    return float(np.max(values * t ** (0.5 * cone.n) * np.exp((r - s) ** 2 / (C2 * t))))


# -- radial transforms ----------------------------------------------------------------

def _transform(cone: ConeSetup, phi: InitialCondition, k: int, r: np.ndarray, t: float, rtol: float,
               derivative: bool, nodes: int = 32) -> tuple[np.ndarray, np.ndarray | None]:
    n = cone.n
    g = cone.gamma_of(k)
    g1 = cone.gamma1
    r = np.asarray(r, float)
    pos = r > 0
    rp = r[pos]
    w = np.zeros(r.size)
    dw = np.zeros(r.size) if derivative else None
    for prof in phi.profiles(k):
        def fun(s, rr=rp):
            P = np.exp(log_p_gamma(g, rr[:, None], s[None, :], t, n))
            weight = prof(s) * s ** (n - 1)
            vals = [P * weight]
            if derivative:
                P1 = np.exp(log_p_gamma(g + 1, rr[:, None], s[None, :], t, n))
                dP = ((g - g1) / rr[:, None] - rr[:, None] / (2 * t)) * P + (s[None, :] / (2 * t)) * P1
                vals.append(dP * weight)
            return np.concatenate(vals, axis=0)

        if rp.size:
            val, _ = _integrate_doubling(fun, prof.lo, prof.hi, rtol, nodes)
            w[pos] += val[: rp.size]
            if derivative:
                dw[pos] += val[rp.size:]
        if np.any(~pos):
            def fun0(s):
                return (np.exp(log_p_gamma(g, 0.0, s, t, n)) * prof(s) * s ** (n - 1))[None, :]

            v0, _ = _integrate_doubling(fun0, prof.lo, prof.hi, rtol, nodes)
            w[~pos] += v0[0]
            if derivative:
                e = g - g1
                if e < 1e-12 or e > 1 + 1e-12:
                    d0 = 0.0
                else:
                    def fun1(s):
                        return (_leading_coefficient(g, s, t, n) * prof(s) * s ** (n - 1))[None, :]

                    c, _ = _integrate_doubling(fun1, prof.lo, prof.hi, rtol, nodes)
                    d0 = float(c[0]) if abs(e - 1) <= 1e-12 else math.copysign(math.inf, float(c[0]))
                dw[~pos] += d0
    return w, dw


def w_gamma_transform(cone: ConeSetup, phi: InitialCondition, k: int, r, t: float,
                      rtol: float = 1e-10):
    """Radial mode ``w_k(r, t) = int P_{gamma_k}(r, s, t) psi_k(s) s^(n-1) ds``.

    Gauss-Legendre on each profile's support, doubling the node count until
    the values agree to ``rtol``. Returns zeros when ``phi`` has no
    ``k``-th term.
    """
    t = check_positive_scalar("t", t)
    r_arr = check_finite_nonneg("r", r)
    w, _ = _transform(cone, phi, k, np.atleast_1d(r_arr), t, rtol, False)
    return float(w[0]) if r_arr.ndim == 0 else w


def w_gamma_derivative(cone: ConeSetup, phi: InitialCondition, k: int, r, t: float, rtol: float = 1e-10):
    """``d/dr w_k(r, t)`` assembled term-wise from the recurrence in ``gamma``.

    At ``r = 0`` the one-sided limit is returned: zero when the order gap
    ``gamma_k - (n-2)/2`` is zero or exceeds one, finite when it equals one,
    and signed infinity in between.
    """
    t = check_positive_scalar("t", t)
    r_arr = check_finite_nonneg("r", r)
    _, dw = _transform(cone, phi, k, np.atleast_1d(r_arr), t, rtol, True)
    return float(dw[0]) if r_arr.ndim == 0 else dw


@dataclass(eq=False)
class HeatField:
    """Solution samples on the product grid ``r x points`` at time ``t``."""

    t: float
    r: np.ndarray
    points: np.ndarray
    u: np.ndarray
    du_dr: np.ndarray
    K: int
    evaluate: Callable | None = field(default=None, repr=False)
    fiber: FiberSpectrum | None = field(default=None, repr=False)


def _field_terms(cone: ConeSetup, phi: InitialCondition, K: int, r: np.ndarray, t: float, rtol: float,
                 derivative: bool):
    ks = [k for k in phi.indices if k <= K]
    W, D = [], []
    for k in ks:
        w, dw = _transform(cone, phi, k, r, t, rtol, derivative)
        W.append(w)
        D.append(dw)
    return ks, W, D


def solve_heat(cone: ConeSetup, phi: InitialCondition, t: float, r, points, plan: TruncationPlan,
               rtol: float = 1e-10) -> HeatField:
    """Solution ``u = sum_{k <= K} w_k(r, t) v_k(x)`` and its radial derivative.

    Parameters
    ----------
    cone, phi : ConeSetup, InitialCondition
    t : float
    r : array_like
        Radii of the evaluation grid.
    points : array_like
        Fiber points of the evaluation grid.
    plan : TruncationPlan
        Solution plan whose window contains ``max(r)`` at time ``t``.

    Raises
    ------
    UncertifiedPlanError
        If the plan does not cover the grid.
    """
    t = check_positive_scalar("t", t)
    r = np.atleast_1d(check_finite_nonneg("r", r))
    pts = cone.fiber.as_points(points)
    if not plan.covers(float(r.max()), t, phi.S):
        raise UncertifiedPlanError("evaluation grid lies outside the certified window")
    ks, W, D = _field_terms(cone, phi, plan.K, r, t, rtol, True)
    u = np.zeros((r.size, pts.shape[0]))
    du = np.zeros_like(u)
    if ks:
        V = cone.fiber.eigenfunctions(ks, pts)
        for i in range(len(ks)):
            u += np.outer(W[i], V[i])
            with np.errstate(invalid="ignore"):
                du += np.outer(D[i], V[i])

    def evaluate(rr, pp, _t=t):
        rr = np.atleast_1d(np.asarray(rr, float))
        pp = cone.fiber.as_points(pp)
        kk, WW, DD = _field_terms(cone, phi, plan.K, rr, _t, rtol, True)
        uu = np.zeros((rr.size, pp.shape[0]))
        dd = np.zeros_like(uu)
        if kk:
            VV = cone.fiber.eigenfunctions(kk, pp)
            for i in range(len(kk)):
                uu += np.outer(WW[i], VV[i])
                with np.errstate(invalid="ignore"):
                    dd += np.outer(DD[i], VV[i])
        return uu, dd

    return HeatField(t, r, pts, u, du, plan.K, evaluate, cone.fiber)


def total_initial_mass(cone: ConeSetup, phi: InitialCondition) -> float:
    """``int phi dV = Vol^(1/2) int psi_1(s) s^(n-1) ds``."""
    total = 0.0
    for prof in phi.profiles(1):
        val, _ = _integrate_doubling(lambda s: (prof(s) * s ** (cone.n - 1))[None, :], prof.lo, prof.hi, 1e-13)
        total += float(val[0])
    return math.sqrt(cone.fiber.volume) * total


def solution_mass(cone: ConeSetup, phi: InitialCondition, t: float, rtol: float = 1e-12,
                  panels: int = 24) -> float:
    """``int u(., t) dV`` by composite Gauss-Legendre over ``[0, S + 20 sqrt(t)]``."""
    t = check_positive_scalar("t", t)
    if 1 not in phi.indices:
        return 0.0
    edges = np.linspace(0.0, phi.S + 20.0 * math.sqrt(t), panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        s, w = gauss_legendre(a, b, 48)
        vals = w_gamma_transform(cone, phi, 1, s, t, rtol)
        total += float(np.sum(w * vals * s ** (cone.n - 1)))
    return math.sqrt(cone.fiber.volume) * total


def psi_functional(cone: ConeSetup, phi: InitialCondition, k: int, rtol: float = 1e-13) -> float:
    """Moment ``Psi_k = int psi_k(s) s^(gamma_k + n/2) ds``."""
    g = cone.gamma_of(k)
    total = 0.0
    for prof in phi.profiles(k):
        val, _ = _integrate_doubling(lambda s: (prof(s) * s ** (g + 0.5 * cone.n))[None, :], prof.lo, prof.hi,
                                     rtol)
        total += float(val[0])
    return total


def long_time_w(cone: ConeSetup, phi: InitialCondition, k: int, r, t: float):
    """Leading large-``t`` term of ``w_k``:
    ``Psi_k / (2^(2g+1) Gamma(g+1)) r^(g-n/2+1) t^-(g+1) e^(-r^2/4t)``."""
    g = cone.gamma_of(k)
    r = np.asarray(r, float)
    coef = psi_functional(cone, phi, k) * math.exp(-(2 * g + 1) * math.log(2.0) - lgamma(g + 1.0))
    with np.errstate(divide="ignore"):
        return coef * r ** (g - 0.5 * cone.n + 1) * t ** (-(g + 1)) * np.exp(-r * r / (4 * t))


# -- asymptotic prediction ---------------------------------------------------------------

@dataclass(eq=False)
class Prediction:
    """Long-time hot-spot prediction for given cone and data.

    Attributes
    ----------
    regime : int
        1 (``nu >= 2n``), 2 (``n-1 < nu < 2n``), 3 (``nu = n-1``), 4 (``nu < n-1``),
        with ``nu`` the active fiber eigenvalue.
    alpha : float
        ``(n/2 - g)/(n/2 - g + 1)`` for the active order ``g``.
    R_infinity : float
        Limit prefactor of the hot-spot radius (0 in regime 1).
    r_infinity : float
        ``Vol * max F / (n int phi)``.
    """

    regime: int
    alpha: float
    R_infinity: float
    r_infinity: float
    nu_active: float
    gamma_active: float
    active_indices: list
    fallback_index: int | None
    G1: float
    m: float
    maxF: float
    coefficients: dict
    F: Callable
    J: Callable
    A_infinity: np.ndarray
    x_star: np.ndarray
    H_infinity: str
    mass: float
    epsilon: float = 0.05

    def U_epsilon(self, points, epsilon: float | None = None) -> np.ndarray:
        """Boolean mask of points with ``J >= m - epsilon``."""
        eps = self.epsilon if epsilon is None else epsilon
        return self.J(points) >= self.m - eps

    def to_dict(self) -> dict:
        return {"regime": self.regime, "alpha": self.alpha, "R_infinity": self.R_infinity,
                "r_infinity": self.r_infinity, "nu_active": self.nu_active, "gamma_active": self.gamma_active,
                "active_indices": self.active_indices, "fallback_index": self.fallback_index, "G1": self.G1,
                "m": self.m, "max_F": self.maxF, "H_infinity": self.H_infinity,
                "A_infinity": np.asarray(self.A_infinity).tolist(), "x_star": np.asarray(self.x_star).tolist(),
                "mass": self.mass, "epsilon": self.epsilon}


def classify_nu(nu: float, n: int) -> int:
    """Regime number from the fiber eigenvalue ``nu`` and dimension ``n``."""
    if abs(nu - (n - 1)) <= 1e-12 * (n - 1):
        return 3
    if nu >= 2 * n:
        return 1
    if nu > n - 1:
        return 2
    return 4


def predicted_limit(cone: ConeSetup, phi: InitialCondition, epsilon: float = 0.05,
                    max_index: int | None = None) -> Prediction:
    """Predicted long-time behaviour of the hot spots.

    The active level is the lowest nonzero fiber level on which
    ``F = sum Psi_k v_k`` is not identically zero (normally the ``nu_2``
    level; higher levels are the fallback, recorded in ``fallback_index``).

    Raises
    ------
    HypothesisViolation
        If the data have nonpositive mass.
    NoTransverseData
        If every transverse moment vanishes up to the spectrum cap.
    """
    phi.validate(cone)
    fib = cone.fiber
    n = cone.n
    mass = total_initial_mass(cone, phi)
    psi = {k: psi_functional(cone, phi, k) for k in phi.indices}
    g1 = cone.gamma1
    G1 = psi.get(1, 0.0) / math.exp((2 * g1 + 1) * math.log(2.0) + lgamma(g1 + 1.0)) / math.sqrt(fib.volume)
    cap = min(fib.count, max_index or fib.count)
    chosen = None
    for a, b in fib.level_slices[1:]:
        if a >= cap:
            break
        members = [k for k in range(a + 1, b + 1) if k in psi and psi[k] != 0.0]
        if not members:
            continue
        grid = fib.sample_grid()
        Fv = sum(psi[k] * fib.eigenfunction(k, grid.points) for k in members)
        if np.max(np.abs(Fv)) > F_ZERO_THRESHOLD:
            chosen = (a, b, members)
            break
    if chosen is None:
        raise NoTransverseData("no transverse data: F vanishes on every level up to the cap")
    a, b, members = chosen
    nu = fib.nu(a + 1)
    g = math.sqrt(0.25 * (n - 2) ** 2 + nu)
    coef = {k: psi[k] / math.exp((2 * g + 1) * math.log(2.0) + lgamma(g + 1.0)) for k in members}

    def F(points, _m=members):
        return sum(psi[k] * fib.eigenfunction(k, points) for k in _m)

    def J(points, _m=members):
        return sum(coef[k] * fib.eigenfunction(k, points) for k in _m)

    x_star, maxF = maximize_on_fiber(fib, F)
    m = float(J(x_star[None, :])[0])
    regime = classify_nu(nu, n)
    denom = 0.5 * n - g + 1
    # at nu = 2n the exponent formula has a pole; only regime 1 reaches it
    alpha = (0.5 * n - g) / denom if denom != 0 else -math.inf
    if regime == 1:
        R_inf = 0.0
    else:
        R_inf = (2 * (g - g1) * m / G1) ** (1.0 / (0.5 * n - g + 1))
    r_inf = fib.volume * maxF / (n * mass)
    grid = fib.sample_grid()
    Fg = F(grid.points)
    A = grid.points[Fg >= maxF - 1e-9 * abs(maxF)]
    A = np.vstack([x_star[None, :], A[fib.distance(A, np.broadcast_to(x_star, A.shape)) > 1e-9]])
    if regime == 3:
        H = f"{{r_inf}} x A_inf with r_inf={r_inf:.12g}" if r_inf > 0 else "{cone point}"
    elif regime in (1, 2):
        H = "{cone point}"
    else:
        H = "escapes to infinity along U_epsilon"
    fallback = None if a == fib.level_slices[1][0] else a + 1
    return Prediction(regime, alpha, R_inf, r_inf, nu, g, members, fallback, G1, m, maxF, coef, F, J, A, x_star,
                      H, mass, epsilon)


# -- estimator wrapper -------------------------------------------------------------------

class ConeHeatModel(BaseEstimator):
    """Estimator-style wrapper: ``fit`` on initial data, ``predict`` the solution.

    Parameters
    ----------
    fiber : FiberSpectrum
    n : int
        Cone dimension.
    R : float
        Window constant; solutions are certified for ``r <= R sqrt(t)``.
    t_min : float
        Earliest certified time.
    tol : float
        Truncation tolerance.
    rtol : float
        Quadrature tolerance for the radial transforms.
    max_terms : int
        Cap on the truncation order.
    """

    def __init__(self, fiber=None, n=3, R=8.0, t_min=1.0, tol=1e-10, rtol=1e-10, max_terms=DEFAULT_MAX_TERMS):
        self.fiber = fiber
        self.n = n
        self.R = R
        self.t_min = t_min
        self.tol = tol
        self.rtol = rtol
        self.max_terms = max_terms

    def fit(self, phi: InitialCondition, y=None):
        if self.fiber is None:
            raise ValueError("fiber must be set")
        self.cone_ = ConeSetup(self.n, self.fiber)
        phi.validate(self.cone_)
        self.phi_ = phi
        self.plan_ = truncation_order(self.cone_, phi, self.R, self.t_min, self.tol, self.max_terms)
        self.psi_ = {k: psi_functional(self.cone_, phi, k) for k in phi.indices}
        self.mass_ = total_initial_mass(self.cone_, phi)
        return self

    def _check_fitted(self):
        if not hasattr(self, "plan_"):
            raise RuntimeError("call fit() first")

    def field(self, t: float, r, points) -> HeatField:
        self._check_fitted()
        return solve_heat(self.cone_, self.phi_, t, r, points, self.plan_, self.rtol)

    def predict(self, X) -> np.ndarray:
        """Evaluate ``u`` at rows ``(r, t, *fiber_point)`` of ``X``."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, float))
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            out[i] = self.field(row[1], row[:1], row[2:][None, :]).u[0, 0]
        return out

    def prediction(self, epsilon: float = 0.05) -> Prediction:
        self._check_fitted()
        return predicted_limit(self.cone_, self.phi_, epsilon)
