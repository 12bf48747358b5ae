"""Modified Bessel function of the first kind for real order and argument.

Three evaluation routes are provided, all in the log domain:

* power series, for moderate arguments;
* the Poisson integral, reduced to generalized Gauss-Laguerre quadrature,
  for large arguments and small orders;
* the Debye uniform expansion, for large arguments and large orders.

The route is chosen from ``SERIES_Z_MAX`` and ``UNIFORM_MIN_ORDER``. These
values come from the accuracy sweep reproduced in ``tests/test_bessel.py``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import roots_genlaguerre

from ._gamma import lgamma
from ._validation import check_finite_nonneg

SERIES_Z_MAX = 20.0
UNIFORM_MIN_ORDER = 10.0
INTEGRAL_NODES = 80
DEBYE_TERMS = 12
SERIES_MAX_TERMS = 2000

METHOD_SERIES = "series"
METHOD_INTEGRAL = "integral"
METHOD_UNIFORM = "uniform-asymptotic"


def _debye_polynomials(count: int) -> list[np.ndarray]:
    # U_{k+1}(p) = p^2 (1 - p^2) U_k'(p) / 2 + (1/8) int_0^p (1 - 5 t^2) U_k(t) dt
    p = Polynomial([0.0, 1.0])
    polys = [Polynomial([1.0])]
    for _ in range(count):
        u = polys[-1]
        nxt = 0.5 * p**2 * (1 - p**2) * u.deriv() + ((1 - 5 * p**2) * u).integ() / 8.0
        polys.append(nxt)
    return [q.coef.copy() for q in polys]


_DEBYE = _debye_polynomials(DEBYE_TERMS)


@dataclass(frozen=True)
class BesselEval:
    """Result of a single evaluation of ``I_order(z)``.

    Attributes
    ----------
    order, z : float
        Inputs.
    value : float
        ``I_order(z)``; may be ``inf`` when the log exceeds the float range.
    log_value : float
        Natural log of the value (``-inf`` when the value is zero).
    method : str
        One of ``"series"``, ``"integral"``, ``"uniform-asymptotic"``.
    """

    order: float
    z: float
    value: float
    log_value: float
    method: str


def series_log_iv(gamma, z) -> np.ndarray:
    """Log of ``I_gamma(z)`` from the ascending power series.

    Accurate for every ``z`` tested, but the number of terms grows like ``z``.
    ``z`` must be positive.
    """
    gamma, z = np.broadcast_arrays(np.asarray(gamma, float), np.asarray(z, float))
    q = 0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for j in range(SERIES_MAX_TERMS):
        if not active.any():
            break
        term = np.where(active, term * q / ((j + 1.0) * (gamma + j + 1.0)), 0.0)
        total = total + term
        active = term > 1e-17 * total
    return gamma * np.log(0.5 * z) - lgamma(gamma + 1.0) + np.log(total)


@lru_cache(maxsize=512)
def _laguerre_rule(alpha: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_genlaguerre(nodes, alpha)
    return x, w


def integral_log_iv(gamma: float, z, nodes: int = INTEGRAL_NODES) -> np.ndarray:
    """Log of ``I_gamma(z)`` from the Poisson integral.

    Substituting ``tau = 1 - v/z`` gives a Laguerre-weighted integral of
    ``(2 - v/z)^(gamma - 1/2)`` on ``[0, 2z]``; the cut at ``2z`` costs a
    relative error of order ``exp(-2z)``, so use this for ``z >= 20`` only.
    """
    g = float(gamma)
    z = np.asarray(z, float)
    x, w = _laguerre_rule(g - 0.5, nodes)
    zz = z[..., None]
    base = 2.0 - x / zz
    inside = base > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(inside, np.where(inside, base, 1.0) ** (g - 0.5), 0.0)
    quad = integrand @ w
    return (g * np.log(0.5 * z) + z - 0.5 * np.log(np.pi) - lgamma(g + 0.5)
            - (g + 0.5) * np.log(z) + np.log(quad))


def uniform_log_iv(gamma, z) -> np.ndarray:
    """Log of ``I_gamma(z)`` from the Debye uniform expansion in ``1/gamma``.

    Requires ``gamma > 0`` and ``z > 0``; accurate to ~1e-12 once
    ``gamma >= 10``, or once ``z >= 20`` for ``gamma`` of order one.
    """
    gamma, z = np.broadcast_arrays(np.asarray(gamma, float), np.asarray(z, float))
    x = z / gamma
    sq = np.sqrt(1.0 + x * x)
    p = 1.0 / sq
    eta = sq + np.log(x / (1.0 + sq))
    acc = np.zeros_like(x)
    inv = 1.0 / gamma
    for k in range(DEBYE_TERMS, -1, -1):
        acc = acc * inv + np.polynomial.polynomial.polyval(p, _DEBYE[k])
    return gamma * eta - 0.5 * np.log(2.0 * np.pi * gamma) - 0.5 * np.log(sq) + np.log(acc)


def select_method(gamma, z) -> np.ndarray:
    """Return the method tag used for each ``(gamma, z)`` pair."""
    gamma, z = np.broadcast_arrays(np.asarray(gamma, float), np.asarray(z, float))
    out = np.full(z.shape, METHOD_SERIES, dtype=object)
    large = z > SERIES_Z_MAX
    out[large & (gamma >= UNIFORM_MIN_ORDER)] = METHOD_UNIFORM
    out[large & (gamma < UNIFORM_MIN_ORDER)] = METHOD_INTEGRAL
    return out


def log_iv(gamma, z) -> np.ndarray:
    """Vectorized ``log I_gamma(z)`` for ``gamma >= 0`` and ``z >= 0``.

    Parameters
    ----------
    gamma, z : array_like
        Order and argument; broadcast against each other.

    Returns
    -------
    ndarray
        Natural log of the Bessel value. ``I_0(0) = 1`` gives 0 and
        ``I_gamma(0) = 0`` for ``gamma > 0`` gives ``-inf``.
    """
    gamma = check_finite_nonneg("gamma", gamma)
    z = check_finite_nonneg("z", z)
    g, zz = np.broadcast_arrays(gamma, z)
    out = np.empty(g.shape, dtype=float)
    flat_g = g.reshape(-1)
    flat_z = zz.reshape(-1)
    res = out.reshape(-1)

    zero = flat_z == 0
    res[zero] = np.where(flat_g[zero] == 0, 0.0, -np.inf)

    ser = (~zero) & (flat_z <= SERIES_Z_MAX)
    if ser.any():
        res[ser] = series_log_iv(flat_g[ser], flat_z[ser])

    uni = (flat_z > SERIES_Z_MAX) & (flat_g >= UNIFORM_MIN_ORDER)
    if uni.any():
        res[uni] = uniform_log_iv(flat_g[uni], flat_z[uni])

    itg = (flat_z > SERIES_Z_MAX) & (flat_g < UNIFORM_MIN_ORDER)
    if itg.any():
        idx = np.flatnonzero(itg)
        orders = flat_g[idx]
        for order in np.unique(orders):
            sel = idx[orders == order]
            res[sel] = integral_log_iv(float(order), flat_z[sel])
    return out


def bessel_i(gamma: float, z: float) -> BesselEval:
    """Evaluate ``I_gamma(z)`` with method bookkeeping.

    Parameters
    ----------
    gamma : float
        Order, ``gamma >= 0``.
    z : float
        Argument, ``z >= 0``.

    Returns
    -------
    BesselEval

    Raises
    ------
    ValueError
        For negative or non-finite inputs.

    Examples
    --------
    >>> round(bessel_i(0.5, 1.0).value, 5)
    0.93767
    """
    check_finite_nonneg("gamma", gamma)
    check_finite_nonneg("z", z)
    lv = float(log_iv(gamma, z))
    with np.errstate(over="ignore"):
        val = float(np.exp(lv))
    return BesselEval(float(gamma), float(z), val, lv, str(select_method(gamma, z)))


def iv(gamma, z) -> np.ndarray:
    """Vectorized ``I_gamma(z)`` (``exp`` of :func:`log_iv`)."""
    with np.errstate(over="ignore"):
        return np.exp(log_iv(gamma, z))


def bessel_i_derivative(gamma: float, z: float) -> float:
    """Derivative ``I_gamma'(z) = I_{gamma+1}(z) + (gamma/z) I_gamma(z)``.

    At ``z = 0`` the limit is returned for ``gamma >= 1`` (1/2 at
    ``gamma = 1``, zero above) and ``ValueError`` is raised for
    ``gamma < 1`` other than ``gamma = 0``, where the derivative is unbounded.
    """
    check_finite_nonneg("gamma", gamma)
    check_finite_nonneg("z", z)
    if z == 0:
        if gamma == 0 or gamma > 1:
            return 0.0
        if gamma == 1:
            return 0.5
        raise ValueError("derivative is unbounded at z = 0 for 0 < gamma < 1")
    lv = log_iv(np.array([gamma + 1.0, gamma]), z)
    return float(np.exp(lv[0]) + (gamma / z) * np.exp(lv[1]))


def small_z_ratio(gamma, z):
    """Ratio ``I_gamma(z) / ((z/2)^gamma / Gamma(gamma+1))``.

    Tends to 1 as ``z -> 0``; the next term is ``z^2 / (4 (gamma + 1))``.
    """
    z_arr = check_finite_nonneg("z", z, strict=True)
    g_arr = check_finite_nonneg("gamma", gamma)
    out = np.exp(log_iv(g_arr, z_arr) - g_arr * np.log(0.5 * z_arr) + lgamma(g_arr + 1.0))
    return float(out) if np.ndim(out) == 0 else out


def log_envelope(gamma, z) -> np.ndarray:
    """Log of the envelope ``z^gamma e^z / Gamma(gamma)``."""
    g = check_finite_nonneg("gamma", gamma, strict=True)
    zz = check_finite_nonneg("z", z)
    with np.errstate(divide="ignore"):
        return g * np.log(zz) + zz - lgamma(g)


def envelope_ratio(gamma, z) -> np.ndarray:
    """``I_gamma(z)`` divided by ``z^gamma e^z / Gamma(gamma)``.

    At ``z = 0`` both vanish and the limit ``2^-gamma / gamma`` is used.
    Values above 1 are envelope violations; they occur for small ``z``
    whenever ``gamma 2^gamma < 1``.
    """
    g, zz = np.broadcast_arrays(check_finite_nonneg("gamma", gamma, strict=True),
                                check_finite_nonneg("z", z))
    out = np.empty(g.shape)
    at0 = zz == 0
    out[at0] = 2.0 ** (-g[at0]) / g[at0]
    pos = ~at0
    out[pos] = np.exp(log_iv(g[pos], zz[pos]) - log_envelope(g[pos], zz[pos]))
    return out


def log_iv_upper(gamma, z) -> np.ndarray:
    """Log of the bound ``I_gamma(z) <= (z/2)^gamma e^z / Gamma(gamma+1)``.

    Valid for every ``gamma >= 0`` and ``z >= 0``: termwise,
    ``Gamma(gamma + j + 1) >= Gamma(gamma + 1) j!`` so the series is dominated
    by ``(z/2)^gamma I_0(z) / Gamma(gamma + 1)`` and ``I_0(z) <= e^z``.
    """
    g = check_finite_nonneg("gamma", gamma)
    zz = check_finite_nonneg("z", z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = g * np.log(0.5 * zz) + zz - lgamma(g + 1.0)
    return np.where((zz == 0) & (g == 0), 0.0, out)
