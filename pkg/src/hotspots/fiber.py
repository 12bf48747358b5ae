"""Closed-form spectra of model fibers: round spheres, circles, flat tori.

Points on a fiber are stored as rows of a 2-D float array:

* sphere of dimension ``d``: unit vectors in ``R^(d+1)`` (the radius only
  enters the metric);
* circle: the angle ``theta`` in radians (shape ``(N, 1)``);
* torus: coordinates ``x_i`` in ``[0, a_i)``.

Eigen-indices ``k`` are 1-based, so ``k = 1`` is the constant mode.
Within an eigenvalue level, modes are ordered by their lexicographic mode
label, which makes the indexing deterministic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np
from scipy.special import eval_gegenbauer, sph_harm_y, comb

from ._gamma import lgamma
from ._validation import check_int, check_positive_scalar

LEVEL_RTOL = 1e-12


@dataclass(frozen=True)
class SampleGrid:
    """Dense point cloud on a fiber with nearest-neighbour adjacency.

    Attributes
    ----------
    points : ndarray, shape (N, ambient)
    neighbors : tuple of ndarray
        ``neighbors[i]`` lists indices adjacent to point ``i``.
    """

    points: np.ndarray
    neighbors: tuple


def _group_levels(values: np.ndarray) -> list[tuple[int, int]]:
    groups = []
    start = 0
    for i in range(1, values.size + 1):
        if i == values.size or values[i] - values[start] > LEVEL_RTOL * max(1.0, values[start]):
            groups.append((start, i))
            start = i
    return groups


@dataclass(frozen=True, eq=False)
class FiberSpectrum:
    """Eigenvalues and orthonormal eigenfunctions of a closed model fiber.

    Use :func:`sphere_spectrum`, :func:`circle_spectrum` or
    :func:`torus_spectrum` rather than the constructor.

    Attributes
    ----------
    kind : {"sphere", "circle", "torus"}
    dim : int
        Dimension of the fiber.
    params : dict
        ``{"rho": ...}`` or ``{"side_lengths": (...)}``.
    eigenvalues : ndarray
        ``nu_1 <= nu_2 <= ...`` listed with multiplicity.
    modes : tuple
        Per-index mode label used for evaluation.
    multiplicities : ndarray
        Exact multiplicity of the level containing each index.
    volume : float
    """

    kind: str
    dim: int
    params: dict
    eigenvalues: np.ndarray
    modes: tuple
    multiplicities: np.ndarray
    volume: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1 if self.kind == "sphere" else self.dim

    @property
    def homogeneous(self) -> bool:
        """Whether ``sum_{k in level} v_k(x)^2 = mult / Vol`` for every x."""
        return True

    def describe(self) -> dict:
        """JSON-ready description accepted by :func:`fiber_from_dict`."""
        out = {"kind": self.kind, "dim": self.dim, "count": self.count}
        out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()})
        return out

    # -- indexing -------------------------------------------------------
    def _check_index(self, k: int) -> int:
        k = check_int("k", k, minimum=1)
        if k > self.count:
            raise IndexError(f"index {k} outside computed range 1..{self.count}")
        return k

    def nu(self, k: int) -> float:
        return float(self.eigenvalues[self._check_index(k) - 1])

    @cached_property
    def level_slices(self) -> list[tuple[int, int]]:
        """Half-open 0-based index ranges of equal eigenvalues."""
        return _group_levels(self.eigenvalues)

    def level_of(self, k: int) -> list[int]:
        """1-based indices sharing the eigenvalue of index ``k``."""
        k = self._check_index(k)
        for a, b in self.level_slices:
            if a < k <= b:
                return list(range(a + 1, b + 1))
        raise AssertionError("unreachable")

    def multiplicity(self, k: int) -> int:
        return int(self.multiplicities[self._check_index(k) - 1])

    def iter_levels(self) -> Iterator[tuple[float, int]]:
        """Yield ``(nu, multiplicity)`` for every level, without end."""
        if self.kind == "sphere":
            yield from _sphere_levels(self.dim, self.params["rho"])
        elif self.kind == "circle":
            yield from _circle_levels(self.params["rho"])
        else:
            yield from _torus_levels(self.params["side_lengths"])

    # -- evaluation -----------------------------------------------------
    def as_points(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.ambient_dim:
            raise ValueError(f"points must have {self.ambient_dim} coordinates")
        return pts

    def eigenfunctions(self, ks, x) -> np.ndarray:
        """Values ``v_k(x_j)`` as an array of shape ``(len(ks), N)``."""
        ks = [self._check_index(k) for k in np.atleast_1d(ks)]
        pts = self.as_points(x)
        labels = [self.modes[k - 1] for k in ks]
        if self.kind == "sphere":
            return _sphere_eval(self.dim, self.params["rho"], labels, pts, self.volume)
        if self.kind == "circle":
            return _circle_eval(self.params["rho"], labels, pts)
        return _torus_eval(self.params["side_lengths"], labels, pts, self.volume)

    def eigenfunction(self, k: int, x) -> np.ndarray:
        """Values of ``v_k`` at the given points (1-D array)."""
        return self.eigenfunctions([k], x)[0]

    def evaluable(self, k: int) -> bool:
        """False for non-zonal modes of spheres of dimension > 2."""
        label = self.modes[self._check_index(k) - 1]
        return not (self.kind == "sphere" and self.dim > 2 and label[1] != 0)

    # -- geometry -------------------------------------------------------
    def distance(self, x, y) -> np.ndarray:
        """Intrinsic distance between matching rows of ``x`` and ``y``."""
        a = self.as_points(x)
        b = self.as_points(y)
        if self.kind == "sphere":
            c = np.clip(np.sum(a * b, axis=1), -1.0, 1.0)
            return self.params["rho"] * np.arccos(c)
        if self.kind == "circle":
            d = np.abs(np.mod(a[:, 0] - b[:, 0] + np.pi, 2 * np.pi) - np.pi)
            return self.params["rho"] * d
        sides = np.asarray(self.params["side_lengths"])
        diff = np.mod(a - b + sides / 2, sides) - sides / 2
        return np.sqrt(np.sum(diff**2, axis=1))

    def tangent_basis(self, x0) -> np.ndarray:
        """Orthonormal tangent vectors at a sphere point (rows)."""
        p = self.as_points(x0)[0]
        m = np.eye(p.size)[np.argsort(np.abs(p))[: p.size - 1]]
        basis = []
        for v in m:
            v = v - p * np.dot(v, p)
            for b in basis:
                v = v - b * np.dot(v, b)
            basis.append(v / np.linalg.norm(v))
        return np.array(basis)

    def local_chart(self, x0, offsets) -> np.ndarray:
        """Map tangent offsets (in metric units) at ``x0`` to fiber points.

        On spheres this is the exponential map, elsewhere a translation.
        """
        off = np.atleast_2d(np.asarray(offsets, dtype=float))
        if off.shape[1] != self.dim:
            raise ValueError(f"offsets need {self.dim} components")
        p = self.as_points(x0)[0]
        if self.kind == "sphere":
            rho = self.params["rho"]
            tang = (off @ self.tangent_basis(p)) / rho
            ang = np.linalg.norm(tang, axis=1)
            safe = np.where(ang > 0, ang, 1.0)
            unit = tang / safe[:, None]
            out = np.cos(ang)[:, None] * p + np.sin(ang)[:, None] * unit
            return out / np.linalg.norm(out, axis=1, keepdims=True)
        if self.kind == "circle":
            return np.mod(p + off / self.params["rho"], 2 * np.pi)
        sides = np.asarray(self.params["side_lengths"])
        return np.mod(p + off, sides)

    def coordinates(self, x) -> np.ndarray:
        """Human-readable chart coordinates for CSV output."""
        pts = self.as_points(x)
        if self.kind == "sphere" and self.dim == 2:
            theta = np.arccos(np.clip(pts[:, 2], -1, 1))
            phi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
            return np.column_stack([theta, phi])
        return pts.copy()

    @property
    def coordinate_names(self) -> list[str]:
        if self.kind == "sphere" and self.dim == 2:
            return ["theta", "phi"]
        if self.kind == "circle":
            return ["theta"]
        return [f"x{i}" for i in range(self.ambient_dim)]

    # -- grids ----------------------------------------------------------
    def quadrature_grid(self, resolution: tuple[int, ...] | int | None = None):
        """Quadrature points and weights integrating products of modes.

        For spheres of dimension 2 this is Gauss-Legendre in ``cos(theta)``
        times a uniform longitude rule (default 64 x 128). For higher
        spheres the rule integrates zonal functions only.
        """
        if self.kind == "sphere":
            return _sphere_quadrature(self.dim, self.params["rho"], resolution)
        if self.kind == "circle":
            n = int(resolution or 256)
            th = 2 * np.pi * np.arange(n) / n
            return th[:, None], np.full(n, 2 * np.pi * self.params["rho"] / n)
        sides = np.asarray(self.params["side_lengths"], float)
        n = int(resolution or max(16, int(round(4096 ** (1 / sides.size)))))
        axes = [a * np.arange(n) / n for a in sides]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([m.reshape(-1) for m in mesh])
        return pts, np.full(pts.shape[0], np.prod(sides) / n**sides.size)

    def sample_grid(self, resolution: int | None = None) -> SampleGrid:
        """Dense grid with adjacency, used for sup norms and argmax search."""
        key = ("sample", resolution)
        if key not in self._cache:
            self._cache[key] = _sample_grid(self, resolution)
        return self._cache[key]

    # -- sup norms ------------------------------------------------------
    def sup_norm_bound(self, nu_level_mult: int) -> float:
        """Addition-theorem bound ``sqrt(mult / Vol)`` on any mode of a level."""
        return math.sqrt(nu_level_mult / self.volume)


# -- constructors ---------------------------------------------------------

def _sphere_levels(dim: int, rho: float) -> Iterator[tuple[float, int]]:
    for ell in itertools.count():
        mult = int(comb(ell + dim, dim, exact=True) - comb(ell + dim - 2, dim, exact=True))
        yield ell * (ell + dim - 1) / rho**2, mult


def _circle_levels(rho: float) -> Iterator[tuple[float, int]]:
    yield 0.0, 1
    for m in itertools.count(1):
        yield m * m / rho**2, 2


def _torus_lattice(sides: tuple, bound: float) -> list[tuple[float, tuple[int, ...]]]:
    ranges = [range(-int(a * math.sqrt(bound) / (2 * math.pi)) - 1,
                    int(a * math.sqrt(bound) / (2 * math.pi)) + 2) for a in sides]
    pts = []
    for m in itertools.product(*ranges):
        nu = 4 * math.pi**2 * sum((mi / a) ** 2 for mi, a in zip(m, sides))
        if nu <= bound:
            pts.append((nu, m))
    return pts


def _torus_levels(sides: tuple) -> Iterator[tuple[float, int]]:
    done = -1.0
    bound = 4 * math.pi**2 / max(sides) ** 2 * 4
    while True:
        pts = sorted(nu for nu, _ in _torus_lattice(sides, bound) if nu > done)
        vals = np.array(pts)
        for a, b in _group_levels(vals):
            # only levels safely below the enumeration bound are complete
            if vals[a] <= bound * (1 - 1e-9):
                yield float(vals[a]), b - a
                done = vals[b - 1]
        bound *= 2


def sphere_spectrum(dim: int, rho: float, count: int) -> FiberSpectrum:
    """Spectrum of the round sphere ``S^dim`` of radius ``rho``.

    Parameters
    ----------
    dim : int
        Sphere dimension, at least 2.
    rho : float
        Radius.
    count : int
        Number of eigenvalues (with multiplicity), at least 2.

    Returns
    -------
    FiberSpectrum
        Eigenvalues ``l(l+dim-1)/rho^2``. For ``dim == 2`` every mode is a
        real spherical harmonic; for higher ``dim`` only zonal modes can be
        evaluated, though multiplicities are exact.

    Examples
    --------
    >>> sphere_spectrum(2, 1.0, 5).eigenvalues.tolist()
    [0.0, 2.0, 2.0, 2.0, 6.0]
    """
    dim = check_int("dim", dim, minimum=2)
    rho = check_positive_scalar("rho", rho)
    count = check_int("count", count, minimum=2)
    vals, modes, mults = [], [], []
    for ell, (nu, mult) in enumerate(_sphere_levels(dim, rho)):
        if dim == 2:
            labels = [(ell, 0, 0)] + [(ell, m, t) for m in range(1, ell + 1) for t in (0, 1)]
        else:
            labels = [(ell, 0, 0)] + [(ell, -1, j) for j in range(1, mult)]
        for lab in labels:
            vals.append(nu)
            modes.append(lab)
            mults.append(mult)
        if len(vals) >= count:
            break
    volume = 2 * math.pi ** ((dim + 1) / 2) / math.exp(lgamma((dim + 1) / 2)) * rho**dim
    return FiberSpectrum("sphere", dim, {"rho": rho}, np.array(vals[:count]), tuple(modes[:count]),
                         np.array(mults[:count]), volume)


def circle_spectrum(rho: float, count: int) -> FiberSpectrum:
    """Spectrum of the circle of radius ``rho``: ``m^2/rho^2`` with cos/sin modes.

    Examples
    --------
    >>> circle_spectrum(1.0, 3).eigenvalues.tolist()
    [0.0, 1.0, 1.0]
    """
    rho = check_positive_scalar("rho", rho)
    count = check_int("count", count, minimum=2)
    vals, modes, mults = [0.0], [(0, 0)], [1]
    m = 1
    while len(vals) < count:
        for t in (0, 1):
            vals.append(m * m / rho**2)
            modes.append((m, t))
            mults.append(2)
        m += 1
    return FiberSpectrum("circle", 1, {"rho": rho}, np.array(vals[:count]), tuple(modes[:count]),
                         np.array(mults[:count]), 2 * math.pi * rho)


def torus_spectrum(side_lengths, count: int) -> FiberSpectrum:
    """Spectrum of the flat torus ``prod_i R / (a_i Z)``.

    Eigenvalues are ``4 pi^2 sum (m_i / a_i)^2``; each pair ``{m, -m}`` gives
    a cosine and a sine mode.

    Examples
    --------
    >>> torus_spectrum([2.0, 1.0], 2).eigenvalues[1] / math.pi**2
    1.0
    """
    sides = tuple(float(a) for a in side_lengths)
    if not sides:
        raise ValueError("side_lengths must not be empty")
    for a in sides:
        check_positive_scalar("side length", a)
    count = check_int("count", count, minimum=2)
    bound = 4 * math.pi**2 / max(sides) ** 2
    while True:
        pts = _torus_lattice(sides, bound)
        if len(pts) >= count + 1:
            break
        bound *= 2
    reps = sorted((nu, m) for nu, m in pts if m == tuple(0 for _ in m) or _first_positive(m))
    reps.sort(key=lambda p: p[0])
    nus = np.array([p[0] for p in reps])
    vals, modes, mults = [], [], []
    for a, b in _group_levels(nus):
        if nus[a] > bound * (1 - 1e-9) and len(vals) >= count:
            break
        members = sorted(reps[a:b], key=lambda p: p[1])
        mult = sum(1 if all(x == 0 for x in m) else 2 for _, m in members)
        for _, m in members:
            trig = (0,) if all(x == 0 for x in m) else (0, 1)
            for t in trig:
                vals.append(float(nus[a]))
                modes.append((m, t))
                mults.append(mult)
        if len(vals) >= count:
            break
    return FiberSpectrum("torus", len(sides), {"side_lengths": sides}, np.array(vals[:count]),
                         tuple(modes[:count]), np.array(mults[:count]), float(np.prod(sides)))


def _first_positive(m: tuple[int, ...]) -> bool:
    for x in m:
        if x != 0:
            return x > 0
    return False


def fiber_from_dict(desc: dict) -> FiberSpectrum:
    """Build a spectrum from ``{kind, dim, rho | side_lengths, count}``."""
    kind = desc.get("kind")
    count = desc.get("count", 64)
    if kind == "sphere":
        return sphere_spectrum(desc.get("dim", 2), desc.get("rho", 1.0), count)
    if kind == "circle":
        return circle_spectrum(desc.get("rho", 1.0), count)
    if kind == "torus":
        return torus_spectrum(desc.get("side_lengths", [1.0]), count)
    raise ValueError(f"unknown fiber kind {kind!r}")


# -- evaluators -----------------------------------------------------------

def _sphere_eval(dim, rho, labels, pts, volume) -> np.ndarray:
    ell = np.array([lab[0] for lab in labels])
    m = np.array([lab[1] for lab in labels])
    trig = np.array([lab[2] for lab in labels])
    if dim > 2:
        if np.any(m != 0):
            raise NotImplementedError("only zonal harmonics are available for spheres of dimension > 2")
        lam = (dim - 1) / 2.0
        c = np.clip(pts[:, -1], -1.0, 1.0)
        out = np.empty((ell.size, c.size))
        for i, l in enumerate(ell):
            # squared norm of C_l^lam on S^dim from the Gegenbauer weight integral
            lnorm = (math.log(math.pi) + (1 - 2 * lam) * math.log(2.0) + lgamma(l + 2 * lam)
                     - lgamma(l + 1.0) - math.log(l + lam) - 2 * lgamma(lam))
            lsurf = math.log(2.0) + (dim / 2) * math.log(math.pi) - lgamma(dim / 2)
            scale = math.exp(-0.5 * (lnorm + lsurf)) / rho ** (dim / 2)
            out[i] = scale * eval_gegenbauer(int(l), lam, c)
        return out
    theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    y = sph_harm_y(ell[:, None], m[:, None], theta[None, :], phi[None, :])
    sign = np.where(m % 2 == 1, -1.0, 1.0)[:, None]
    real = np.where(m[:, None] == 0, y.real,
                    np.where(trig[:, None] == 0, math.sqrt(2) * sign * y.real, math.sqrt(2) * sign * y.imag))
    return real / rho


def _circle_eval(rho, labels, pts) -> np.ndarray:
    th = pts[:, 0]
    out = np.empty((len(labels), th.size))
    for i, (m, t) in enumerate(labels):
        if m == 0:
            out[i] = 1.0 / math.sqrt(2 * math.pi * rho)
        else:
            f = np.cos if t == 0 else np.sin
            out[i] = f(m * th) / math.sqrt(math.pi * rho)
    return out


def _torus_eval(sides, labels, pts, volume) -> np.ndarray:
    a = np.asarray(sides)
    out = np.empty((len(labels), pts.shape[0]))
    for i, (m, t) in enumerate(labels):
        if all(x == 0 for x in m):
            out[i] = 1.0 / math.sqrt(volume)
            continue
        phase = 2 * np.pi * (pts / a) @ np.asarray(m, float)
        f = np.cos if t == 0 else np.sin
        out[i] = math.sqrt(2.0 / volume) * f(phase)
    return out


def _sphere_quadrature(dim, rho, resolution):
    if dim == 2:
        nt, npf = (64, 128) if resolution is None else tuple(resolution)
        x, w = np.polynomial.legendre.leggauss(nt)
        theta = np.arccos(x)
        phi = 2 * np.pi * np.arange(npf) / npf
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        pts = np.column_stack([(np.sin(tt) * np.cos(pp)).ravel(), (np.sin(tt) * np.sin(pp)).ravel(),
                               np.cos(tt).ravel()])
        wts = (w[:, None] * np.full(npf, 2 * np.pi / npf)[None, :]).ravel() * rho**2
        return pts, wts
    nt = 128 if resolution is None else int(np.atleast_1d(resolution)[0])
    # Gauss-Jacobi in cos(theta) with weight (1-x^2)^((dim-2)/2)
    from scipy.special import roots_jacobi

    a = (dim - 2) / 2.0
    x, w = roots_jacobi(nt, a, a)
    s = np.sqrt(1 - x**2)
    pts = np.zeros((nt, dim + 1))
    pts[:, 0] = s
    pts[:, -1] = x
    surf = 2 * math.pi ** (dim / 2) / math.exp(lgamma(dim / 2))
    return pts, w * surf * rho**dim


def _sample_grid(spec: FiberSpectrum, resolution) -> SampleGrid:
    if spec.kind == "sphere" and spec.dim == 2:
        nt, npf = (64, 128) if resolution is None else tuple(np.broadcast_to(resolution, 2))
        theta = np.pi * np.arange(1, nt) / nt
        phi = 2 * np.pi * np.arange(npf) / npf
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        ring = np.column_stack([(np.sin(tt) * np.cos(pp)).ravel(), (np.sin(tt) * np.sin(pp)).ravel(),
                                np.cos(tt).ravel()])
        pts = np.vstack([[0.0, 0.0, 1.0], ring, [0.0, 0.0, -1.0]])
        south = pts.shape[0] - 1
        nbrs = [np.arange(1, npf + 1)]
        for i in range(nt - 1):
            for j in range(npf):
                idx = 1 + i * npf + j
                nb = [1 + i * npf + (j - 1) % npf, 1 + i * npf + (j + 1) % npf]
                nb.append(0 if i == 0 else idx - npf)
                nb.append(south if i == nt - 2 else idx + npf)
                nbrs.append(np.array(nb))
        nbrs.append(np.arange(south - npf, south))
        return SampleGrid(pts, tuple(nbrs))
    if spec.kind == "sphere":
        nt = 256 if resolution is None else int(np.atleast_1d(resolution)[0])
        theta = np.pi * np.arange(nt + 1) / nt
        pts = np.zeros((nt + 1, spec.dim + 1))
        pts[:, 0] = np.sin(theta)
        pts[:, -1] = np.cos(theta)
        nbrs = [np.array([j for j in (i - 1, i + 1) if 0 <= j <= nt]) for i in range(nt + 1)]
        return SampleGrid(pts, tuple(nbrs))
    if spec.kind == "circle":
        n = 512 if resolution is None else int(np.atleast_1d(resolution)[0])
        th = 2 * np.pi * np.arange(n) / n
        nbrs = [np.array([(i - 1) % n, (i + 1) % n]) for i in range(n)]
        return SampleGrid(th[:, None], tuple(nbrs))
    sides = np.asarray(spec.params["side_lengths"], float)
    d = sides.size
    n = int(resolution or max(16, int(round(16384 ** (1 / d)))))
    axes = [a * np.arange(n) / n for a in sides]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.reshape(-1) for m in mesh])
    shape = (n,) * d
    nbrs = []
    for flat in range(pts.shape[0]):
        idx = np.unravel_index(flat, shape)
        nb = []
        for ax in range(d):
            for step in (-1, 1):
                j = list(idx)
                j[ax] = (j[ax] + step) % n
                nb.append(np.ravel_multi_index(tuple(j), shape))
        nbrs.append(np.array(sorted(set(nb))))
    return SampleGrid(pts, tuple(nbrs))


# -- derived quantities -----------------------------------------------------

def gamma_of(spec: FiberSpectrum, n: int, k: int) -> float:
    """Radial order ``gamma_k = sqrt((n-2)^2/4 + nu_k)`` of fiber mode ``k``.

    Examples
    --------
    >>> gamma_of(sphere_spectrum(2, 1.0, 4), 3, 2)
    1.5
    """
    n = check_int("n", n)
    if n != spec.dim + 1:
        raise ValueError(f"n must equal fiber dim + 1 = {spec.dim + 1}")
    return math.sqrt(0.25 * (n - 2) ** 2 + spec.nu(k))


def gammas(spec: FiberSpectrum, n: int) -> np.ndarray:
    """All computed ``gamma_k`` as an array (index ``k-1``)."""
    if n != spec.dim + 1:
        raise ValueError(f"n must equal fiber dim + 1 = {spec.dim + 1}")
    return np.sqrt(0.25 * (n - 2) ** 2 + spec.eigenvalues)


def sup_norm_estimate(spec: FiberSpectrum, k: int, resolution=None) -> float:
    """Measured ``max |v_k|`` over the fiber's dense sample grid.

    Modes that cannot be evaluated (non-zonal modes on spheres of dimension
    above 2) fall back to the addition-theorem bound ``sqrt(mult/Vol)``.
    """
    k = spec._check_index(k)
    key = ("sup", k, resolution)
    if key not in spec._cache:
        if spec.evaluable(k):
            grid = spec.sample_grid(resolution)
            spec._cache[key] = float(np.max(np.abs(spec.eigenfunction(k, grid.points))))
        else:
            spec._cache[key] = spec.sup_norm_bound(spec.multiplicity(k))
    return spec._cache[key]


def sup_norms(spec: FiberSpectrum, resolution=None, chunk: int = 128) -> np.ndarray:
    """Measured sup norms for every computed index."""
    key = ("sups", resolution)
    if key in spec._cache:
        return spec._cache[key]
    grid = spec.sample_grid(resolution)
    out = np.empty(spec.count)
    ks = np.arange(1, spec.count + 1)
    ev = np.array([spec.evaluable(int(k)) for k in ks])
    for start in range(0, spec.count, chunk):
        block = ks[start:start + chunk]
        sel = block[ev[block - 1]]
        if sel.size:
            vals = spec.eigenfunctions(sel, grid.points)
            out[sel - 1] = np.max(np.abs(vals), axis=1)
    for k in ks[~ev]:
        out[k - 1] = spec.sup_norm_bound(spec.multiplicity(int(k)))
    spec._cache[key] = out
    return out


def calibrate_weyl_constant(spec: FiberSpectrum) -> float:
    """Smallest ``C`` with ``k^(2/d)/C <= nu_k <= C k^(2/d)`` for ``k >= 2``."""
    k = np.arange(2, spec.count + 1)
    ratio = spec.eigenvalues[1:] / k ** (2.0 / spec.dim)
    return float(max(ratio.max(), (1.0 / ratio).max()))


def calibrate_sup_norm_constant(spec: FiberSpectrum, resolution=None) -> float:
    """Smallest ``C`` with ``|v_k|_inf <= C nu_k^((d-1)/4)`` for ``k >= 2``."""
    sups = sup_norms(spec, resolution)
    return float(np.max(sups[1:] / spec.eigenvalues[1:] ** ((spec.dim - 1) / 4.0)))


def maximize_on_fiber(spec: FiberSpectrum, fun, resolution=None, refine: bool = True):
    """Maximize a vectorized fiber function by grid search plus local polish.

    Parameters
    ----------
    spec : FiberSpectrum
    fun : callable
        Maps an ``(N, ambient)`` array of points to ``N`` values.
    resolution : optional
        Sample-grid resolution.
    refine : bool
        Polish the best grid point with Nelder-Mead in a local chart.

    Returns
    -------
    point : ndarray, shape (ambient,)
    value : float
    """
    from scipy.optimize import minimize

    grid = spec.sample_grid(resolution)
    vals = fun(grid.points)
    i = int(np.argmax(vals))
    x0, best = grid.points[i], float(vals[i])
    if not refine:
        return x0, best
    res = minimize(lambda o: -float(fun(spec.local_chart(x0, o[None, :]))[0]), np.zeros(spec.dim),
                   method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-15, "initial_simplex":
                                                  _simplex(spec.dim, 0.05 * _grid_step(spec))})
    if -res.fun > best:
        return spec.local_chart(x0, res.x[None, :])[0], float(-res.fun)
    return x0, best


def _grid_step(spec: FiberSpectrum) -> float:
    if spec.kind == "sphere":
        return spec.params["rho"] * np.pi / 64
    if spec.kind == "circle":
        return spec.params["rho"] * 2 * np.pi / 512
    return min(spec.params["side_lengths"]) / 64


def _simplex(d: int, h: float) -> np.ndarray:
    return np.vstack([np.zeros(d), h * np.eye(d)])
