"""Experiment configuration: a JSON document listing scenarios.

Every knob has a default, and ``ExperimentConfig.from_dict(c.to_dict())``
reproduces ``c`` exactly. Validation errors carry the field path
(``scenarios[2].fiber.rho``) and, for syntax errors, the line number.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

KINDS = ("compact-modes", "cone-field", "cone-track", "bessel-table")
COMPACT_MODES = ("second-neumann", "mixed", "degenerate")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _default_fiber() -> dict:
    return {"kind": "sphere", "dim": 2, "rho": 1.0, "count": 64}


def _default_phi() -> dict:
    return {"terms": [{"k": 1, "kind": "indicator", "lo": 1.0, "hi": 2.0, "amplitude": 1.0}]}


def _default_schedule() -> dict:
    return {"start": 1.0, "stop": 1e5, "count": 21}


@dataclass
class Scenario:
    """One experiment. Fields irrelevant to ``kind`` are ignored."""

    name: str = ""
    kind: str = "cone-track"
    n: int = 3
    fiber: dict = field(default_factory=_default_fiber)
    seed: int = 0
    # compact warped products
    warping: dict = field(default_factory=lambda: {"family": "affine", "c": 1.0})
    L: float = 1.0
    interval_offset: float = 0.0
    grid: int = 2048
    mode: str = "second-neumann"
    rho_bracket: list = field(default_factory=lambda: [0.05, 2.0])
    r0: float | None = None
    r_points: int = 129
    csv_points: int = 257
    # cones
    phi: dict = field(default_factory=_default_phi)
    schedule: dict = field(default_factory=_default_schedule)
    field_times: list = field(default_factory=lambda: [1.0, 10.0, 100.0])
    field_r_count: int = 33
    field_fiber_resolution: list | None = field(default_factory=lambda: [4, 8])
    R: float = 8.0
    t_min: float | None = None
    tol: float = 1e-10
    rel_tol: float = 1e-9
    quad_rtol: float = 1e-10
    nodes_per_decade: int = 512
    r_lo_rel: float = 1e-7
    fiber_resolution: list | None = field(default_factory=lambda: [16, 32])
    fit_fraction: float = 0.6
    epsilon: float = 0.05
    expected_regime: int | None = None
    dist_time: float | None = 1e4
    # Bessel audit
    gammas: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0, 2.5, 10.0, 25.0])
    z_values: list = field(default_factory=lambda: [0.0, 0.1, 1.0, 5.0, 20.0, 60.0, 300.0, 700.0])

    def times(self) -> np.ndarray:
        s = self.schedule
        if "values" in s:
            return np.asarray(s["values"], float)
        return np.geomspace(float(s["start"]), float(s["stop"]), int(s["count"]))

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))


_TYPES = {"name": str, "kind": str, "n": int, "fiber": dict, "seed": int, "warping": dict, "L": float,
          "interval_offset": float, "grid": int, "mode": str, "rho_bracket": list, "r0": (float, type(None)),
          "r_points": int, "csv_points": int, "phi": dict, "schedule": dict, "field_times": list,
          "field_r_count": int, "field_fiber_resolution": (list, type(None)), "R": float,
          "t_min": (float, type(None)), "tol": float, "rel_tol": float, "quad_rtol": float,
          "nodes_per_decade": int, "r_lo_rel": float, "fiber_resolution": (list, type(None)),
          "fit_fraction": float, "epsilon": float, "expected_regime": (int, type(None)),
          "dist_time": (float, type(None)), "gammas": list, "z_values": list}


def _coerce(value, expected, path):
    options = expected if isinstance(expected, tuple) else (expected,)
    for typ in options:
        if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if typ is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if typ not in (float, int) and isinstance(value, typ):
            return value
    names = " or ".join("null" if t is type(None) else t.__name__ for t in options)
    raise ConfigError(f"expected {names}, got {type(value).__name__}", path)


def _scenario_from_dict(d: dict, path: str, index: int) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigError("scenario must be an object", path)
    unknown = sorted(set(d) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown field {unknown[0]!r}", f"{path}.{unknown[0]}")
    kw = {k: _coerce(v, _TYPES[k], f"{path}.{k}") for k, v in d.items()}
    sc = Scenario(**copy.deepcopy(kw))
    if not sc.name:
        sc.name = f"{sc.kind}-{index}"
    _validate_scenario(sc, path)
    return sc


def _validate_scenario(sc: Scenario, path: str) -> None:
    from .cone import ConeSetup, InitialCondition
    from .fiber import fiber_from_dict
    from .radial import Warping, WarpedProductConfig

    if sc.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}", f"{path}.kind")
    if not sc.name.replace("-", "").replace("_", "").isalnum():
        raise ConfigError("name may contain letters, digits, '-' and '_' only", f"{path}.name")
    for key in ("tol", "quad_rtol", "R", "epsilon", "r_lo_rel"):
        if not getattr(sc, key) > 0:
            raise ConfigError("must be positive", f"{path}.{key}")
    if not 0 <= sc.rel_tol < 1:
        raise ConfigError("must lie in [0, 1)", f"{path}.rel_tol")
    if not 0 < sc.fit_fraction <= 1:
        raise ConfigError("must lie in (0, 1]", f"{path}.fit_fraction")
    if sc.kind == "bessel-table":
        if any((not isinstance(g, (int, float))) or g < 0 for g in sc.gammas):
            raise ConfigError("orders must be nonnegative numbers", f"{path}.gammas")
        if any((not isinstance(z, (int, float))) or z < 0 for z in sc.z_values):
            raise ConfigError("arguments must be nonnegative numbers", f"{path}.z_values")
        return
    try:
        fib = fiber_from_dict(sc.fiber)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), f"{path}.fiber") from None
    if sc.kind == "compact-modes":
        if sc.mode not in COMPACT_MODES:
            raise ConfigError(f"mode must be one of {COMPACT_MODES}", f"{path}.mode")
        try:
            WarpedProductConfig(sc.n, sc.L, Warping.from_dict(sc.warping), sc.interval_offset, sc.grid)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), f"{path}.warping") from None
        if fib.dim != sc.n - 1:
            raise ConfigError("fiber dimension must be n - 1", f"{path}.fiber")
        return
    try:
        ConeSetup(sc.n, fib)
    except ValueError as exc:
        raise ConfigError(str(exc), f"{path}.n") from None
    try:
        InitialCondition.from_dict(sc.phi)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), f"{path}.phi") from None
    try:
        t = sc.times()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), f"{path}.schedule") from None
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ConfigError("schedule must be positive and strictly increasing", f"{path}.schedule")
    if any((not isinstance(v, (int, float))) or v <= 0 for v in sc.field_times):
        raise ConfigError("times must be positive", f"{path}.field_times")


@dataclass
class ExperimentConfig:
    """A list of scenarios plus run-wide settings."""

    scenarios: list = field(default_factory=list)
    output_dir: str = "out"
    threads: int = 1

    def to_dict(self) -> dict:
        return {"scenarios": [s.to_dict() for s in self.scenarios], "output_dir": self.output_dir,
                "threads": self.threads}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("top level must be an object")
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown field {unknown[0]!r}", unknown[0])
        raw = d.get("scenarios", [])
        if not isinstance(raw, list):
            raise ConfigError("expected a list", "scenarios")
        scen = [_scenario_from_dict(s, f"scenarios[{i}]", i) for i, s in enumerate(raw)]
        names = [s.name for s in scen]
        dup = sorted({x for x in names if names.count(x) > 1})
        if dup:
            raise ConfigError(f"duplicate scenario name {dup[0]!r}", "scenarios")
        out = _coerce(d.get("output_dir", "out"), str, "output_dir")
        threads = _coerce(d.get("threads", 1), int, "threads")
        if threads < 1:
            raise ConfigError("must be at least 1", "threads")
        return cls(scen, out, threads)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form (output location excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file.

    Raises
    ------
    ConfigError
        With the line and column for syntax errors, or the field path.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(data)


def regime_sweep(rhos=(0.5, 0.8, 1.0, 2.0), amplitudes=None, **knobs) -> list[Scenario]:
    """Cone-track scenarios over round-sphere fibers of radius ``rho`` (``n = 3``).

    ``nu_2 = 2 / rho^2`` puts the four default radii in regimes 1 to 4. The
    data are a radial bump plus a smaller bump times the first zonal mode.
    """
    amplitudes = amplitudes or {2.0: 0.25}
    out = []
    for rho in rhos:
        amp = amplitudes.get(rho, 0.5)
        phi = {"terms": [{"k": 1, "kind": "bump", "lo": 0.5, "hi": 2.0, "amplitude": 1.0},
                         {"k": 2, "kind": "bump", "lo": 0.5, "hi": 2.0, "amplitude": amp}]}
        nu2 = 2.0 / rho**2
        regime = 3 if nu2 == 2 else (1 if nu2 >= 6 else (2 if nu2 > 2 else 4))
        out.append(Scenario(name=f"regime-rho{rho:g}".replace(".", "p"), kind="cone-track",
                            fiber={"kind": "sphere", "dim": 2, "rho": float(rho), "count": 64}, phi=phi,
                            expected_regime=regime, **knobs))
    return out


def default_suite() -> ExperimentConfig:
    """Scenarios run by ``verify-all`` when no config is given."""
    sphere = {"kind": "sphere", "dim": 2, "rho": 1.0, "count": 64}
    scen = [
        Scenario(name="bessel-audit", kind="bessel-table"),
        Scenario(name="monotone-exp", kind="compact-modes", fiber=sphere, warping={"family": "exponential", "c": 1.0},
                 L=1.0),
        Scenario(name="mixed-affine", kind="compact-modes", fiber=sphere, warping={"family": "affine", "c": 1.0},
                 mode="mixed"),
        Scenario(name="trivial-product", kind="compact-modes",
                 fiber={"kind": "sphere", "dim": 2, "rho": 0.5, "count": 16},
                 warping={"family": "constant"}, L=1.0),
        Scenario(name="symmetric-sech", kind="compact-modes", fiber=sphere,
                 warping={"family": "sech", "c": 1.0, "scale": 20.0}, L=2.0, interval_offset=-1.0),
        Scenario(name="degenerate-pair", kind="compact-modes", fiber={"kind": "sphere", "dim": 2, "rho": 0.3,
                                                                      "count": 16},
                 warping={"family": "exponential", "c": 0.5}, mode="degenerate", rho_bracket=[0.1, 1.0], r0=0.5),
        Scenario(name="euclidean-field", kind="cone-field", fiber=sphere,
                 phi={"terms": [{"k": 1, "kind": "indicator", "lo": 1.0, "hi": 2.0, "amplitude": 1.0},
                                {"k": 2, "kind": "bump", "lo": 0.5, "hi": 2.0, "amplitude": 0.5}]}),
    ]
    scen.extend(regime_sweep())
    return ExperimentConfig(scen)
