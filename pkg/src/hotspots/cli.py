"""Command-line entry point: ``hotspots <subcommand> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 2 configuration error, 3 hypothesis violation,
4 failed verdict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bessel import envelope_ratio, log_iv, select_method
from .cone import (ConeHeatModel, ConeSetup, HypothesisViolation, InitialCondition, NoTransverseData,
                   calibrate_gaussian_constants, heat_kernel, kernel_truncation)
from .config import ConfigError, ExperimentConfig, Scenario, default_suite, load_config
from .fiber import calibrate_sup_norm_constant, calibrate_weyl_constant, fiber_from_dict
from .lab import HotspotTracker
from .radial import (Warping, WarpedProductConfig, check_radial_monotonicity, degenerate_pair_mode,
                     locate_hotspots_compact, mixed_first_mode, second_neumann_mode, tune_degenerate_radius)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_VERDICT = 4

SUBCOMMANDS = {"compact-modes": "compact-modes", "cone-field": "cone-field", "cone-track": "cone-track",
               "bessel-table": "bessel-table", "verify-all": None}

log = logging.getLogger("hotspots")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class ScenarioResult:
    def __init__(self, name: str, kind: str):
        self.name = name
        self.kind = kind
        self.status = "ok"
        self.files: list[str] = []
        self.record: dict = {}
        self.message = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "status": self.status, "message": self.message,
                "files": self.files, **self.record}


# -- scenario runners --------------------------------------------------------------

def run_bessel_table(sc: Scenario, out: Path, res: ScenarioResult) -> None:
    g, z = np.meshgrid(np.asarray(sc.gammas, float), np.asarray(sc.z_values, float), indexing="ij")
    g, z = g.ravel(), z.ravel()
    lv = log_iv(g, z)
    with np.errstate(over="ignore"):
        val = np.exp(lv)
    ratio = np.full(g.size, math.inf)
    pos = g > 0
    ratio[pos] = envelope_ratio(g[pos], z[pos])
    methods = select_method(g, z)
    rows = [[g[i], z[i], val[i], lv[i], ratio[i], str(methods[i])] for i in range(g.size)]
    _write_atomic(out / "table.csv", _csv_text(["gamma", "z", "value", "log_value", "envelope_ratio", "method"],
                                               rows))
    res.files.append("table.csv")
    viol = int(np.count_nonzero(ratio[pos] > 1.0))
    res.record["audit"] = {"points": int(g.size), "envelope_violations": viol,
                           "max_envelope_ratio": float(np.max(ratio[pos])) if pos.any() else math.nan}


def _is_strictly_monotone(cfg: WarpedProductConfig) -> bool:
    d = cfg.warping.derivative(cfg.nodes)
    return bool(np.all(d > 0) or np.all(d < 0))


def run_compact(sc: Scenario, out: Path, res: ScenarioResult) -> None:
    fib = fiber_from_dict(sc.fiber)
    cfg = WarpedProductConfig(sc.n, sc.L, Warping.from_dict(sc.warping), sc.interval_offset, sc.grid)
    report: dict = {"config": cfg.to_dict(), "fiber": fib.describe(), "mode": sc.mode}
    verdict: dict = {}
    if sc.mode == "mixed":
        mode, mono = mixed_first_mode(cfg, fib)
        report["monotonicity"] = mono.to_dict()
        ok = mono.min_interior_w_prime > 0 and mono.max_flux_increment < 0
        verdict = {"checked": True, "passed": bool(ok),
                   "claim": "w_11' > 0 inside and the maximum sits at r = L"}
    elif sc.mode == "degenerate":
        sphere = sc.fiber.get("kind") == "sphere"
        if not sphere:
            raise ConfigError("degenerate mode tunes a sphere radius", "fiber.kind")

        def make_fiber(rho):
            return fiber_from_dict({**sc.fiber, "rho": float(rho)})

        fib, rho = tune_degenerate_radius(cfg, make_fiber, tuple(sc.rho_bracket))
        r0 = sc.r0 if sc.r0 is not None else cfg.nodes[0] + 0.5 * cfg.L
        mode = degenerate_pair_mode(cfg, fib, r0)
        report["tuned_rho"] = rho
        scale = max(abs(p.w_prime).max() for _, p, _ in mode.parts)
        ok = mode.info["gradient_norm"] <= 1e-6 * scale
        verdict = {"checked": True, "passed": bool(ok), "claim": "interior critical point at (r0, x0)",
                   "classification": mode.info["classification"]}
    else:
        mode = second_neumann_mode(cfg, fib)
        pair = mode.parts[0][1]
        mono = check_radial_monotonicity(pair, cfg)
        report["monotonicity"] = mono.to_dict()
        hyp = _is_strictly_monotone(cfg) and not mode.near_degenerate
        report["hypotheses_met"] = hyp
        ext = locate_hotspots_compact(mode, fib, sc.r_points)
        report["extrema"] = ext.summary()
        verdict = {"checked": hyp, "passed": bool(ext.all_on_boundary) if hyp else True,
                   "claim": "all extrema on the boundary" if hyp else "hypotheses not met; reported only"}
    report.update({"kind": mode.kind, "mu": mode.mu, "near_degenerate": mode.near_degenerate,
                   "nu2_multiplicity": mode.nu2_multiplicity, "info": mode.info})
    rows = []
    for idx, (coef, pair, k) in enumerate(mode.parts):
        s = pair.spline()
        r = np.linspace(pair.r[0], pair.r[-1], sc.csv_points)
        w, dw = s(r), s(r, 1)
        rows.extend([[idx, k, r[i], coef * w[i], coef * dw[i]] for i in range(r.size)])
    _write_atomic(out / "modes.csv", _csv_text(["part", "k", "r", "w", "w_prime"], rows))
    report["verdict"] = verdict
    _write_atomic(out / "report.json", _json_text(report))
    res.files += ["modes.csv", "report.json"]
    res.record["verdict"] = verdict
    res.record["eigenvalues"] = {"mu": mode.mu, **{k: v for k, v in mode.info.items() if k.startswith("mu_")}}
    if verdict.get("checked") and not verdict["passed"]:
        res.status = "verdict-failed"


def _cone_model(sc: Scenario, tol: float | None, t_min: float) -> tuple[ConeHeatModel, InitialCondition]:
    fib = fiber_from_dict(sc.fiber)
    phi = InitialCondition.from_dict(sc.phi)
    model = ConeHeatModel(fib, sc.n, sc.R, sc.t_min or t_min, tol or sc.tol, sc.quad_rtol)
    model.fit(phi)
    return model, phi


def _calibrated_constants(sc: Scenario) -> dict:
    fib = fiber_from_dict(sc.fiber)
    out = {"weyl_constant": calibrate_weyl_constant(fib), "sup_norm_constant": calibrate_sup_norm_constant(fib)}
    rng = np.random.default_rng(sc.seed)
    samples = np.column_stack([rng.uniform(0, 2, 24), rng.uniform(0, 2, 24), rng.uniform(1, 10, 24)])
    big = fiber_from_dict({**sc.fiber, "count": 2048})
    cone = ConeSetup(sc.n, big)
    plan = kernel_truncation(cone, 2.0, 1e-12)
    x = big.sample_grid().points[0]
    vals = np.array([heat_kernel(cone, (r, x), (s, x), t, plan) for r, s, t in samples])
    out["gaussian_C2"] = 8.0
    out["gaussian_C1"] = calibrate_gaussian_constants(cone, samples, vals, 8.0)
    out["gaussian_samples"] = int(samples.shape[0])
    return out


def run_cone_field(sc: Scenario, out: Path, res: ScenarioResult, tol: float | None) -> None:
    times = np.asarray(sc.field_times, float)
    model, phi = _cone_model(sc, tol, float(times.min()))
    fib = model.cone_.fiber
    pts = fib.sample_grid(None if sc.field_fiber_resolution is None else tuple(sc.field_fiber_resolution)).points
    coords = fib.coordinates(pts)
    rows = []
    for t in times:
        r = np.linspace(0.0, sc.R * math.sqrt(t), sc.field_r_count)
        fld = model.field(float(t), r, pts)
        for i in range(r.size):
            for j in range(pts.shape[0]):
                rows.append([t, r[i], *coords[j], fld.u[i, j], fld.du_dr[i, j]])
    _write_atomic(out / "field.csv", _csv_text(["t", "r", *fib.coordinate_names, "u", "du_dr"], rows))
    try:
        pred = model.prediction(sc.epsilon).to_dict()
    except NoTransverseData as exc:
        pred = {"regime": None, "note": str(exc)}
    pred["calibrated_constants"] = _calibrated_constants(sc)
    pred["truncation"] = model.plan_.to_dict()
    pred["mass"] = model.mass_
    _write_atomic(out / "prediction.json", _json_text(pred))
    res.files += ["field.csv", "prediction.json"]
    res.record["truncation"] = model.plan_.to_dict()
    res.record["calibrated_constants"] = pred["calibrated_constants"]
    res.record["prediction"] = {k: v for k, v in pred.items() if k not in ("calibrated_constants", "truncation")}


def run_cone_track(sc: Scenario, out: Path, res: ScenarioResult, tol: float | None) -> None:
    times = sc.times()
    model, phi = _cone_model(sc, tol, float(times[0]))
    res_fib = None if sc.fiber_resolution is None else tuple(sc.fiber_resolution)
    tracker = HotspotTracker(times, sc.nodes_per_decade, sc.r_lo_rel, res_fib, sc.rel_tol, sc.fit_fraction,
                             sc.dist_time)
    tracker.fit(model)
    traj = tracker.trajectory_
    _write_atomic(out / "track.csv", _csv_text(traj.header, traj.rows()))
    pred = tracker.prediction_
    verdict: dict = {"prediction": None if pred is None else pred.to_dict()}
    if pred is None:
        verdict.update({"passed": True, "message": "no transverse data; trajectory only"})
    else:
        v = tracker.verdict_
        verdict.update(v.to_dict())
        passed = v.passed
        if sc.expected_regime is not None and pred.regime != sc.expected_regime:
            passed = False
            verdict["message"] += f"; expected regime {sc.expected_regime}, predicted {pred.regime}"
        if pred.regime != 1:
            mask = np.asarray(pred.U_epsilon(traj.sets[-1].points[traj.sets[-1].best][None, :]))
            verdict["final_in_U_epsilon"] = bool(mask[0])
            passed = passed and bool(mask[0])
        verdict["passed"] = bool(passed)
    verdict["truncation"] = model.plan_.to_dict()
    _write_atomic(out / "verdict.json", _json_text(verdict))
    res.files += ["track.csv", "verdict.json"]
    res.record["truncation"] = model.plan_.to_dict()
    res.record["verdict"] = {k: v for k, v in verdict.items() if k != "truncation"}
    if not verdict["passed"]:
        res.status = "verdict-failed"


def run_scenario(sc: Scenario, out_root: Path, tol: float | None = None) -> ScenarioResult:
    res = ScenarioResult(sc.name, sc.kind)
    out = out_root / sc.name
    try:
        if sc.kind == "bessel-table":
            run_bessel_table(sc, out, res)
        elif sc.kind == "compact-modes":
            run_compact(sc, out, res)
        elif sc.kind == "cone-field":
            run_cone_field(sc, out, res, tol)
        else:
            run_cone_track(sc, out, res, tol)
    except HypothesisViolation as exc:
        res.status = "hypothesis-violation"
        res.message = str(exc)
    except ConfigError as exc:
        res.status = "config-error"
        res.message = str(exc)
    res.files = [f"{sc.name}/{f}" for f in res.files]
    return res


def run(config: ExperimentConfig, out_root: Path, kind: str | None = None, tol: float | None = None,
        threads: int | None = None) -> tuple[int, dict]:
    """Run the scenarios of ``config`` (optionally of one kind) and write the manifest."""
    scen = [s for s in config.scenarios if kind is None or s.kind == kind]
    workers = max(1, threads or config.threads)
    out_root.mkdir(parents=True, exist_ok=True)
    if workers > 1 and len(scen) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda s: run_scenario(s, out_root, tol), scen))
    else:
        results = [run_scenario(s, out_root, tol) for s in scen]
    manifest = {"config_hash": config.hash(), "version": __version__, "subcommand": kind or "verify-all",
                "tol_override": tol, "scenarios": [r.to_dict() for r in results]}
    _write_atomic(out_root / "manifest.json", _json_text(manifest))
    statuses = {r.status for r in results}
    if "config-error" in statuses:
        code = EXIT_CONFIG
    elif "hypothesis-violation" in statuses:
        code = EXIT_HYPOTHESIS
    elif "verdict-failed" in statuses:
        code = EXIT_VERDICT
    else:
        code = EXIT_OK
    return code, manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hotspots", description="Hot-spot experiments on warped products and cones")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"compact-modes": "second Neumann / mixed / degenerate modes on compact warped products",
             "cone-field": "sample the heat solution on a cone and report the long-time prediction",
             "cone-track": "track hot spots over a time schedule and check the predicted regime",
             "bessel-table": "tabulate I_gamma(z) with envelope ratios",
             "verify-all": "run every scenario (the built-in suite when no config is given)"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=None, help="parallel scenarios")
        p.add_argument("--tol", type=float, default=None, help="truncation tolerance override")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config) if args.config else default_suite()
        if args.threads is not None and args.threads < 1:
            raise ConfigError("must be at least 1", "--threads")
        if args.tol is not None and not args.tol > 0:
            raise ConfigError("must be positive", "--tol")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(config.output_dir)
    code, manifest = run(config, out, SUBCOMMANDS[args.command], args.tol, args.threads)
    for rec in manifest["scenarios"]:
        msg = rec.get("message") or rec.get("verdict", {}).get("message", "")
        print(f"{rec['status']:>22}  {rec['name']}  {msg}".rstrip())
    return code


if __name__ == "__main__":
    sys.exit(main())
