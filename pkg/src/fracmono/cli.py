"""Scenario-driven command line front end.

Usage::

    fracmono <command> --scenario <path> [--out <dir>] [--seed <u64>] [--threads <n>] [--mode closed|definite]

Commands: ``verify``, ``forward``, ``dtn``, ``recon-potential``,
``recon-shape``, ``localize``.  Every run writes ``<command>_report.json``
into the output directory, listing each emitted file with its sha256.

Exit status: 0 success, 1 a check failed, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import order
from .discretize import GridSpec, leakage
from .dtn import write_matrix_csv
from .errors import ArgumentError, ConfigError, NumericalError, ResourceError
from .forward import ExteriorData, residual
from .pipeline import Pipeline
from .reconstruct import (
    PixelPartition,
    contrast_cap,
    definite_lower_bound,
    inner_support_definite,
    localized_potential,
    norm_cap,
    pixel_sup_reconstruct,
    support_from_closed_sets,
    write_potential_csv,
    write_profile_csv,
    write_rows,
    write_shape_csv,
)

SCHEMA_VERSION = 1
COMMANDS = ("verify", "forward", "dtn", "recon-potential", "recon-shape", "localize")
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_TOP_KEYS = {
    "schema_version", "units", "description", "command", "grid", "pixels", "q0", "q1",
    "tolerances", "lambda_reg", "localize", "shape", "data", "trials", "seed", "rng",
    "output_dir", "acceptance",
}
_TOL_DEFAULTS = {
    "tol_rel": 1e-9,
    "pixel_tol_rel": 1e-14,
    "shape_tol_rel": 1e-10,
    "bisect_tol": None,
    "alpha_range": [0.0, 8.0],
    "alpha_threshold": 1e-2,
}
_ACCEPT_DEFAULTS = {"pixel_rel_err": 0.1, "min_ratio": None, "definite_fraction": 0.8}


# -- scenario -------------------------------------------------------------------------


def _need(cond: bool, where: str, msg: str):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _number(value, where: str) -> float:
    _need(isinstance(value, (int, float)) and not isinstance(value, bool), where, f"expected a number, got {value!r}")
    return float(value)


def _check_pieces(pieces, where: str) -> list:
    _need(isinstance(pieces, list) and pieces, where, "expected a nonempty list of pieces")
    for k, p in enumerate(pieces):
        w = f"{where}[{k}]"
        _need(isinstance(p, dict), w, "each piece is an object")
        _need(("interval" in p) != ("pixels" in p), w, "give exactly one of 'interval' or 'pixels'")
        v = _number(p.get("value"), f"{w}.value")
        _need(np.isfinite(v) and v >= 0, f"{w}.value", f"must be finite and nonnegative, got {v}")
        if "interval" in p:
            iv = p["interval"]
            _need(isinstance(iv, list) and len(iv) == 2, f"{w}.interval", "expected [a, b]")
            a, b = (_number(t, f"{w}.interval") for t in iv)
            _need(a <= b, f"{w}.interval", f"empty interval [{a}, {b}]")
        else:
            _need(isinstance(p["pixels"], list) and all(isinstance(i, int) for i in p["pixels"]),
                  f"{w}.pixels", "expected a list of pixel indices")
    return pieces


@dataclass
class Scenario:
    raw: dict
    grid: GridSpec
    command: str | None
    n_pixels: int
    q0: list
    q1: list | None
    tolerances: dict
    lambda_reg: list
    localize_pixels: list
    shape: dict
    data: object
    trials: int
    seed: int
    output_dir: str
    acceptance: dict
    units: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    def potential(self, pieces, pipe: Pipeline, pixels: PixelPartition, name: str) -> np.ndarray:
        """Interior values from pieces; later pieces override earlier ones."""
        x = pipe.grid.x_interior
        q = np.full(x.size, np.nan)
        eps = 1e-9 * pipe.h
        for k, p in enumerate(pieces):
            if "interval" in p:
                a, b = p["interval"]
                q[(x >= a - eps) & (x <= b + eps)] = p["value"]
            else:
                bad = [i for i in p["pixels"] if not 0 <= i < len(pixels)]
                _need(not bad, f"{name}[{k}].pixels", f"indices {bad} outside 0..{len(pixels) - 1}")
                q[pixels.mask(p["pixels"])] = p["value"]
        missing = np.flatnonzero(np.isnan(q))
        _need(missing.size == 0, name, f"pieces leave {missing.size} interior nodes uncovered (first at x={x[missing[0]] if missing.size else 0:g})")
        return q


def parse_scenario(raw: dict) -> Scenario:
    """Validate a scenario dictionary; messages name the offending field."""
    _need(isinstance(raw, dict), "scenario", "top level must be an object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    _need(not unknown, "scenario", f"unknown keys {unknown}")
    _need(raw.get("schema_version") == SCHEMA_VERSION, "schema_version", f"expected {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    command = raw.get("command")
    _need(command is None or command in COMMANDS, "command", f"unknown command {command!r}")

    g = raw.get("grid")
    _need(isinstance(g, dict), "grid", "missing grid object")
    for key in ("omega", "spacing", "order", "windows"):
        _need(key in g, f"grid.{key}", "required")
    omega = g["omega"]
    _need(isinstance(omega, list) and len(omega) == 2, "grid.omega", "expected [lo, hi]")
    windows = g["windows"]
    _need(isinstance(windows, list) and all(isinstance(w, list) and len(w) == 2 for w in windows),
          "grid.windows", "expected a list of [a, b] intervals")
    try:
        spec = GridSpec(
            omega_lo=_number(omega[0], "grid.omega"),
            omega_hi=_number(omega[1], "grid.omega"),
            spacing=_number(g["spacing"], "grid.spacing"),
            order=_number(g["order"], "grid.order"),
            windows=tuple((_number(a, "grid.windows"), _number(b, "grid.windows")) for a, b in windows),
            box_radius=None if g.get("box_radius") is None else _number(g["box_radius"], "grid.box_radius"),
        )
    except ArgumentError as exc:
        raise ConfigError(f"grid.{exc}") from exc

    n_pixels = raw.get("pixels", 8)
    _need(isinstance(n_pixels, int) and n_pixels >= 1, "pixels", f"expected a positive integer, got {n_pixels!r}")
    q0 = _check_pieces(raw.get("q0", [{"interval": [spec.omega_lo, spec.omega_hi], "value": 1.0}]), "q0")
    q1 = None if raw.get("q1") is None else _check_pieces(raw["q1"], "q1")

    tol = dict(_TOL_DEFAULTS)
    given = raw.get("tolerances", {})
    _need(isinstance(given, dict), "tolerances", "expected an object")
    unknown = sorted(set(given) - set(tol))
    _need(not unknown, "tolerances", f"unknown keys {unknown}")
    tol.update(given)
    for key in ("tol_rel", "pixel_tol_rel", "shape_tol_rel", "alpha_threshold"):
        v = _number(tol[key], f"tolerances.{key}")
        _need(v >= 0, f"tolerances.{key}", "must be nonnegative")
    if tol["bisect_tol"] is not None:
        _need(_number(tol["bisect_tol"], "tolerances.bisect_tol") > 0, "tolerances.bisect_tol", "must be positive")
    ar = tol["alpha_range"]
    _need(isinstance(ar, list) and len(ar) == 2 and 0 <= ar[0] < ar[1], "tolerances.alpha_range", f"need 0 <= lo < hi, got {ar!r}")

    lam = raw.get("lambda_reg", [1e-1, 1e-3, 1e-5])
    _need(isinstance(lam, list) and lam and all(_number(v, "lambda_reg") > 0 for v in lam), "lambda_reg", "expected positive values")
    loc = raw.get("localize", {}).get("pixels", [])
    _need(isinstance(loc, list), "localize.pixels", "expected a list of pixel indices")

    shape = {"mode": "closed", "alpha_cap": "contrast", "q1_bounds": None}
    shape.update(raw.get("shape", {}))
    _need(shape["mode"] in ("closed", "definite"), "shape.mode", f"expected 'closed' or 'definite', got {shape['mode']!r}")
    cap = shape["alpha_cap"]
    _need(cap in ("contrast", "norm") or (isinstance(cap, (int, float)) and cap > 0), "shape.alpha_cap",
          "expected 'contrast', 'norm' or a positive number")
    if shape["q1_bounds"] is not None:
        b = shape["q1_bounds"]
        _need(isinstance(b, list) and len(b) == 2 and 0 < b[0] <= b[1], "shape.q1_bounds", "need 0 < lower <= upper")

    trials = raw.get("trials", 20)
    _need(isinstance(trials, int) and trials >= 1, "trials", "expected a positive integer")
    seed = raw.get("seed", 0)
    _need(isinstance(seed, int) and 0 <= seed < 2**64, "seed", "expected an unsigned 64-bit integer")
    _need(raw.get("rng", "PCG64") == "PCG64", "rng", "only 'PCG64' is supported")

    acc = dict(_ACCEPT_DEFAULTS)
    acc.update(raw.get("acceptance", {}))
    units = raw.get("units", {"length": "dimensionless", "potential": "dimensionless"})

    return Scenario(
        raw=raw, grid=spec, command=command, n_pixels=n_pixels, q0=q0, q1=q1, tolerances=tol,
        lambda_reg=[float(v) for v in lam], localize_pixels=list(loc), shape=shape, data=raw.get("data"),
        trials=trials, seed=seed, output_dir=str(raw.get("output_dir", "fracmono_out")), acceptance=acc,
        units=units,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario: file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario: invalid JSON ({exc})") from exc
    return parse_scenario(raw)


# -- run context -----------------------------------------------------------------------


@dataclass
class Run:
    scenario: Scenario
    out: Path
    threads: int = 1
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def check(self, name: str, passed: bool, **detail):
        self.checks.append({"name": name, "passed": bool(passed), **_jsonable(detail)})

    def emit(self, path: Path) -> Path:
        self.files.append(Path(path))
        return path

    def path(self, name: str) -> Path:
        return self.out / name


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _setup(run: Run):
    sc = run.scenario
    pipe = Pipeline.from_spec(sc.grid)
    pixels = PixelPartition.uniform(pipe.n_interior, sc.n_pixels) if sc.n_pixels <= pipe.n_interior else None
    _need(pixels is not None, "pixels", f"{sc.n_pixels} pixels exceed {pipe.n_interior} interior nodes")
    q0 = sc.potential(sc.q0, pipe, pixels, "q0")
    q1 = None if sc.q1 is None else sc.potential(sc.q1, pipe, pixels, "q1")
    return pipe, pixels, q0, q1


def _need_q1(q1, command: str):
    _need(q1 is not None, "q1", f"required by {command}")


# -- commands ------------------------------------------------------------------------


def cmd_verify(run: Run):
    sc = run.scenario
    pipe, pixels, q0, q1 = _setup(run)
    rng = np.random.Generator(np.random.PCG64(sc.seed))
    n, m = pipe.n_interior, pipe.grid.measured.size
    tol = sc.tolerances["tol_rel"]
    full_E = pipe.grid.exterior

    rows = []
    worst = {"symmetry": 0.0, "psd": np.inf, "monotone": np.inf, "slack": np.inf, "sandwich": np.inf}
    fails = {k: 0 for k in ("symmetry", "psd", "monotone", "inequalities", "sandwich", "doubling")}
    for t in range(sc.trials):
        a = rng.uniform(0.5, 3.0, n)
        b = a + rng.uniform(0.0, 1.0, n) * (3.0 - a)
        c = rng.uniform(0.5, 3.0, n)
        F = rng.standard_normal(m)

        lam_full = pipe.dtn(a, full_E)
        asym = lam_full.asymmetry()
        lmin = order.lambda_min(lam_full.matrix) / max(np.linalg.norm(lam_full.matrix), order.ABS_FLOOR)
        worst["symmetry"] = max(worst["symmetry"], asym)
        worst["psd"] = min(worst["psd"], lmin)
        fails["symmetry"] += asym > 1e-10
        fails["psd"] += lmin < -1e-10

        mono = order.loewner_leq(pipe.dtn(a), pipe.dtn(b), tol)
        worst["monotone"] = min(worst["monotone"], mono.lambda_min)
        fails["monotone"] += not mono.passed

        rep = order.verify_monotonicity(pipe, a, c, F)
        worst["slack"] = min(worst["slack"], min(rep.slacks) / rep.scale)
        fails["inequalities"] += not rep.passed(1e-8)

        up, low = order.verify_sandwich(pipe, a, c, tol)
        worst["sandwich"] = min(worst["sandwich"], up.lambda_min, low.lambda_min)
        fails["sandwich"] += not (up.passed and low.passed)

        dbl = order.verify_doubling(pipe, a, c, F)
        fails["doubling"] += not dbl.within
        rows.append([t, min(rep.slacks) / rep.scale, mono.lambda_min, dbl.ratio, dbl.bound_q1, dbl.bound_q0])

    run.check("dtn_symmetric", fails["symmetry"] == 0, worst_asymmetry=worst["symmetry"], failures=fails["symmetry"])
    run.check("dtn_psd_full_exterior", fails["psd"] == 0, worst_relative_lambda_min=worst["psd"], failures=fails["psd"])
    run.check("monotone_pairs", fails["monotone"] == 0, worst_lambda_min=worst["monotone"], failures=fails["monotone"])
    run.check("four_inequalities", fails["inequalities"] == 0, worst_relative_slack=worst["slack"], failures=fails["inequalities"])
    run.check("sandwich", fails["sandwich"] == 0, worst_lambda_min=worst["sandwich"], failures=fails["sandwich"])
    run.check("doubling", fails["doubling"] == 0, failures=fails["doubling"])

    c = rng.uniform(0.5, 3.0, n)
    same = order.verify_monotonicity(pipe, c, c, rng.standard_normal(m))
    run.check("equal_potentials_zero_slack", max(abs(s) for s in same.slacks) <= 1e-12, slacks=same.slacks)

    base = np.full(n, 1.5)
    lam_base = pipe.dtn(base)
    S = pipe.solution_operator(base)
    conv, lin = [], []
    for k in range(len(pixels)):
        lower = base - 0.5 * pixels.mask(k)
        conv.append(order.loewner_leq(lam_base, pipe.dtn(lower), tol))
        lin.append(order.linearized_leq(S, np.zeros(n), -0.5 * pixels.mask(k), tol))
    run.check("converse_witness", not any(v.passed for v in conv), lambda_min=[v.lambda_min for v in conv])
    run.check("linearized_witness", all(v.lambda_min < 0 for v in lin), lambda_min=[v.lambda_min for v in lin])

    run.summary["leakage"] = leakage(pipe.grid, pipe.op)
    run.emit(write_rows(run.path("verify_trials.csv"),
                        ["trial", "min_relative_slack", "monotone_lambda_min", "doubling_ratio", "inverse_lower", "upper"], rows))


def _forward_data(run: Run, pipe: Pipeline) -> np.ndarray:
    data = run.scenario.data
    m = pipe.grid.measured.size
    if data is None or data == "ones":
        return np.ones(m)
    if data == "random":
        return np.random.Generator(np.random.PCG64(run.scenario.seed)).standard_normal(m)
    _need(isinstance(data, list) and len(data) == m, "data", f"expected 'ones', 'random' or {m} numbers")
    return np.array([_number(v, "data") for v in data])


def cmd_forward(run: Run):
    pipe, pixels, q0, q1 = _setup(run)
    F = _forward_data(run, pipe)
    for name, q in (("q0", q0), ("q1", q1)):
        if q is None:
            continue
        sys_ = pipe.system(q)
        sol = pipe.solve(q, ExteriorData.on_measured(pipe.grid, F))
        res = residual(sys_, sol)
        run.check(f"residual_{name}", res <= 1e-10, relative_residual=res)
        run.emit(write_profile_csv(run.path(f"forward_u_{name}.csv"), pipe.grid.x, sol.u, "u"))
        run.emit(write_profile_csv(run.path(f"potential_{name}.csv"), pipe.grid.x_interior, q, "q"))


def cmd_dtn(run: Run):
    pipe, pixels, q0, q1 = _setup(run)
    mats = {"q0": pipe.dtn(q0)}
    if q1 is not None:
        mats["q1"] = pipe.dtn(q1)
    for name, lam in mats.items():
        run.check(f"symmetric_{name}", lam.asymmetry() <= 1e-10, asymmetry=lam.asymmetry())
        full = pipe.dtn(q0 if name == "q0" else q1, pipe.grid.exterior).matrix
        lmin = order.lambda_min(full)
        run.check(f"psd_full_exterior_{name}", lmin >= -1e-10 * np.linalg.norm(full), lambda_min=lmin)
        run.emit(lam.to_csv(run.path(f"dtn_{name}.csv")))
    if q1 is not None:
        delta = mats["q1"].matrix - mats["q0"].matrix
        run.emit(write_matrix_csv(delta, run.path("dtn_difference.csv")))
        if np.all(q1 >= q0):
            v = order.loewner_leq(mats["q0"], mats["q1"], run.scenario.tolerances["tol_rel"])
            run.check("monotone_q0_le_q1", v.passed, **v.to_dict())
    run.emit(write_profile_csv(run.path("measured_nodes.csv"), pipe.grid.x_measured, np.arange(pipe.grid.measured.size), "column"))


def cmd_recon_potential(run: Run):
    sc = run.scenario
    pipe, pixels, q0, q1 = _setup(run)
    truth = q0 if q1 is None else q1
    tol = sc.tolerances
    res = pixel_sup_reconstruct(
        pipe, pipe.dtn(truth).matrix, pixels, alpha_lo=tol["alpha_range"][0], alpha_hi=tol["alpha_range"][1],
        bisect_tol=tol["bisect_tol"], tol_rel=tol["pixel_tol_rel"], threads=run.threads,
    )
    mins = pixels.pixel_min(truth)
    scale = max(float(np.max(np.abs(truth))), order.ABS_FLOOR)
    err = np.abs(res.alpha - mins) / np.maximum(mins, order.ABS_FLOOR)
    bound = sc.acceptance["pixel_rel_err"]
    run.check("pixel_sup_consistency", bool(np.all(err <= bound)), relative_error=err, bound=bound, q_scale=scale)
    run.summary.update(res.to_dict())
    run.notes.extend(res.notes)
    run.emit(write_potential_csv(run.path("recon_potential.csv"), pipe, pixels, res, truth))
    run.emit(write_profile_csv(run.path("recon_profile.csv"), pipe.grid.x_interior, pixels.expand(res.alpha), "alpha"))


def cmd_recon_shape(run: Run, mode: str | None = None):
    sc = run.scenario
    pipe, pixels, q0, q1 = _setup(run)
    _need_q1(q1, "recon-shape")
    mode = mode or sc.shape["mode"]
    tol = sc.tolerances["shape_tol_rel"]
    delta = pipe.dtn(q1).matrix - pipe.dtn(q0).matrix
    S0 = pipe.solution_operator(q0)
    expected = pixels.touching(q1 - q0)
    if mode == "closed":
        cap = sc.shape["alpha_cap"]
        if cap == "contrast":
            bounds = sc.shape["q1_bounds"] or [float(q1.min()), float(q1.max())]
            _need(bounds[0] > 0, "shape.q1_bounds", "lower bound must be positive for the contrast cap")
            cap = contrast_cap(q0, *bounds)
        elif cap == "norm":
            cap = norm_cap(delta, S0)
        res = support_from_closed_sets(delta, S0, pixels, float(cap), tol, threads=run.threads)
        run.check("support_matches_seeded", bool(np.array_equal(res.inside, expected)),
                  reconstructed=res.support, seeded=np.flatnonzero(expected))
    else:
        diff = q1 - q0
        _need(np.all(diff >= 0) or np.all(diff <= 0), "q1", "definite mode needs q1 >= q0 or q1 <= q0 everywhere")
        sign = 1 if np.all(diff >= 0) else -1
        res = inner_support_definite(delta, sign, S0, pixels, tol, sc.tolerances["alpha_threshold"], threads=run.threads)
        run.check("support_matches_seeded", bool(np.array_equal(res.inside, expected)),
                  reconstructed=res.support, seeded=np.flatnonzero(expected))
        if sign > 0 and expected.any():
            amp = float(np.min(diff[pixels.mask(np.flatnonzero(expected))]))
            guaranteed = definite_lower_bound(float(q0.min()), amp)
            frac = sc.acceptance["definite_fraction"]
            got = res.witness["alpha_star"][expected]
            run.check("definite_lower_bound", bool(np.all(got >= frac * guaranteed)),
                      alpha_star=got, guaranteed=guaranteed, fraction=frac)
    run.summary.update(res.to_dict())
    run.emit(write_shape_csv(run.path(f"recon_shape_{mode}.csv"), pipe, pixels, res))
    run.emit(write_profile_csv(run.path(f"recon_shape_{mode}_profile.csv"), pipe.grid.x_interior,
                               pixels.expand(res.inside.astype(float)), "inside"))


def cmd_localize(run: Run):
    sc = run.scenario
    pipe, pixels, q0, q1 = _setup(run)
    _need(sc.localize_pixels, "localize.pixels", "required by localize")
    bad = [i for i in sc.localize_pixels if not (isinstance(i, int) and 0 <= i < len(pixels))]
    _need(not bad, "localize.pixels", f"indices {bad} outside 0..{len(pixels) - 1}")
    mask = pixels.mask(sc.localize_pixels)
    S = pipe.solution_operator(q0)
    try:
        results = [localized_potential(S, mask, lam) for lam in sc.lambda_reg]
    except ArgumentError as exc:
        raise ConfigError(f"localize: {exc}") from exc
    ratios = np.array([r.ratio for r in results])
    order_idx = np.argsort(sc.lambda_reg)[::-1]
    increasing = bool(np.all(np.diff(ratios[order_idx]) > 0))
    run.check("ratio_increases", increasing, lambda_reg=sc.lambda_reg, ratio=ratios)
    if sc.acceptance["min_ratio"] is not None:
        best = float(ratios[order_idx[-1]])
        run.check("ratio_exceeds", best > sc.acceptance["min_ratio"], ratio=best, bound=sc.acceptance["min_ratio"])
    run.summary["energies"] = [r.to_dict() for r in results]
    run.emit(write_rows(run.path("localize_sweep.csv"), ["lambda_reg", "ratio", "energy_inside", "energy_outside"],
                        [[r.lam_reg, r.ratio, r.energy_inside, r.energy_outside] for r in results]))
    last = results[int(order_idx[-1])]
    run.emit(write_profile_csv(run.path("localize_u.csv"), pipe.grid.x_interior, S.apply(last.F), "u"))
    run.emit(write_profile_csv(run.path("localize_data.csv"), pipe.grid.x_measured, last.F, "F"))


HANDLERS = {
    "verify": cmd_verify,
    "forward": cmd_forward,
    "dtn": cmd_dtn,
    "recon-potential": cmd_recon_potential,
    "recon-shape": cmd_recon_shape,
    "localize": cmd_localize,
}


# -- driver ----------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_report(run: Run | None, out: Path, command: str, status: int, started: float, digest: str | None, error: str | None):
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "command": command,
        "exit_status": status,
        "scenario_digest": digest,
        "wall_time_s": time.perf_counter() - started,
        "checks": [] if run is None else run.checks,
        "summary": {} if run is None else _jsonable(run.summary),
        "notes": [] if run is None else run.notes,
        "error": error,
        "manifest": [] if run is None else [
            {"file": p.name, "sha256": _sha256(p)} for p in run.files
        ],
    }
    path = out / f"{command}_report.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return path


def run(command: str, scenario_path, out=None, seed=None, threads: int = 1, mode=None) -> tuple[int, Path | None]:
    """Execute one command; returns the exit status and the report path."""
    started = time.perf_counter()
    out_dir = None if out is None else Path(out)
    run_ = None
    digest = None
    try:
        if command not in HANDLERS:
            raise ConfigError(f"command: unknown command {command!r}")
        sc = load_scenario(scenario_path)
        if seed is not None:
            _need(0 <= seed < 2**64, "seed", "expected an unsigned 64-bit integer")
            sc.seed = seed
        digest = sc.digest
        out_dir = out_dir or Path(sc.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        run_ = Run(sc, out_dir, threads=max(1, int(threads)))
        if command == "recon-shape":
            cmd_recon_shape(run_, mode)
        else:
            HANDLERS[command](run_)
    except (ConfigError, ArgumentError, ResourceError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, write_report(run_, out_dir, command, EXIT_CONFIG, started, digest, str(exc)) if out_dir else None
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, write_report(run_, out_dir, command, EXIT_NUMERICAL, started, digest, str(exc))

    status = EXIT_OK if all(c["passed"] for c in run_.checks) else EXIT_CHECK
    for c in run_.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    report = write_report(run_, out_dir, command, status, started, digest, None)
    print(f"report: {report}")
    return status, report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracmono", description="Monotonicity-based inversion for the 1D fractional Schrodinger equation")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides the scenario)")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized trials (u64)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for pixel sweeps")
    p.add_argument("--mode", choices=("closed", "definite"), default=None, help="shape test for recon-shape")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    status, _ = run(args.command, args.scenario, args.out, args.seed, args.threads, args.mode)
    return status


if __name__ == "__main__":
    sys.exit(main())
