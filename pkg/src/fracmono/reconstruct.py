"""Inversion algorithms on a pixel partition of the interior nodes.

* ``pixel_sup_reconstruct`` -- per pixel, the largest constant ``alpha``
  whose test potential ``alpha*chi_m`` has a DtN matrix below the measured one.
* ``support_from_closed_sets`` -- linearised test against ``T_C`` for the
  complement ``C`` of every pixel (indefinite contrasts).
* ``inner_support_definite`` -- largest ``alpha`` with
  ``sign*(L1 - L0) >= alpha*T_p`` per pixel (definite contrasts).
* ``localized_potential`` / ``runge_approximate`` -- ridge-regularised
  least squares for exterior data whose interior solution matches a target.

Test potentials ``alpha*chi_m`` vanish off the pixel.  The discrete system
stays coercive for them, but results built on them carry a note saying so.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la

from .dtn import DtnMatrix, testing_operator
from .errors import ArgumentError
from .forward import SolutionOperator
from .order import ABS_FLOOR, loewner_leq
from .pipeline import Pipeline

ZERO_OFF_PIXEL_NOTE = "test potentials vanish off their pixel (no positive infimum); discrete system is still coercive"


def _map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PixelPartition:
    """Disjoint contiguous runs of interior nodes covering the interior.

    Pixel entries are positions in ``grid.interior`` (not global node ids).
    """

    pixels: tuple
    n_interior: int

    def __post_init__(self):
        pix = tuple(np.asarray(p, dtype=int) for p in self.pixels)
        seen = np.zeros(self.n_interior, dtype=int)
        for k, p in enumerate(pix):
            if p.size == 0:
                raise ArgumentError(f"pixel {k} is empty")
            if np.any(np.diff(p) != 1):
                raise ArgumentError(f"pixel {k} is not a contiguous node run")
            if p.min() < 0 or p.max() >= self.n_interior:
                raise ArgumentError(f"pixel {k} leaves the interior")
            seen[p] += 1
        if np.any(seen != 1):
            raise ArgumentError("pixels must be disjoint and cover every interior node")
        object.__setattr__(self, "pixels", pix)

    @classmethod
    def uniform(cls, n_interior: int, n_pixels: int) -> "PixelPartition":
        """Split into ``n_pixels`` runs whose sizes differ by at most one."""
        if not 1 <= n_pixels <= n_interior:
            raise ArgumentError(f"need 1 <= pixels <= {n_interior}, got {n_pixels}")
        return cls(tuple(np.array_split(np.arange(n_interior), n_pixels)), n_interior)

    def __len__(self):
        return len(self.pixels)

    def __iter__(self):
        return iter(self.pixels)

    def mask(self, k) -> np.ndarray:
        """Boolean interior mask of pixel ``k`` (or of a collection of pixels)."""
        m = np.zeros(self.n_interior, dtype=bool)
        for j in np.atleast_1d(k):
            m[self.pixels[int(j)]] = True
        return m

    def expand(self, values) -> np.ndarray:
        """Piecewise-constant interior vector from one value per pixel."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise ArgumentError(f"expected {len(self)} pixel values, got {values.shape}")
        out = np.empty(self.n_interior)
        for p, v in zip(self.pixels, values):
            out[p] = v
        return out

    def pixel_min(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return np.array([q[p].min() for p in self.pixels])

    def ranges(self) -> list[tuple[int, int]]:
        return [(int(p[0]), int(p[-1])) for p in self.pixels]

    def touching(self, q_diff, atol: float = 0.0) -> np.ndarray:
        """Pixels on which ``q_diff`` is not identically zero."""
        q_diff = np.asarray(q_diff, dtype=float)
        return np.array([bool(np.any(np.abs(q_diff[p]) > atol)) for p in self.pixels])


# -- pixel-sup potential reconstruction ---------------------------------------------


@dataclass
class PotentialResult:
    alpha: np.ndarray
    iterations: np.ndarray
    clamp: list
    witness: np.ndarray
    alpha_range: tuple
    tol_rel: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "iterations": self.iterations.tolist(),
            "clamp": list(self.clamp),
            "witness_lambda_min": self.witness.tolist(),
            "alpha_range": list(self.alpha_range),
            "tol_rel": self.tol_rel,
            "notes": list(self.notes),
        }


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, width: float, max_iter: int):
    it = 0
    while hi - lo > width and it < max_iter:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
        it += 1
    return lo, it


def pixel_sup_reconstruct(
    pipe: Pipeline,
    lam_meas,
    pixels: PixelPartition,
    alpha_lo: float = 0.0,
    alpha_hi: float = 8.0,
    bisect_tol: float | None = None,
    tol_rel: float = 1e-14,
    max_iter: int = 60,
    threads: int = 1,
) -> PotentialResult:
    """Largest ``alpha`` per pixel with ``Lambda(alpha*chi_m) <= lam_meas``.

    The predicate is monotone in ``alpha`` (a larger constant gives a larger
    DtN matrix), so bisection on ``[alpha_lo, alpha_hi]`` is valid.  Clamp
    flags are ``"upper"`` when the test still passes at ``alpha_hi`` and
    ``"lower"`` when it already fails at ``alpha_lo``.
    """
    lam_meas = np.asarray(lam_meas, dtype=float)
    m = pipe.grid.measured.size
    if lam_meas.shape != (m, m):
        raise ArgumentError(f"measured DtN is {lam_meas.shape}, grid measures {m} nodes")
    if pixels.n_interior != pipe.n_interior:
        raise ArgumentError("pixel partition was built for a different grid")
    if not 0.0 <= alpha_lo < alpha_hi:
        raise ArgumentError(f"need 0 <= alpha_lo < alpha_hi, got [{alpha_lo}, {alpha_hi}]")
    width = 1e-3 * (alpha_hi - alpha_lo) if bisect_tol is None else float(bisect_tol)

    def verdict(k, a):
        psi = a * pixels.mask(k).astype(float)
        return loewner_leq(pipe.dtn(psi), lam_meas, tol_rel)

    def one(k):
        if verdict(k, alpha_hi).passed:
            return alpha_hi, 0, "upper", verdict(k, alpha_hi).lambda_min
        if not verdict(k, alpha_lo).passed:
            return alpha_lo, 0, "lower", verdict(k, alpha_lo).lambda_min
        a, it = _bisect(lambda x: verdict(k, x).passed, alpha_lo, alpha_hi, width, max_iter)
        return a, it, "", verdict(k, a).lambda_min

    rows = _map(one, list(range(len(pixels))), threads)
    return PotentialResult(
        alpha=np.array([r[0] for r in rows]),
        iterations=np.array([r[1] for r in rows], dtype=int),
        clamp=[r[2] for r in rows],
        witness=np.array([r[3] for r in rows]),
        alpha_range=(alpha_lo, alpha_hi),
        tol_rel=tol_rel,
        notes=[ZERO_OFF_PIXEL_NOTE],
    )


# -- shape reconstruction -------------------------------------------------------------


@dataclass
class ShapeResult:
    mode: str
    inside: np.ndarray
    witness: dict
    params: dict
    notes: list = field(default_factory=list)

    @property
    def support(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.inside)]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "inside": self.inside.tolist(),
            "support": self.support,
            "witness": {k: np.asarray(v).tolist() for k, v in self.witness.items()},
            "params": dict(self.params),
            "notes": list(self.notes),
        }


def contrast_cap(q0, lower: float, upper: float) -> float:
    """Cap for the closed-set test from a-priori bounds ``lower <= q1 <= upper``.

    Where ``q1 = q0`` off ``C`` the two tests hold once
    ``alpha >= sup(q1 - q0)`` and ``alpha >= sup(q0 (q0 - q1) / q1)``;
    both are bounded using the a-priori range of ``q1``.
    """
    q0 = np.asarray(q0, dtype=float)
    if not 0 < lower <= upper:
        raise ArgumentError(f"need 0 < lower <= upper, got ({lower}, {upper})")
    up = upper - q0.min()
    down = q0.max() * (q0.max() - lower) / lower
    return float(max(up, down, ABS_FLOOR))


def norm_cap(delta, S0: SolutionOperator) -> float:
    """``2 ||delta||_F / lambda_min^+(T_Omega)``.

    Always large enough in exact arithmetic, but ``T_Omega`` has eigenvalues
    near rounding level, so the cap is typically astronomically large.
    """
    T = testing_operator(S0, np.ones(S0.shape[0], dtype=bool)).matrix
    ev = np.linalg.eigvalsh(T)
    pos = ev[ev > ABS_FLOOR * max(ev[-1], ABS_FLOOR)]
    if pos.size == 0:
        raise ArgumentError("testing operator of the whole domain vanishes")
    return float(2.0 * np.linalg.norm(np.asarray(delta)) / pos[0])


def support_from_closed_sets(
    delta,
    S0: SolutionOperator,
    pixels: PixelPartition,
    alpha_cap: float,
    tol_rel: float = 1e-10,
    threads: int = 1,
) -> ShapeResult:
    """Mark pixel ``p`` outside iff ``-a T_C <= delta <= a T_C`` with ``C`` its complement.

    Both conditions only get easier as ``a`` grows (``T_C`` is PSD), so one
    test at ``a = alpha_cap`` decides.  Pixels not marked outside form the
    reconstructed support.
    """
    if not alpha_cap > 0:
        raise ArgumentError(f"alpha_cap must be positive, got {alpha_cap}")
    delta = np.asarray(delta, dtype=float)
    if pixels.n_interior != S0.shape[0]:
        raise ArgumentError("pixel partition and solution operator disagree")

    def one(k):
        T = alpha_cap * testing_operator(S0, ~pixels.mask(k)).matrix
        upper = loewner_leq(delta, T, tol_rel)
        lower = loewner_leq(-T, delta, tol_rel)
        return upper, lower

    rows = _map(one, list(range(len(pixels))), threads)
    outside = np.array([u.passed and l.passed for u, l in rows])
    return ShapeResult(
        mode="closed",
        inside=~outside,
        witness={
            "lambda_min_upper": np.array([u.lambda_min for u, _ in rows]),
            "lambda_min_lower": np.array([l.lambda_min for _, l in rows]),
            "tolerance": np.array([max(u.tolerance, l.tolerance) for u, l in rows]),
        },
        params={"alpha_cap": alpha_cap, "tol_rel": tol_rel},
    )


def definite_lower_bound(inf_q0: float, amplitude: float) -> float:
    """``inf(q0)*a / (inf(q0) + a)``: guaranteed test level for a jump ``a`` over ``q0``."""
    return inf_q0 * amplitude / (inf_q0 + amplitude)


def inner_support_definite(
    delta,
    sign: int,
    S0: SolutionOperator,
    pixels: PixelPartition,
    tol_rel: float = 1e-10,
    alpha_threshold: float = 1e-2,
    alpha_cap: float | None = None,
    max_iter: int = 60,
    threads: int = 1,
) -> ShapeResult:
    """Per pixel, ``alpha*_p = max{a >= 0 : sign*delta >= a*T_p}`` by bisection.

    ``sign`` is ``+1`` when ``q1 >= q0`` and ``-1`` when ``q1 <= q0``.  A pixel
    is inside iff ``alpha*_p > alpha_threshold``.  Without ``alpha_cap`` the
    search interval is ``[0, 2 ||delta||_2 / lambda_max(T_p)]``, beyond which
    the test cannot pass.
    """
    if sign not in (1, -1):
        raise ArgumentError(f"sign must be +1 or -1, got {sign}")
    D = sign * np.asarray(delta, dtype=float)
    if pixels.n_interior != S0.shape[0]:
        raise ArgumentError("pixel partition and solution operator disagree")
    d_norm = max(float(np.linalg.norm(D, 2)), ABS_FLOOR)

    def one(k):
        T = testing_operator(S0, pixels.mask(k)).matrix
        lam_max = float(np.linalg.eigvalsh(T)[-1])
        cap = alpha_cap if alpha_cap is not None else 2.0 * d_norm / max(lam_max, ABS_FLOOR)
        test = lambda a: loewner_leq(a * T, D, tol_rel)
        if test(cap).passed:
            return cap, test(cap).lambda_min, cap, True
        a, _ = _bisect(lambda a: test(a).passed, 0.0, cap, 0.0, max_iter)
        return a, test(a).lambda_min, cap, False

    rows = _map(one, list(range(len(pixels))), threads)
    alpha_star = np.array([r[0] for r in rows])
    return ShapeResult(
        mode="definite",
        inside=alpha_star > alpha_threshold,
        witness={
            "alpha_star": alpha_star,
            "lambda_min": np.array([r[1] for r in rows]),
            "search_cap": np.array([r[2] for r in rows]),
            "capped": np.array([r[3] for r in rows]),
        },
        params={"sign": sign, "tol_rel": tol_rel, "alpha_threshold": alpha_threshold},
    )


# -- localized potentials and Runge approximation --------------------------------------


def _ridge(S: SolutionOperator, target: np.ndarray, lam_reg: float, h: float) -> np.ndarray:
    Sm = S.S
    normal = h * (Sm.T @ Sm) + lam_reg * np.eye(Sm.shape[1])
    return la.solve(normal, h * (Sm.T @ target), assume_a="pos")


def normal_residual(S: SolutionOperator, F, target, lam_reg: float, h: float | None = None) -> float:
    """Relative residual of ``(S^T W S + lam I) F = S^T W t`` with ``W = h I``."""
    h = S.h if h is None else h
    Sm = S.S
    F = np.asarray(F, dtype=float)
    lhs = h * (Sm.T @ (Sm @ F)) + lam_reg * F
    rhs = h * (Sm.T @ np.asarray(target, dtype=float))
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), ABS_FLOOR))


@dataclass
class LocalizedPotential:
    F: np.ndarray
    F_tilde: np.ndarray
    energy_inside: float
    energy_outside: float
    lam_reg: float
    target: np.ndarray

    @property
    def ratio(self) -> float:
        return self.energy_inside / self.energy_outside

    def to_dict(self) -> dict:
        return {
            "lambda_reg": self.lam_reg,
            "energy_inside": self.energy_inside,
            "energy_outside": self.energy_outside,
            "ratio": self.ratio,
            "norm_F": float(np.linalg.norm(self.F)),
        }


def localized_potential(S: SolutionOperator, mask, lam_reg: float, h: float | None = None) -> LocalizedPotential:
    """Exterior data concentrating the solution's energy on ``mask``.

    Solves the ridge problem ``min ||S F - t||^2_h + lam ||F||^2`` for the
    target ``t = chi_M / (h |M|)``, then divides by the square root of the
    remaining energy off ``M``: energy on ``M`` grows while energy off ``M``
    shrinks as ``lam -> 0``.
    """
    h = S.h if h is None else float(h)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (S.shape[0],):
        raise ArgumentError(f"mask must have {S.shape[0]} entries")
    if not mask.any() or mask.all():
        raise ArgumentError("mask must be a nonempty proper subset of the interior")
    if not lam_reg > 0:
        raise ArgumentError(f"lambda_reg must be positive, got {lam_reg}")
    target = mask / (h * mask.sum())
    F_t = _ridge(S, target, lam_reg, h)
    u_t = S.S @ F_t
    off = np.sqrt(h * np.sum(u_t[~mask] ** 2))
    if off == 0.0:
        raise ArgumentError("degenerate input: the approximate solution vanishes off the mask")
    F = F_t / np.sqrt(off)
    u = S.S @ F
    return LocalizedPotential(
        F=F,
        F_tilde=F_t,
        energy_inside=float(h * np.sum(u[mask] ** 2)),
        energy_outside=float(h * np.sum(u[~mask] ** 2)),
        lam_reg=lam_reg,
        target=target,
    )


@dataclass
class RungeResult:
    F: np.ndarray
    error: float
    target_norm: float
    lam_reg: float

    @property
    def relative_error(self) -> float:
        return self.error / max(self.target_norm, ABS_FLOOR)


def runge_approximate(S: SolutionOperator, target, lam_reg: float, h: float | None = None) -> RungeResult:
    """Ridge-regularised data whose interior solution approximates ``target``."""
    h = S.h if h is None else float(h)
    target = np.asarray(target, dtype=float)
    if target.shape != (S.shape[0],):
        raise ArgumentError(f"target must have {S.shape[0]} entries, got {target.shape}")
    if not lam_reg > 0:
        raise ArgumentError(f"lambda_reg must be positive, got {lam_reg}")
    F = _ridge(S, target, lam_reg, h)
    err = float(np.sqrt(h * np.sum((S.S @ F - target) ** 2)))
    return RungeResult(F, err, float(np.sqrt(h * np.sum(target**2))), lam_reg)


# -- file output ---------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def pixel_rows(pipe: Pipeline, pixels: PixelPartition):
    x = pipe.grid.x_interior
    for k, (a, b) in enumerate(pixels.ranges()):
        yield k, a, b, x[a], x[b]


def write_potential_csv(path, pipe: Pipeline, pixels: PixelPartition, result: PotentialResult, truth=None) -> Path:
    header = ["pixel", "node_lo", "node_hi", "x_lo", "x_hi", "alpha", "iterations", "clamp", "witness_lambda_min"]
    mins = None if truth is None else pixels.pixel_min(truth)
    if mins is not None:
        header.append("true_min")
    rows = []
    for k, a, b, xa, xb in pixel_rows(pipe, pixels):
        row = [k, a, b, xa, xb, result.alpha[k], result.iterations[k], result.clamp[k], result.witness[k]]
        if mins is not None:
            row.append(mins[k])
        rows.append(row)
    return write_rows(path, header, rows)


def write_shape_csv(path, pipe: Pipeline, pixels: PixelPartition, result: ShapeResult) -> Path:
    if result.mode == "closed":
        extra = ["lambda_min_upper", "lambda_min_lower"]
    else:
        extra = ["alpha_star", "lambda_min"]
    header = ["pixel", "node_lo", "node_hi", "x_lo", "x_hi", "inside"] + extra
    rows = [
        [k, a, b, xa, xb, result.inside[k]] + [result.witness[e][k] for e in extra]
        for k, a, b, xa, xb in pixel_rows(pipe, pixels)
    ]
    return write_rows(path, header, rows)


def write_profile_csv(path, x, values, name: str = "value") -> Path:
    return write_rows(path, ["x", name], zip(np.asarray(x), np.asarray(values)))


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
