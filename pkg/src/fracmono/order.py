"""Loewner-order tests and checks of the monotonicity inequalities.

All interior integrals use the weight ``h`` per node, the same weight as
the ``h*diag(q)`` term of the system matrix, so the inequalities hold
exactly in the discrete setting up to rounding.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dtn import frechet_apply
from .errors import ArgumentError
from .pipeline import Pipeline

ABS_FLOOR = 1e-14


@dataclass(frozen=True)
class LoewnerVerdict:
    """Outcome of ``A <= B``: ``passed`` iff ``lambda_min(B - A) >= -tolerance``."""

    passed: bool
    lambda_min: float
    tolerance: float
    ids: tuple = ()

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "lambda_min": self.lambda_min,
            "tolerance": self.tolerance,
            "matrix_ids": list(self.ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_sym(M, name: str, sym_tol: float = 1e-8) -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ArgumentError(f"{name} must be a square matrix, got shape {arr.shape}")
    norm = np.linalg.norm(arr)
    if norm > 0 and np.linalg.norm(arr - arr.T) > sym_tol * norm:
        raise ArgumentError(f"{name} is not symmetric to {sym_tol:g} relative")
    return arr


def _tag_id(M) -> str:
    tag = getattr(M, "tag", None) or {}
    return str(tag.get("potential", tag.get("op", "")))


def lambda_min(M) -> float:
    """Smallest eigenvalue from a full symmetric eigendecomposition."""
    return float(np.linalg.eigvalsh(np.asarray(M, dtype=float))[0])


def loewner_leq(A, B, tol_rel: float = 1e-9, floor: float = ABS_FLOOR) -> LoewnerVerdict:
    """Test ``A <= B`` in the Loewner order.

    The tolerance is ``tol_rel * max(||A||_F, ||B||_F, floor)``.

    Raises
    ------
    ArgumentError
        On shape mismatch or inputs that are not symmetric to 1e-8.
    """
    a = _as_sym(A, "A")
    b = _as_sym(B, "B")
    if a.shape != b.shape:
        raise ArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    tol = tol_rel * scale
    lam = lambda_min(b - a)
    return LoewnerVerdict(bool(lam >= -tol), lam, tol, (_tag_id(A), _tag_id(B)))


@dataclass(frozen=True)
class InequalityReport:
    """Signed slacks of the four monotonicity inequalities for one ``F``.

    Every slack is ``>= 0`` in exact arithmetic: the first two bound
    ``<(L1-L0)F,F>`` by the energies of ``u0`` and ``u1`` weighted by
    ``q1-q0``; the last two use the weights ``(q0/q1)(q1-q0)`` and
    ``(q1/q0)(q1-q0)``.
    """

    lhs: float
    bounds: tuple[float, float, float, float]
    slacks: tuple[float, float, float, float]
    scale: float

    def passed(self, tol_rel: float = 1e-8) -> bool:
        return min(self.slacks) >= -tol_rel * self.scale

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DoublingReport:
    """Ratio ``||u0||_D / ||u1||_D`` against the bound ``C``."""

    ratio: float | None
    bound: float
    bound_q0: float
    bound_q1: float
    coercivity_q0: float
    coercivity_q1: float
    support_size: int
    degenerate: bool = False
    notes: list = field(default_factory=list)

    @property
    def within(self) -> bool:
        if self.degenerate:
            return False
        # ||u1|| <= C1 ||u0|| and ||u0|| <= C0 ||u1||
        eps = 1e-12
        return 1.0 / self.bound_q1 - eps <= self.ratio <= self.bound_q0 + eps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["within"] = self.within
        return d


def verify_monotonicity(pipe: Pipeline, q0, q1, F) -> InequalityReport:
    """Evaluate the four monotonicity inequalities for data ``F``.

    Parameters
    ----------
    pipe : Pipeline
    q0, q1 : array
        Strictly positive interior potentials.
    F : array
        Exterior data on the measured nodes.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.any(q0 <= 0):
        raise ArgumentError("q0 has non-positive entries: inequality 4 divides by q0 and cannot be evaluated")
    if np.any(q1 <= 0):
        raise ArgumentError("q1 has non-positive entries: inequality 3 divides by q1 and cannot be evaluated")
    F = np.asarray(F, dtype=float)
    h = pipe.h
    lam0 = pipe.dtn(q0)
    lam1 = pipe.dtn(q1)
    # plain difference is bit-exact zero when q0 == q1
    lhs = float(F @ (lam1.matrix - lam0.matrix) @ F)
    u0 = pipe.interior_solution(q0, F)
    u1 = pipe.interior_solution(q1, F)
    dq = q1 - q0
    b1 = h * np.sum(dq * u0**2)
    b2 = h * np.sum(dq * u1**2)
    b3 = h * np.sum((q0 / q1) * dq * u0**2)
    b4 = h * np.sum((q1 / q0) * dq * u1**2)
    slacks = (b1 - lhs, lhs - b2, lhs - b3, b4 - lhs)
    scale = float(F @ F) * max(np.linalg.norm(lam0.matrix), np.linalg.norm(lam1.matrix), ABS_FLOOR)
    return InequalityReport(lhs, (b1, b2, b3, b4), tuple(float(v) for v in slacks), scale)


def coercivity(pipe: Pipeline, q) -> float:
    """Discrete coercivity ``lambda_min(A_II) / h`` relative to the weighted L2 norm."""
    return pipe.system(q).lambda_min / pipe.h


def verify_doubling(pipe: Pipeline, q0, q1, F) -> DoublingReport:
    """Compare ``||u0||`` and ``||u1||`` on ``D = {q0 != q1}``.

    The bound follows the energy argument with ``C_j = 1 + ||q0-q1||_inf / alpha_j``,
    where ``alpha_j`` is the discrete coercivity of the ``q_j`` form.  The
    ratio must lie in ``[1/C_1, C_0]``; ``bound`` reports ``max(C_0, C_1)``.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    D = q0 != q1
    if not D.any():
        raise ArgumentError("q0 and q1 coincide: the set D is empty")
    a0 = coercivity(pipe, q0)
    a1 = coercivity(pipe, q1)
    dmax = float(np.max(np.abs(q0 - q1)))
    C0 = 1.0 + dmax / a0
    C1 = 1.0 + dmax / a1
    u0 = pipe.interior_solution(q0, F)
    u1 = pipe.interior_solution(q1, F)
    n0 = float(np.linalg.norm(u0[D]))
    n1 = float(np.linalg.norm(u1[D]))
    if n1 == 0.0:
        return DoublingReport(None, max(C0, C1), C0, C1, a0, a1, int(D.sum()), degenerate=True,
                              notes=["u1 vanishes on D (zero data)"])
    notes = ["alpha is the discrete surrogate lambda_min(A_II)/h, not the continuum constant"]
    return DoublingReport(n0 / n1, max(C0, C1), C0, C1, a0, a1, int(D.sum()), notes=notes)


def verify_sandwich(pipe: Pipeline, q0, q1, tol_rel: float = 1e-9) -> tuple[LoewnerVerdict, LoewnerVerdict]:
    """Bracket ``L1 - L0`` between two derivatives at ``q0``.

    Returns the verdicts for ``L1 - L0 <= L'(q0)(q1 - q0)`` and
    ``L'(q0)((q0/q1)(q1 - q0)) <= L1 - L0``.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.any(q1 <= 0):
        raise ArgumentError("q1 has non-positive entries: the lower bracket divides by q1")
    S0 = pipe.solution_operator(q0)
    delta = pipe.dtn(q1).matrix - pipe.dtn(q0).matrix
    upper = frechet_apply(S0, q1 - q0)
    lower = frechet_apply(S0, (q0 / q1) * (q1 - q0))
    return loewner_leq(delta, upper, tol_rel), loewner_leq(lower, delta, tol_rel)


def linearized_leq(S, r0, r1, tol_rel: float = 1e-9) -> LoewnerVerdict:
    """``L'(q) r0 <= L'(q) r1``, tested through ``0 <= L'(q)(r1 - r0)``."""
    diff = frechet_apply(S, np.asarray(r1, dtype=float) - np.asarray(r0, dtype=float)).matrix
    return loewner_leq(np.zeros_like(diff), diff, tol_rel)
