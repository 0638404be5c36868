"""Exterior-value Dirichlet problem ``(-Delta)^s u + q u = f`` in the domain.

With ``A = L + h*diag(q)`` (``q`` zero on exterior nodes) the discrete
problem reads ``A_II u_I = h f_I - A_IE F`` with ``u_E = F`` prescribed.
``A_II`` is factorised once per potential and reused for every right-hand
side.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .discretize import FracOperator, Grid
from .errors import ArgumentError, NumericalError


@dataclass(frozen=True)
class Potential:
    """Nonnegative nodal values of ``q`` on the interior nodes."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ArgumentError("potential must be a 1D array of interior values")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("potential has non-finite entries")
        if np.any(v < 0):
            raise ArgumentError(f"potential must be nonnegative, min is {v.min():.3g}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def strict_positive(self) -> bool:
        return bool(self.values.size and self.values.min() > 0)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_potential(q, grid: Grid) -> Potential:
    if not isinstance(q, Potential):
        arr = np.asarray(q, dtype=float)
        q = Potential(np.full(grid.interior.shape, float(arr)) if arr.ndim == 0 else arr)
    if len(q) != grid.interior.size:
        raise ArgumentError(f"potential has {len(q)} values, grid has {grid.interior.size} interior nodes")
    return q


@dataclass(frozen=True)
class ExteriorData:
    """Dirichlet data on the exterior nodes, zero outside ``support``.

    ``values`` is indexed like ``grid.exterior``; ``support`` is a boolean
    mask over the same positions.
    """

    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        sup = np.array(self.support, dtype=bool)
        if v.shape != sup.shape:
            raise ArgumentError("values and support must have the same shape")
        if np.any(v[~sup] != 0):
            raise ArgumentError("exterior data is nonzero outside its declared support")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", sup)

    @classmethod
    def on_measured(cls, grid: Grid, values) -> "ExteriorData":
        """Data supported in the measurement windows, given per measured node."""
        values = np.asarray(values, dtype=float)
        if values.shape != grid.measured.shape:
            raise ArgumentError(f"expected {grid.measured.size} measured-node values, got {values.shape}")
        pos = grid.measured_in_exterior()
        full = np.zeros(grid.exterior.size)
        full[pos] = values
        support = np.zeros(grid.exterior.size, dtype=bool)
        support[pos] = True
        return cls(full, support)

    @classmethod
    def full(cls, values) -> "ExteriorData":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool))


@dataclass(frozen=True)
class Solution:
    """Nodal values on every box node; ``u[grid.exterior]`` equals the data."""

    grid: Grid
    u: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        return self.u[self.grid.interior]


class SystemMatrix:
    """``A = L + h*diag(q~)`` with a Cholesky factorisation of ``A_II``.

    Instances are read-only after construction; concurrent solves only
    read the factor.
    """

    def __init__(self, grid: Grid, op: FracOperator, q: Potential):
        self.grid = grid
        self.op = op
        self.q = q
        h = grid.h
        I = grid.interior
        A = np.array(op.L, dtype=float)
        A[I, I] += h * q.values
        A.setflags(write=False)
        self.A = A
        try:
            self._factor = la.cho_factor(A[np.ix_(I, I)], lower=True, check_finite=True)
        except la.LinAlgError as exc:
            lam = float(np.linalg.eigvalsh(A[np.ix_(I, I)])[0])
            raise NumericalError(f"A_II is not positive definite (lambda_min ~ {lam:.3e})") from exc

    @property
    def h(self) -> float:
        return self.grid.h

    def block(self, rows, cols) -> np.ndarray:
        return self.A[np.ix_(rows, cols)]

    @cached_property
    def A_II(self) -> np.ndarray:
        I = self.grid.interior
        return self.A[np.ix_(I, I)]

    @cached_property
    def lambda_min(self) -> float:
        """Smallest eigenvalue of ``A_II`` (dense eigensolver)."""
        return float(np.linalg.eigvalsh(self.A_II)[0])

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        """``A_II^{-1} rhs`` for a vector or a block of columns."""
        return la.cho_solve(self._factor, rhs, check_finite=False)

    def half_solve(self, rhs: np.ndarray) -> np.ndarray:
        """``C^{-1} rhs`` with ``A_II = C C^T``."""
        c, lower = self._factor
        return la.solve_triangular(c, rhs, lower=lower, check_finite=False)


def assemble_system(op: FracOperator, q, grid: Grid) -> SystemMatrix:
    """Assemble and factorise the system matrix for potential ``q``.

    Raises ``NumericalError`` (with a ``lambda_min`` estimate) if ``A_II``
    fails to factorise; for ``q >= 0`` this does not happen because the
    lattice operator is coercive on interior functions.
    """
    if op.L.shape != (grid.n_nodes, grid.n_nodes):
        raise ArgumentError("operator and grid sizes disagree")
    return SystemMatrix(grid, op, as_potential(q, grid))


def solve_dirichlet(sys: SystemMatrix, F, f=None) -> Solution:
    """Solve ``(-Delta)^s u + q u = f`` in the domain with ``u = F`` outside.

    Parameters
    ----------
    sys : SystemMatrix
    F : ExteriorData or array
        Exterior values indexed like ``grid.exterior``.
    f : array, optional
        Source values on interior nodes (default zero).
    """
    grid = sys.grid
    I, E = grid.interior, grid.exterior
    FE = F.values if isinstance(F, ExteriorData) else np.asarray(F, dtype=float)
    if FE.shape != E.shape:
        raise ArgumentError(f"exterior data must have {E.size} entries, got {FE.shape}")
    rhs = -sys.block(I, E) @ FE
    if f is not None:
        f = np.asarray(f, dtype=float)
        if f.shape != I.shape:
            raise ArgumentError(f"source must have {I.size} entries, got {f.shape}")
        rhs = rhs + sys.h * f
    u = np.zeros(grid.n_nodes)
    u[E] = FE
    u[I] = sys.solve_interior(rhs)
    return Solution(grid, u)


def residual(sys: SystemMatrix, sol: Solution, f=None) -> float:
    """Norm of ``A_II u_I + A_IE u_E - h f`` relative to the terms' size."""
    grid = sol.grid
    I, E = grid.interior, grid.exterior
    a = sys.A_II @ sol.u[I]
    b = sys.block(I, E) @ sol.u[E]
    src = np.zeros(I.size) if f is None else sys.h * np.asarray(f, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(src), 1e-300)
    return float(np.linalg.norm(a + b - src) / scale)


@dataclass(frozen=True)
class SolutionOperator:
    """Matrix ``S`` mapping data on ``nodes`` to interior solution values.

    Column ``g`` holds the interior values of the solution with unit data on
    exterior node ``nodes[g]`` and zero elsewhere.
    """

    S: np.ndarray
    nodes: np.ndarray
    h: float

    def __array__(self, dtype=None, copy=None):
        return self.S if dtype is None else self.S.astype(dtype)

    @property
    def shape(self):
        return self.S.shape

    def apply(self, F) -> np.ndarray:
        return self.S @ np.asarray(F, dtype=float)


def solution_operator(sys: SystemMatrix, nodes=None) -> SolutionOperator:
    """``S = -A_II^{-1} A_I,nodes``; ``nodes`` defaults to the measured set."""
    grid = sys.grid
    nodes = grid.measured if nodes is None else np.asarray(nodes, dtype=int)
    if nodes.size == 0:
        raise ArgumentError("solution operator needs at least one exterior node")
    if np.intersect1d(nodes, grid.interior).size:
        raise ArgumentError("solution operator columns must be exterior nodes")
    S = -sys.solve_interior(sys.block(grid.interior, nodes))
    S.setflags(write=False)
    return SolutionOperator(S=S, nodes=nodes, h=grid.h)
