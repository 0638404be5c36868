"""Dirichlet-to-Neumann matrices, their derivative, and testing operators.

The DtN matrix on a node set ``N`` is the principal submatrix of the Schur
complement ``A_EE - A_EI A_II^{-1} A_IE``: data is zero on exterior nodes
outside ``N`` and those nodes are never measured.  The pairing between
data and Neumann values is the plain nodal dot product.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .forward import SolutionOperator, SystemMatrix


def potential_id(q) -> str:
    data = np.ascontiguousarray(np.asarray(q, dtype=float))
    return hashlib.sha256(data.tobytes()).hexdigest()[:12]


@dataclass(frozen=True)
class DtnMatrix:
    """Symmetric matrix on the measured nodes, tagged with its provenance."""

    matrix: np.ndarray
    tag: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArgumentError(f"DtN matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def shape(self):
        return self.matrix.shape

    def __sub__(self, other):
        return DtnMatrix(self.matrix - np.asarray(other), {"op": "difference"})

    def __add__(self, other):
        return DtnMatrix(self.matrix + np.asarray(other), {"op": "sum"})

    def __neg__(self):
        return DtnMatrix(-self.matrix, {"op": "negation"})

    def __rmul__(self, scalar):
        return DtnMatrix(float(scalar) * self.matrix, dict(self.tag))

    def asymmetry(self) -> float:
        """``||M - M^T||_F / ||M||_F`` (0 for the zero matrix)."""
        norm = np.linalg.norm(self.matrix)
        if norm == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix - self.matrix.T) / norm)

    def quadratic(self, F, G=None) -> float:
        F = np.asarray(F, dtype=float)
        G = F if G is None else np.asarray(G, dtype=float)
        return float(G @ self.matrix @ F)

    def to_csv(self, path) -> Path:
        return write_matrix_csv(self.matrix, path)


@dataclass(frozen=True)
class TestOperator(DtnMatrix):
    """``T_M``: the derivative of the DtN map in direction ``chi_M``."""

    __test__ = False  # keep pytest from collecting this class

    mask: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def write_matrix_csv(matrix, path) -> Path:
    """Row-major CSV with every entry written at full precision."""
    path = Path(path)
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")
    return path


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def dtn_matrix(sys: SystemMatrix, nodes=None) -> DtnMatrix:
    """Schur complement DtN matrix restricted to ``nodes`` (default: measured).

    Computed as ``A_NN - X^T X`` with ``X = C^{-1} A_IN`` and ``A_II = C C^T``,
    which keeps the result symmetric to rounding.
    """
    grid = sys.grid
    nodes = grid.measured if nodes is None else np.asarray(nodes, dtype=int)
    if np.intersect1d(nodes, grid.interior).size:
        raise ArgumentError("DtN nodes must be exterior nodes")
    X = sys.half_solve(sys.block(grid.interior, nodes))
    lam = sys.block(nodes, nodes) - X.T @ X
    return DtnMatrix(lam, {"potential": potential_id(sys.q.values), "grid": grid.id, "nodes": int(nodes.size)})


def _weights(S: SolutionOperator, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (S.shape[0],):
        raise ArgumentError(f"interior weight must have {S.shape[0]} entries, got {r.shape}")
    return r


def frechet_apply(S: SolutionOperator, r, h: float | None = None) -> DtnMatrix:
    """Derivative of the DtN map applied to ``r``: ``h * S^T diag(r) S``.

    ``h`` defaults to the spacing stored on ``S``.
    """
    h = S.h if h is None else float(h)
    r = _weights(S, r)
    Smat = S.S
    M = h * (Smat.T @ (r[:, None] * Smat))
    M = 0.5 * (M + M.T)
    return DtnMatrix(M, {"op": "frechet", "weight": potential_id(r)})


def testing_operator(S: SolutionOperator, mask, h: float | None = None) -> TestOperator:
    """``T_M`` for an interior node mask ``M`` (boolean, interior-indexed)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (S.shape[0],):
        raise ArgumentError(f"mask must have {S.shape[0]} entries, got {mask.shape}")
    D = frechet_apply(S, mask.astype(float), h)
    return TestOperator(D.matrix, {"op": "testing", "nodes": int(mask.sum())}, mask.copy())
