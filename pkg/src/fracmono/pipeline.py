"""Grid + operator bundle shared by the verification and reconstruction code."""
from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np

from .discretize import FracOperator, Grid, GridSpec, assemble_operator, build_grid, validate_diagonal
from .dtn import DtnMatrix, dtn_matrix
from .forward import (
    ExteriorData,
    Solution,
    SolutionOperator,
    SystemMatrix,
    as_potential,
    assemble_system,
    solution_operator,
    solve_dirichlet,
)


class Pipeline:
    """Forward machinery for one grid.

    Keeps a small LRU cache of factorised systems keyed by the potential's
    bytes, so repeated DtN / solution-operator requests for the same ``q``
    reuse one Cholesky factor.
    """

    def __init__(self, grid: Grid, op: FracOperator | None = None, cache_size: int = 32):
        self.grid = grid
        self.op = assemble_operator(grid) if op is None else op
        self._cache: OrderedDict[bytes, SystemMatrix] = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    @classmethod
    def from_spec(cls, spec: GridSpec, check_diagonal: bool = True) -> "Pipeline":
        if check_diagonal:
            validate_diagonal(spec.order)
        return cls(build_grid(spec))

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def n_interior(self) -> int:
        return self.grid.interior.size

    def system(self, q) -> SystemMatrix:
        q = as_potential(q, self.grid)
        key = q.values.tobytes()
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        sys = assemble_system(self.op, q, self.grid)
        with self._lock:
            self._cache[key] = sys
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return sys

    def dtn(self, q, nodes=None) -> DtnMatrix:
        return dtn_matrix(self.system(q), nodes)

    def solution_operator(self, q, nodes=None) -> SolutionOperator:
        return solution_operator(self.system(q), nodes)

    def solve(self, q, F, f=None) -> Solution:
        """Solve with data ``F`` given per measured node (or as ``ExteriorData``)."""
        if not isinstance(F, ExteriorData):
            F = ExteriorData.on_measured(self.grid, F)
        return solve_dirichlet(self.system(q), F, f)

    def interior_solution(self, q, F) -> np.ndarray:
        """Interior values of the solution for data ``F`` on the measured nodes."""
        return self.solve(q, F).interior
