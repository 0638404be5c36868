"""Monotonicity-based inversion for the 1D fractional Schrodinger equation."""
from .discretize import (
    FracOperator,
    Grid,
    GridSpec,
    assemble_operator,
    build_grid,
    default_spec,
    diagonal_weight,
    kernel_weight,
    leakage,
    truncated_diagonal,
    validate_diagonal,
)
from .dtn import DtnMatrix, TestOperator, dtn_matrix, frechet_apply, read_matrix_csv, testing_operator
from .errors import ArgumentError, ConfigError, FracMonoError, NumericalError, ResourceError
from .forward import ExteriorData, Potential, Solution, SolutionOperator, SystemMatrix, solution_operator, solve_dirichlet
from .order import (
    DoublingReport,
    InequalityReport,
    LoewnerVerdict,
    linearized_leq,
    loewner_leq,
    verify_doubling,
    verify_monotonicity,
    verify_sandwich,
)
from .pipeline import Pipeline
from .reconstruct import (
    PixelPartition,
    PotentialResult,
    ShapeResult,
    contrast_cap,
    definite_lower_bound,
    inner_support_definite,
    localized_potential,
    norm_cap,
    pixel_sup_reconstruct,
    runge_approximate,
    support_from_closed_sets,
)

__version__ = "0.1.0"
