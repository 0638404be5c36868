import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracmono import ArgumentError, ExteriorData, NumericalError, Pipeline, Potential, build_grid
from fracmono.discretize import FracOperator, assemble_operator
from fracmono.forward import SystemMatrix, assemble_system, residual, solution_operator, solve_dirichlet
from oracles import dense_solve, oracle_operator


@pytest.fixture(scope="module")
def tiny_pipe(tiny_spec):
    return Pipeline.from_spec(tiny_spec)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_small_grid_matches_dense_inverse(s, tiny_spec, rng):
    grid = build_grid(tiny_spec)
    pipe = Pipeline(grid, assemble_operator(grid, s=s))
    q = rng.uniform(0.0, 3.0, grid.interior.size)
    FE = rng.standard_normal(grid.exterior.size)
    A = oracle_operator(s, grid.h, grid.n_nodes)
    A[grid.interior, grid.interior] += grid.h * q
    expected = dense_solve(A, grid.interior, grid.exterior, FE)
    sol = solve_dirichlet(pipe.system(q), ExteriorData.full(FE))
    np.testing.assert_allclose(sol.interior, expected, rtol=1e-10, atol=1e-10 * np.abs(expected).max())
    np.testing.assert_array_equal(sol.u[grid.exterior], FE)


def test_residual_small(default_pipe, rng):
    q = rng.uniform(0.5, 3.0, default_pipe.n_interior)
    f = rng.standard_normal(default_pipe.n_interior)
    F = rng.standard_normal(default_pipe.grid.measured.size)
    sys_ = default_pipe.system(q)
    sol = default_pipe.solve(q, F, f)
    assert residual(sys_, sol, f) < 1e-12


def test_zero_potential_is_coercive(default_pipe):
    sys_ = default_pipe.system(0.0)
    assert sys_.lambda_min > 0
    assert not sys_.q.strict_positive


def test_linear_in_data(default_pipe, rng):
    q = np.full(default_pipe.n_interior, 1.3)
    F, G = rng.standard_normal((2, default_pipe.grid.measured.size))
    u = default_pipe.interior_solution
    np.testing.assert_allclose(u(q, 2 * F - G), 2 * u(q, F) - u(q, G), atol=1e-12)


def test_solution_operator_columns(default_pipe, rng):
    q = rng.uniform(0.5, 3.0, default_pipe.n_interior)
    S = default_pipe.solution_operator(q)
    F = rng.standard_normal(default_pipe.grid.measured.size)
    np.testing.assert_allclose(S.apply(F), default_pipe.interior_solution(q, F), atol=1e-12)


def test_maximum_principle_for_nonnegative_data(default_pipe):
    # the off-diagonal couplings are all negative, so positive data gives positive solutions
    u = default_pipe.interior_solution(2.0, np.ones(default_pipe.grid.measured.size))
    assert np.all(u > 0)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 9, elements=st.floats(0.0, 10.0)))
def test_energy_identity(tiny_pipe, q):
    # u^T A u over the box equals the data pairing F . (A u)_E when A_II u_I + A_IE F = 0
    grid = tiny_pipe.grid
    F = np.linspace(-1.0, 1.0, grid.measured.size)
    sol = tiny_pipe.solve(q, F)
    A = tiny_pipe.system(q).A
    Au = A @ sol.u
    assert np.allclose(Au[grid.interior], 0, atol=1e-12)
    assert sol.u @ Au == pytest.approx(sol.u[grid.exterior] @ Au[grid.exterior], rel=1e-10)


@pytest.mark.parametrize(
    "values, msg",
    [(np.array([1.0, -0.1]), "nonnegative"), (np.array([1.0, np.nan]), "non-finite"), (np.ones((2, 2)), "1D")],
)
def test_potential_validation(values, msg):
    with pytest.raises(ArgumentError, match=msg):
        Potential(values)


def test_potential_length_checked(default_pipe):
    with pytest.raises(ArgumentError, match="interior nodes"):
        default_pipe.system(np.ones(5))


def test_exterior_data_support():
    with pytest.raises(ArgumentError, match="outside"):
        ExteriorData(np.array([1.0, 2.0]), np.array([True, False]))
    data = ExteriorData.full(np.array([1.0, 2.0]))
    assert data.support.all()


def test_measured_data_shape(default_pipe):
    with pytest.raises(ArgumentError, match="measured-node"):
        ExteriorData.on_measured(default_pipe.grid, np.ones(3))


def test_source_shape(default_pipe):
    sys_ = default_pipe.system(1.0)
    F = np.zeros(default_pipe.grid.exterior.size)
    with pytest.raises(ArgumentError, match="source"):
        solve_dirichlet(sys_, F, np.ones(3))
    with pytest.raises(ArgumentError, match="exterior data"):
        solve_dirichlet(sys_, np.ones(4))


def test_solution_operator_rejects_interior_columns(default_pipe):
    sys_ = default_pipe.system(1.0)
    with pytest.raises(ArgumentError):
        solution_operator(sys_, default_pipe.grid.interior[:2])
    with pytest.raises(ArgumentError):
        solution_operator(sys_, np.array([], dtype=int))


def test_factorisation_failure_reports_lambda_min(default_pipe):
    grid = default_pipe.grid
    bad = FracOperator(-np.eye(grid.n_nodes), 0.5, grid.h)
    with pytest.raises(NumericalError, match="lambda_min"):
        SystemMatrix(grid, bad, Potential(np.zeros(grid.interior.size)))


def test_operator_size_checked(default_pipe, tiny_spec):
    small = assemble_operator(build_grid(tiny_spec))
    with pytest.raises(ArgumentError, match="sizes"):
        assemble_system(small, 1.0, default_pipe.grid)


def test_cache_reuses_factorisation(default_pipe):
    q = np.full(default_pipe.n_interior, 0.77)
    assert default_pipe.system(q) is default_pipe.system(q.copy())
