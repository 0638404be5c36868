import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracmono import ArgumentError
from fracmono.reconstruct import (
    PixelPartition,
    contrast_cap,
    definite_lower_bound,
    inner_support_definite,
    localized_potential,
    norm_cap,
    normal_residual,
    pixel_sup_reconstruct,
    runge_approximate,
    support_from_closed_sets,
    write_potential_csv,
    write_shape_csv,
)

N = 39


@pytest.fixture(scope="module")
def pixels8():
    return PixelPartition.uniform(N, 8)


@pytest.fixture(scope="module")
def S1(default_pipe):
    return default_pipe.solution_operator(np.ones(N))


def delta_for(pipe, q0, q1):
    return pipe.dtn(q1).matrix - pipe.dtn(q0).matrix


# -- partitions -----------------------------------------------------------------------


@given(st.integers(1, 60), st.data())
def test_uniform_partition_covers(n, data):
    k = data.draw(st.integers(1, n))
    P = PixelPartition.uniform(n, k)
    sizes = [p.size for p in P]
    assert sum(sizes) == n and max(sizes) - min(sizes) <= 1
    assert np.array_equal(np.concatenate(P.pixels), np.arange(n))
    assert np.array_equal(P.expand(np.arange(k, dtype=float))[P.pixels[-1]], np.full(sizes[-1], k - 1.0))


@pytest.mark.parametrize(
    "pix, msg",
    [
        ([[0, 1], [1, 2]], "disjoint"),
        ([[0], [2]], "cover"),
        ([[0, 2], [1]], "contiguous"),
        ([[0, 1, 2], []], "empty"),
        ([[0, 1, 2, 3]], "leaves"),
    ],
)
def test_partition_validation(pix, msg):
    with pytest.raises(ArgumentError, match=msg):
        PixelPartition(tuple(pix), 3)


def test_uniform_bounds():
    with pytest.raises(ArgumentError):
        PixelPartition.uniform(5, 6)


def test_ranges_and_masks(pixels8):
    assert pixels8.ranges()[0] == (0, 4)
    assert pixels8.ranges()[-1] == (35, 38)
    assert pixels8.mask([0, 7]).sum() == 9


# -- pixel-sup reconstruction ----------------------------------------------------------


def test_constant_potential_single_pixel(default_pipe):
    P = PixelPartition.uniform(N, 1)
    res = pixel_sup_reconstruct(default_pipe, default_pipe.dtn(2.0).matrix, P)
    assert abs(res.alpha[0] - 2.0) <= 0.2
    assert res.alpha_range == (0.0, 8.0) and res.notes


def test_clamp_at_upper_end(default_pipe, pixels8):
    lam = default_pipe.dtn(8.0 * pixels8.mask(3)).matrix
    res = pixel_sup_reconstruct(default_pipe, lam, pixels8, alpha_hi=8.0)
    assert res.alpha[3] == 8.0 and res.clamp[3] == "upper" and res.iterations[3] == 0


def test_clamp_at_lower_end(default_pipe, pixels8):
    lam = default_pipe.dtn(np.zeros(N)).matrix
    res = pixel_sup_reconstruct(default_pipe, lam, pixels8, alpha_lo=0.5, alpha_hi=4.0)
    assert all(c == "lower" for c in res.clamp)
    assert np.all(res.alpha == 0.5)


def test_three_pixel_values(default_pipe):
    P = PixelPartition.uniform(N, 3)
    truth = np.array([1.0, 3.0, 2.0])
    res = pixel_sup_reconstruct(default_pipe, default_pipe.dtn(P.expand(truth)).matrix, P)
    np.testing.assert_allclose(res.alpha, truth, rtol=0.1)
    assert np.all(res.iterations <= 60)
    assert np.all((res.alpha >= 0) & (res.alpha <= 8))


def test_bisect_tolerance_controls_iterations(default_pipe):
    P = PixelPartition.uniform(N, 3)
    lam = default_pipe.dtn(P.expand([1.0, 3.0, 2.0])).matrix
    coarse = pixel_sup_reconstruct(default_pipe, lam, P, bisect_tol=0.5)
    fine = pixel_sup_reconstruct(default_pipe, lam, P, bisect_tol=1e-6)
    assert np.all(coarse.iterations == 4) and np.all(fine.iterations == 23)


def test_threads_bit_identical(default_pipe, pixels8, rng):
    lam = default_pipe.dtn(pixels8.expand(rng.uniform(1, 3, 8))).matrix
    a = pixel_sup_reconstruct(default_pipe, lam, pixels8, threads=1)
    b = pixel_sup_reconstruct(default_pipe, lam, pixels8, threads=4)
    assert a.alpha.tobytes() == b.alpha.tobytes()


@pytest.mark.parametrize(
    "kw, msg",
    [(dict(alpha_lo=3.0, alpha_hi=1.0), "alpha_lo"), (dict(alpha_lo=-1.0), "alpha_lo")],
)
def test_bad_alpha_range(default_pipe, pixels8, kw, msg):
    with pytest.raises(ArgumentError, match=msg):
        pixel_sup_reconstruct(default_pipe, default_pipe.dtn(1.0).matrix, pixels8, **kw)


def test_grid_mismatch(default_pipe, pipe41, pixels8):
    with pytest.raises(ArgumentError, match="measures"):
        pixel_sup_reconstruct(default_pipe, np.eye(5), pixels8)
    with pytest.raises(ArgumentError, match="different grid"):
        pixel_sup_reconstruct(pipe41, pipe41.dtn(1.0).matrix, pixels8)


def test_potential_csv(default_pipe, tmp_path):
    P = PixelPartition.uniform(N, 3)
    q = P.expand([1.0, 3.0, 2.0])
    res = pixel_sup_reconstruct(default_pipe, default_pipe.dtn(q).matrix, P)
    path = write_potential_csv(tmp_path / "p.csv", default_pipe, P, res, q)
    rows = list(csv.DictReader(open(path)))
    assert [int(r["pixel"]) for r in rows] == [0, 1, 2]
    assert float(rows[1]["alpha"]) == res.alpha[1] and float(rows[1]["true_min"]) == 3.0


# -- closed-set test ---------------------------------------------------------------------


def test_no_change_no_support(default_pipe, S1, pixels8):
    res = support_from_closed_sets(np.zeros((12, 12)), S1, pixels8, 1.0)
    assert res.support == []


@pytest.mark.parametrize("D", [[1], [1, 6], [0, 7], [6]])
def test_plus_inclusion(default_pipe, S1, pixels8, D):
    q0 = np.ones(N)
    q1 = q0 + 2 * pixels8.mask(D)
    res = support_from_closed_sets(delta_for(default_pipe, q0, q1), S1, pixels8, contrast_cap(q0, 1.0, 3.0))
    assert res.support == D


@pytest.mark.parametrize("D", [[1], [1, 6]])
def test_minus_inclusion(default_pipe, pixels8, D):
    q0 = np.full(N, 3.0)
    q1 = q0 - 2 * pixels8.mask(D)
    S0 = default_pipe.solution_operator(q0)
    res = support_from_closed_sets(delta_for(default_pipe, q0, q1), S0, pixels8, contrast_cap(q0, 1.0, 3.0))
    assert res.support == D


def test_witnesses_consistent(default_pipe, S1, pixels8):
    q1 = np.ones(N) + 2 * pixels8.mask(1)
    res = support_from_closed_sets(delta_for(default_pipe, np.ones(N), q1), S1, pixels8, 2.0)
    w = res.witness
    outside = (w["lambda_min_upper"] >= -w["tolerance"]) & (w["lambda_min_lower"] >= -w["tolerance"])
    assert np.array_equal(outside, ~res.inside)


def test_cap_rules(default_pipe, S1, pixels8):
    assert contrast_cap(np.ones(N), 1.0, 3.0) == 2.0
    assert contrast_cap(np.full(N, 3.0), 1.0, 3.0) == 6.0
    with pytest.raises(ArgumentError):
        contrast_cap(np.ones(N), 0.0, 3.0)
    delta = delta_for(default_pipe, np.ones(N), np.ones(N) + pixels8.mask(2))
    # the norm rule divides by a rounding-level eigenvalue
    assert norm_cap(delta, S1) > 1e6
    with pytest.raises(ArgumentError, match="positive"):
        support_from_closed_sets(delta, S1, pixels8, 0.0)


# -- definite test -----------------------------------------------------------------------


def test_definite_inclusion(default_pipe, S1, pixels8):
    q1 = np.ones(N) + pixels8.mask(2)
    res = inner_support_definite(delta_for(default_pipe, np.ones(N), q1), 1, S1, pixels8)
    alpha = res.witness["alpha_star"]
    assert res.support == [2]
    assert alpha[2] >= 0.8 * definite_lower_bound(1.0, 1.0)
    assert np.all(np.delete(alpha, 2) < 1e-2)


def test_definite_negative_sign(default_pipe, pixels8):
    q0 = np.full(N, 2.0)
    q1 = q0 - pixels8.mask(5)
    S0 = default_pipe.solution_operator(q0)
    res = inner_support_definite(delta_for(default_pipe, q0, q1), -1, S0, pixels8)
    assert res.support == [5]


def test_definite_no_change(S1, pixels8):
    res = inner_support_definite(np.zeros((12, 12)), 1, S1, pixels8)
    assert res.support == [] and np.all(res.witness["alpha_star"] < 1e-9)


def test_definite_sign_checked(S1, pixels8):
    with pytest.raises(ArgumentError, match="sign"):
        inner_support_definite(np.zeros((12, 12)), 0, S1, pixels8)


def test_definite_lower_bound_formula():
    assert definite_lower_bound(1.0, 1.0) == 0.5
    assert definite_lower_bound(2.0, 2.0) == 1.0


def test_shape_csv(default_pipe, S1, pixels8, tmp_path):
    q1 = np.ones(N) + pixels8.mask(2)
    res = inner_support_definite(delta_for(default_pipe, np.ones(N), q1), 1, S1, pixels8)
    rows = list(csv.DictReader(open(write_shape_csv(tmp_path / "s.csv", default_pipe, pixels8, res))))
    assert [r["inside"] for r in rows].count("true") == 1


# -- localized potentials and Runge approximation ----------------------------------------


def test_localized_ratio_grows(S1, pixels8):
    mask = pixels8.mask([4, 5, 6, 7])
    ratios = [localized_potential(S1, mask, lam).ratio for lam in (1e-1, 1e-3, 1e-5)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[2] > 10


def test_localized_normal_equations(S1, pixels8):
    lp = localized_potential(S1, pixels8.mask([4, 5, 6, 7]), 1e-3)
    assert normal_residual(S1, lp.F_tilde, lp.target, 1e-3) <= 1e-10
    # rescaled energy off the mask equals the square root of the unscaled one
    u_t = S1.apply(lp.F_tilde)
    off = np.sqrt(S1.h * np.sum(u_t[~pixels8.mask([4, 5, 6, 7])] ** 2))
    assert lp.energy_outside == pytest.approx(off, rel=1e-10)


@pytest.mark.parametrize("mask", [np.zeros(N, dtype=bool), np.ones(N, dtype=bool)])
def test_localized_rejects_trivial_masks(S1, mask):
    with pytest.raises(ArgumentError, match="proper subset"):
        localized_potential(S1, mask, 1e-3)


def test_localized_rejects_bad_regularisation(S1, pixels8):
    with pytest.raises(ArgumentError, match="lambda_reg"):
        localized_potential(S1, pixels8.mask(0), 0.0)


def test_runge_in_range_target_constant_data(S1):
    f = S1.apply(np.ones(12))
    assert runge_approximate(S1, f, 1e-6).error <= 1e-3 * np.sqrt(S1.h * f @ f)


def test_runge_in_range_target_converges(S1, rng):
    # generic data has components along singular values ~1e-8, so the
    # error only becomes small once lambda_reg passes below their squares
    f = S1.apply(rng.standard_normal(12))
    errs = [runge_approximate(S1, f, lam).relative_error for lam in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert np.all(np.diff(errs) < 0)
    assert errs[-1] <= 1e-3


@pytest.mark.parametrize("target", ["smooth", "pixel"])
def test_runge_error_nonincreasing(S1, pixels8, target):
    x = np.linspace(-1, 1, N + 2)[1:-1]
    f = np.cos(np.pi * x / 2) if target == "smooth" else pixels8.mask(3).astype(float)
    errs = [runge_approximate(S1, f, lam).error for lam in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert np.all(np.diff(errs) <= 1e-12)


def test_runge_shape_checked(S1):
    with pytest.raises(ArgumentError, match="entries"):
        runge_approximate(S1, np.ones(3), 1e-3)
