"""Objective oracles: derivatives, Taylor moduli, and construction metadata.

The derivative checks are the trust anchor for everything downstream: the
solver consumes gradients and Hessians as black boxes, so each family is
compared against central finite differences at random points before any
convergence claim is taken seriously.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from grnm.oracle import (
    check_derivatives,
    check_taylor_bound,
    make_logistic,
    make_logsumexp,
    make_quadratic,
)
from grnm.problems import generate_logistic, generate_logsumexp, generate_quadratic


def _sample_points(n, count, seed, radius=1.5):
    rng = np.random.default_rng(seed)
    return [radius * rng.standard_normal(n) for _ in range(count)]


def _oracles():
    A, b = generate_quadratic(4, rank=4, seed=1)
    yield make_quadratic(A, b)
    X, y = generate_logistic(15, 4, seed=2, scale=0.6)
    yield make_logistic(X, y)
    R, c = generate_logsumexp(8, 4, seed=3, scale=0.8)
    yield make_logsumexp(R, c)


def test_gradients_and_hessians_match_finite_differences():
    for oracle in _oracles():
        worst_g, worst_h = check_derivatives(oracle, _sample_points(oracle.n, 5, seed=11))
        assert worst_g < 1e-7, oracle.kind
        assert worst_h < 1e-6, oracle.kind


def test_taylor_ratios_stay_below_one():
    """The stated modulus really bounds the cubic remainders."""
    rng = np.random.default_rng(23)
    for oracle in _oracles():
        if oracle.metadata.taylor_bound == 0.0:
            continue
        pairs = [(rng.standard_normal(oracle.n), rng.standard_normal(oracle.n))
                 for _ in range(25)]
        report = check_taylor_bound(oracle, pairs)
        assert report.grad_ratio_max <= 1.0 + 1e-9, oracle.kind
        assert report.value_ratio_max <= 1.0 + 1e-9, oracle.kind


def test_quadratic_taylor_remainders_vanish():
    A, b = generate_quadratic(5, rank=5, seed=4)
    oracle = make_quadratic(A, b)
    assert oracle.metadata.taylor_bound == 0.0
    rng = np.random.default_rng(7)
    pairs = [(rng.standard_normal(5), rng.standard_normal(5)) for _ in range(10)]
    report = check_taylor_bound(oracle, pairs)
    assert report.grad_ratio_max is None and report.value_ratio_max is None
    assert report.grad_residual_max < 1e-13
    assert report.value_residual_max < 1e-12


def test_quadratic_metadata_is_exact():
    A, b = generate_quadratic(6, rank=6, seed=5)
    oracle = make_quadratic(A, b)
    meta = oracle.metadata
    assert np.linalg.norm(oracle.gradient(meta.x_star)) < 1e-12
    assert_allclose(oracle.value(meta.x_star), meta.f_star, rtol=1e-12)
    lam = np.linalg.eigvalsh(A)
    assert_allclose(meta.error_bound_coeff, 1.0 / lam[0], rtol=1e-10)
    # full rank => a sublevel radius is established and covers x_star
    assert meta.sublevel_radius is not None
    assert meta.sublevel_radius >= np.linalg.norm(meta.x_star)


def test_rank_deficient_quadratic_has_no_radius():
    A, b = generate_quadratic(6, rank=3, seed=6)
    oracle = make_quadratic(A, b)
    assert oracle.metadata.sublevel_radius is None
    # moving along the null space keeps the distance at zero
    lam, basis = np.linalg.eigh(A)
    null_dir = basis[:, 0]
    x = oracle.metadata.x_star + 5.0 * null_dir
    assert oracle.distance_to_solutions(x) < 1e-9


def test_quadratic_rejects_linear_term_outside_range():
    A = np.diag([1.0, 0.0])
    with pytest.raises(ValueError, match="outside the range"):
        make_quadratic(A, np.array([1.0, 0.5]))


def test_quadratic_rejects_asymmetric_and_indefinite():
    with pytest.raises(ValueError, match="symmetric"):
        make_quadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(ValueError, match="positive semidefinite"):
        make_quadratic(np.diag([1.0, -0.5]), np.array([1.0, 0.0]))


def test_logistic_rejects_bad_labels():
    X = np.ones((3, 2))
    with pytest.raises(ValueError, match="labels must be -1 or \\+1"):
        make_logistic(X, np.array([1.0, 0.0, -1.0]))


def test_logsumexp_rejects_single_piece():
    with pytest.raises(ValueError, match="at least two affine pieces"):
        make_logsumexp(np.array([[1.0, 2.0]]), np.array([0.0]))


def test_presolved_minimum_agrees_with_gradient_descent():
    """Cross-check f_star by an independent (slow) first-order method."""
    X, y = generate_logistic(20, 3, seed=8, scale=0.5)
    oracle = make_logistic(X, y)
    x = np.zeros(3)
    # descent with the conservative 1/L_quad step; enough iterations to get
    # well below the comparison tolerance
    L = float(np.linalg.eigvalsh(oracle.hessian(x))[-1]) + 1e-9
    for _ in range(20000):
        x = x - (1.0 / L) * oracle.gradient(x)
    assert oracle.value(x) >= oracle.metadata.f_star - 1e-12
    assert oracle.value(x) - oracle.metadata.f_star < 1e-9


def test_logistic_metadata_radius_traps_start_sublevel():
    # the trapping argument only lands for well-conditioned data; this draw does
    X, y = generate_logistic(25, 3, seed=12, scale=0.4)
    oracle = make_logistic(X, y)
    meta = oracle.metadata
    assert meta.sublevel_radius is not None
    assert meta.sublevel_radius > np.linalg.norm(meta.x_star)
    assert meta.start_value == oracle.value(np.zeros(3))


def test_logsumexp_minimum_is_stationary():
    R, c = generate_logsumexp(10, 3, seed=10, scale=0.7)
    oracle = make_logsumexp(R, c)
    assert np.linalg.norm(oracle.gradient(oracle.metadata.x_star)) < 1e-10
