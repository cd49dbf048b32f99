"""Backend twins: compiled and numpy inner loops must land on the same point.

Bitwise trajectory equality is out of reach -- numpy reductions sum in a
different order than the C loops, so iterates drift by ulps and iteration
counts can differ -- but both must meet the tolerance and agree on the
minimizer far tighter than any downstream consumer can distinguish.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from grnm import _kernels_py, kernels


def _instances(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 5))
        p = float(rng.choice([1.5, 2.0, 2.5, 3.0]))
        A = rng.standard_normal((n, n))
        H = np.ascontiguousarray(A @ A.T)
        g = rng.standard_normal(n)
        mu = float(10.0 ** rng.uniform(-1.5, 1.5))
        rho = 0.0 if rng.random() < 0.5 else float(0.2 * np.abs(g).max())
        yield g, H, mu, p, rho


compiled = pytest.mark.skipif(
    kernels.backend() != "compiled", reason="compiled extension not built"
)


def test_backend_reports_a_known_name():
    assert kernels.backend() in ("compiled", "python")


@compiled
def test_accelerated_twins_agree():
    """Both implementations converge and agree on the minimizer."""
    from grnm import _kernels

    for g, H, mu, p, rho in _instances(40, seed=101):
        d0 = np.zeros(g.size)
        got = _kernels.accelerated_prox_min(g, H, mu, p, rho, d0, 5000, 1e-11)
        ref = _kernels_py.accelerated_prox_min(g, H, mu, p, rho, d0, 5000, 1e-11)
        assert got[2] <= 1e-11
        assert ref[2] <= 1e-11
        scale = 1.0 + np.linalg.norm(ref[0])
        assert np.abs(got[0] - ref[0]).max() <= 1e-9 * scale


@compiled
def test_plain_twins_agree():
    from grnm import _kernels

    for g, H, mu, p, rho in _instances(40, seed=202):
        d0 = np.zeros(g.size)
        got = _kernels.plain_prox_min(g, H, mu, p, rho, d0, 20000)
        ref = _kernels_py.plain_prox_min(g, H, mu, p, rho, d0, 20000)
        scale = 1.0 + np.linalg.norm(ref[0])
        assert np.abs(got[0] - ref[0]).max() <= 1e-12 * scale


def test_plain_reaches_exact_fixed_point():
    # fixed point of the prox map == stationarity, so the residual lands at
    # rounding level rather than at a value-comparison floor
    g = np.array([1.0, 1.0])
    H = np.diag([0.0, 1.0])
    d, it = kernels.plain_prox_min(g, H, 1.0, 3.0, 0.2, np.zeros(2), 10**6)
    assert it < 10**6
    nd = np.linalg.norm(d)
    v = g + H @ d + nd * d
    assert np.abs(v + 0.2 * np.sign(d)).max() < 1e-13


def test_accelerated_meets_tight_tolerance():
    g = np.array([1.0, 1.0])
    H = np.diag([0.0, 1.0])
    d, it, res = kernels.accelerated_prox_min(g, H, 1.0, 3.0, 0.2, np.zeros(2), 200000, 1e-12)
    assert res <= 1e-12
    assert_allclose(d, [-0.8483601545680693, -0.4117353369490399], atol=5e-12)


def test_accelerated_warm_start_returns_immediately():
    g = np.array([1.0, 1.0])
    H = np.diag([0.0, 1.0])
    d, _, _ = kernels.accelerated_prox_min(g, H, 1.0, 3.0, 0.2, np.zeros(2), 200000, 1e-12)
    d2, it2, res2 = kernels.accelerated_prox_min(g, H, 1.0, 3.0, 0.2, d, 200000, 1e-10)
    assert it2 == 0
    assert np.array_equal(d2, d)
    assert res2 <= 1e-10


def test_plain_and_accelerated_find_the_same_minimizer():
    for g, H, mu, p, rho in _instances(25, seed=303):
        da, _, _ = kernels.accelerated_prox_min(g, H, mu, p, rho, np.zeros(g.size), 100000, 1e-11)
        dp, _ = kernels.plain_prox_min(g, H, mu, p, rho, np.zeros(g.size), 10**6)
        assert_allclose(da, dp, atol=1e-7, rtol=1e-7)


def test_small_power_exponent_stays_finite():
    """p near 1 makes the ball bound stiff; the loop must not overflow."""
    rng = np.random.default_rng(7)
    A = rng.standard_normal((3, 3))
    H = A @ A.T
    g = rng.standard_normal(3)
    d, _, res = kernels.accelerated_prox_min(g, H, 5.0, 1.1, 0.1, np.zeros(3), 200000, 1e-9)
    assert np.all(np.isfinite(d))
    assert res <= 1e-9


def test_p_two_matches_linear_solve():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((4, 4))
    H = A @ A.T
    g = rng.standard_normal(4)
    mu = 0.6
    d, _, res = kernels.accelerated_prox_min(g, H, mu, 2.0, 0.0, np.zeros(4), 100000, 1e-12)
    assert_allclose(d, -np.linalg.solve(H + mu * np.eye(4), g), atol=1e-10)
