import numpy as np
import pytest
from numpy.testing import assert_allclose

from grnm.subproblem import (
    InexactSolveError,
    SubproblemInstance,
    model_value,
    optimality_residual,
    residual_measurement_floor,
    shifted_inverse_bound_ratios,
    soft_threshold,
    solve,
    solve_secular,
    subgradient_witness,
)


def _frozen():
    return SubproblemInstance(
        g=np.array([1.0, 1.0]), H=np.diag([0.0, 1.0]), mu=1.0, p=3.0, rho=0.2
    )


def _random_instance(rng, n=None, rho_scale=0.2):
    n = n or int(rng.integers(1, 5))
    A = rng.standard_normal((n, n))
    H = A @ A.T
    g = rng.standard_normal(n)
    mu = float(10.0 ** rng.uniform(-1, 1))
    rho = float(rho_scale * np.abs(g).max())
    return SubproblemInstance(g=g, H=H, mu=mu, p=float(rng.choice([1.5, 2.0, 2.5, 3.0])), rho=rho)


class TestValidation:
    def test_rejects_asymmetric_hessian(self):
        with pytest.raises(ValueError, match="symmetric"):
            SubproblemInstance(g=np.ones(2), H=np.array([[1.0, 0.5], [0.0, 1.0]]), mu=1.0, p=3.0)

    def test_rejects_bad_power(self):
        for p in (1.0, 3.5, 0.0):
            with pytest.raises(ValueError):
                SubproblemInstance(g=np.ones(1), H=np.eye(1), mu=1.0, p=p)

    def test_rejects_nonpositive_mu_and_negative_rho(self):
        with pytest.raises(ValueError):
            SubproblemInstance(g=np.ones(1), H=np.eye(1), mu=0.0, p=2.0)
        with pytest.raises(ValueError):
            SubproblemInstance(g=np.ones(1), H=np.eye(1), mu=1.0, p=2.0, rho=-0.1)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            SubproblemInstance(g=np.ones(3), H=np.eye(2), mu=1.0, p=2.0)

    def test_indefinite_hessian_fails_the_psd_gate(self):
        inst = SubproblemInstance(g=np.ones(2), H=np.diag([1.0, -0.5]), mu=1.0, p=3.0)
        with pytest.raises(ValueError, match="positive semidefinite"):
            inst.spectrum()

    def test_zero_gradient_is_refused(self):
        inst = SubproblemInstance(g=np.zeros(2), H=np.eye(2), mu=1.0, p=3.0)
        with pytest.raises(ValueError, match="zero gradient"):
            solve(inst, 1e-10)


def test_soft_threshold_cases():
    x = np.array([3.0, -2.0, 0.5, -0.25, 0.0])
    out = soft_threshold(x, 1.0)
    assert_allclose(out, [2.0, -1.0, 0.0, 0.0, 0.0])
    assert_allclose(soft_threshold(x, 0.0), x)


def test_model_value_matches_manual_formula():
    rng = np.random.default_rng(5)
    inst = _random_instance(rng, n=3)
    d = rng.standard_normal(3)
    nd = np.linalg.norm(d)
    expected = (
        inst.g @ d
        + 0.5 * d @ inst.H @ d
        + inst.mu / inst.p * nd**inst.p
        + inst.rho * np.abs(d).sum()
    )
    assert_allclose(model_value(inst, d), expected, rtol=1e-14)


def test_residual_at_origin_uses_the_l1_slab():
    inst = SubproblemInstance(
        g=np.array([0.3, -1.0, 0.05]), H=np.eye(3), mu=1.0, p=2.0, rho=0.4
    )
    # coordinates inside [-rho, rho] contribute nothing at d = 0
    expected = np.sqrt(0.6**2)
    assert_allclose(optimality_residual(inst, np.zeros(3)), expected, rtol=1e-14)


def test_frozen_instance_value():
    """Pinned minimizer of a small l1 instance, checked against brute force
    once during development and kept as a regression anchor."""
    sol = solve(_frozen(), 1e-12)
    assert sol.residual <= 1e-12
    assert_allclose(sol.d, [-0.8483601545680693, -0.4117353369490399], atol=5e-12)
    assert_allclose(sol.objective_value, -0.643796597527035, rtol=1e-13)


def test_one_dimensional_elastic_closed_form():
    # h r + mu r^2 = |g| - rho with h = mu = 1 gives r = (-1 + sqrt(7))/2
    inst = SubproblemInstance(g=np.array([2.0]), H=np.eye(1), mu=1.0, p=3.0, rho=0.5)
    sol = solve(inst, 1e-13)
    # residual tolerance 1e-13 over local curvature ~2.65 bounds |d - d*|
    assert_allclose(sol.d[0], -(-1.0 + np.sqrt(7.0)) / 2.0, rtol=1e-13)


def test_one_dimensional_secular_closed_form():
    # curvature-free direction: 2 r^2 = 3
    inst = SubproblemInstance(g=np.array([3.0]), H=np.zeros((1, 1)), mu=2.0, p=3.0)
    sol = solve(inst, 1e-13)
    assert_allclose(sol.d[0], -np.sqrt(1.5), rtol=1e-14)


def test_p_two_secular_equals_direct_solve():
    H = np.array([[2.0, 0.3], [0.3, 1.0]])
    g = np.array([0.5, -1.2])
    inst = SubproblemInstance(g=g, H=H, mu=0.7, p=2.0)
    sol = solve(inst, 1e-13)
    assert_allclose(sol.d, -np.linalg.solve(H + 0.7 * np.eye(2), g), rtol=1e-13)


def test_secular_path_agrees_with_prox_kernel():
    """rho = 0 goes through the eigenbasis root; the proximal kernel must
    land on the same point when handed the same instance."""
    from grnm import kernels

    rng = np.random.default_rng(17)
    for _ in range(10):
        inst = _random_instance(rng, rho_scale=0.0)
        sol = solve(inst, 1e-11)
        d2, _, _ = kernels.accelerated_prox_min(
            inst.g, inst.H, inst.mu, inst.p, 0.0, np.zeros(inst.n), 200000, 1e-11
        )
        assert_allclose(sol.d, d2, atol=1e-8)


def test_residual_respects_a_tolerance_ladder():
    inst = _frozen()
    for tol in (1e-4, 1e-6, 1e-8, 1e-10, 1e-12):
        sol = solve(inst, tol)
        assert sol.residual <= tol


def test_tolerance_below_measurement_floor_is_accepted():
    # 1e-17 is not representable as a residual here; the solve still lands on
    # the minimizer to rounding, and that is all the residual can certify
    inst = _frozen()
    sol = solve(inst, 1e-17)
    assert sol.residual > 1e-17
    floor = residual_measurement_floor(inst, float(np.linalg.norm(sol.d)))
    assert sol.residual <= floor
    assert_allclose(sol.d, [-0.8483601545680693, -0.4117353369490399], atol=1e-9)


def test_inexact_error_carries_the_best_iterate():
    sol = solve(_frozen(), 1e-12)
    err = InexactSolveError("stalled", sol)
    assert err.solution is sol
    assert "stalled" in str(err)


def test_witness_is_a_valid_subgradient():
    rng = np.random.default_rng(23)
    for _ in range(8):
        inst = _random_instance(rng)
        sol = solve(inst, 1e-10)
        eta = subgradient_witness(inst, sol.d)
        assert np.all(np.abs(eta) <= 1.0 + 1e-12)
        on = sol.d != 0.0
        assert np.array_equal(eta[on], np.sign(sol.d[on]))
        nd = np.linalg.norm(sol.d)
        v = inst.g + inst.H @ sol.d + inst.mu * nd ** (inst.p - 2.0) * sol.d
        assert np.linalg.norm(v + inst.rho * eta) <= 1e-10 + 1e-12


def test_solve_secular_root_is_unique_and_bracketed():
    rng = np.random.default_rng(31)
    for _ in range(10):
        n = int(rng.integers(1, 6))
        lam = np.sort(rng.uniform(0.0, 4.0, n))
        ghat = rng.standard_normal(n)
        mu, p = 1.3, 2.5
        dhat, radius, _ = solve_secular(lam, ghat, mu, p)
        assert radius > 0.0
        # reconstructed stationarity in the eigenbasis
        shift = mu * radius ** (p - 2.0)
        assert_allclose((lam + shift) * dhat, -ghat, atol=1e-9 * max(1.0, np.abs(ghat).max()))
        assert_allclose(np.linalg.norm(dhat), radius, rtol=1e-10)


def test_shifted_inverse_ratios_are_bounds():
    rng = np.random.default_rng(41)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        A = rng.standard_normal((n, n))
        H = A @ A.T
        d = rng.standard_normal(n)
        r1, r2 = shifted_inverse_bound_ratios(H, 0.8, 2.5, d)
        assert 0.0 <= r1 <= 1.0 + 1e-12
        assert 0.0 <= r2 <= 1.0 + 1e-12


def test_shifted_inverse_ratios_reject_zero_step():
    with pytest.raises(ValueError):
        shifted_inverse_bound_ratios(np.eye(2), 1.0, 3.0, np.zeros(2))


def test_polish_recovers_from_a_noisy_start():
    from grnm.subproblem import _active_set_polish

    inst = _frozen()
    rng = np.random.default_rng(3)
    start = np.array([-0.8483601545680693, -0.4117353369490399]) + 1e-4 * rng.standard_normal(2)
    d, res = _active_set_polish(inst, start, 1e-13)
    assert res <= 1e-13
    assert_allclose(d, [-0.8483601545680693, -0.4117353369490399], atol=1e-10)
