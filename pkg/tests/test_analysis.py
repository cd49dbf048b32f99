"""Certificate machinery: envelope re-checks, local-order estimates, step ratios.

Synthetic sequences exercise each named inequality in isolation; small real
runs confirm the certifier accepts what the solver actually produces.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from grnm.analysis import (
    check_rate_certificate,
    check_step_distance_ratios,
    certify_run,
    estimate_local_order,
    estimate_order_from_errors,
    slow_step_indices,
)
from grnm.oracle import ObjectiveOracle, ProblemMetadata, make_logistic, make_quadratic
from grnm.problems import generate_logistic, generate_quadratic
from grnm.schedule import ScheduleConfig
from grnm.solver import SolverConfig, run

_EPS = float(np.finfo(np.float64).eps)


def _by_name(report, name):
    match = [c for c in report.all_checks() if c.name == name]
    assert len(match) == 1
    return match[0]


def _quadratic(n=6, rank=None, seed=5):
    A, b = generate_quadratic(n, rank=rank, seed=seed)
    return make_quadratic(A, b)


def _run(oracle, p=2.0, q=0.0, x0=None, epsilon=1e-9):
    c1 = max(oracle.metadata.taylor_bound or 0.0, 1.0)
    sched = ScheduleConfig(p=p, c1=c1, q=q).bind(oracle.n)
    x0 = oracle.default_start() if x0 is None else x0
    return run(oracle, x0, SolverConfig(schedule=sched, epsilon=epsilon)), sched


class TestSlowStepIndices:
    def test_picks_steps_with_slow_gradient_decay(self):
        idx = slow_step_indices([1.0, 0.5, 0.4, 0.04], theta=0.5)
        assert idx.tolist() == [0, 1]

    def test_theta_range_checked(self):
        for theta in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError, match="theta"):
                slow_step_indices([1.0, 0.5], theta)


class TestRateCertificate:
    # fast geometric decay: no slow steps, every inequality holds with room
    def _clean(self):
        k = np.arange(7)
        f = 4.0 ** -k.astype(float)
        g = 2.0 * 4.0 ** -k.astype(float)
        return f, g

    def test_clean_sequence_passes_all_checks(self):
        f, g = self._clean()
        report = check_rate_certificate(f, g, 0.0, theta=0.5, gamma=1.5,
                                        delta=1.0, tau=0.1, nu=30.0, ell=1)
        assert report.passed
        assert report.case == "finite_slow_set"
        assert report.slow_indices.size == 0
        assert report.counts() == (6, 0)
        assert not report.empirical_radius

    def test_value_increase_is_flagged_and_located(self):
        f, g = self._clean()
        f = f.copy()
        f[1] = f[0] + 0.2
        report = check_rate_certificate(f, g, 0.0, theta=0.5, gamma=1.5,
                                        delta=1.0, tau=0.1, nu=30.0, ell=1)
        check = _by_name(report, "monotone_values")
        assert not check.ok
        assert check.first_violation == 0
        assert not report.passed

    def test_gradient_spike_fails_growth_check(self):
        f, g = self._clean()
        g = g.copy()
        g[2] = 10.0 * g[1]
        report = check_rate_certificate(f, g, 0.0, theta=0.5, gamma=1.5,
                                        delta=1.0, tau=0.1, nu=30.0, ell=1)
        check = _by_name(report, "gradient_growth")
        assert not check.ok
        assert check.first_violation == 1

    def test_gap_beyond_gradient_bound_fails(self):
        f = np.array([5.0, 0.1, 0.01])
        g = np.array([1.0, 0.5, 0.25])
        report = check_rate_certificate(f, g, 0.0, theta=0.5, gamma=1.5,
                                        delta=1.0, tau=0.1, nu=30.0, ell=1)
        check = _by_name(report, "gap_gradient_bound")
        assert not check.ok
        assert check.first_violation == 0

    def test_inadmissible_constants_fail_their_check(self):
        f, g = self._clean()
        report = check_rate_certificate(f, g, 0.0, theta=0.5, gamma=3.0,
                                        delta=1.0, tau=0.1, nu=1.0, ell=1)
        assert not _by_name(report, "envelope_constants").ok
        assert not report.passed

    def test_persistent_slow_steps_need_sufficient_decrease(self):
        # gradient shrinks by 5% per step with theta = 0.9: every step is slow,
        # and the value decrease is far smaller than tau * gap^1.5 demands
        g = 0.95 ** np.arange(8)
        f = 1.0 + 0.001 * np.arange(8)[::-1]
        report = check_rate_certificate(f, g, 0.0, theta=0.9, gamma=1.05,
                                        delta=2.0, tau=0.5, nu=50.0, ell=1)
        assert report.case == "persistent_slow_set"
        assert report.slow_indices.size == 7
        assert not _by_name(report, "slow_step_decrease").ok

    def test_missing_witnesses_rejected(self):
        f, g = self._clean()
        with pytest.raises(ValueError, match="nu and ell"):
            check_rate_certificate(f, g, 0.0, theta=0.5, gamma=1.5,
                                   delta=1.0, tau=0.1)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="matching"):
            check_rate_certificate([1.0, 0.5], [1.0], 0.0, theta=0.5,
                                   gamma=1.5, delta=1.0, tau=0.1, nu=1.0, ell=1)


class TestCertifyRun:
    def test_full_rank_quadratic_certifies_with_known_radius(self):
        oracle = _quadratic(rank=None)
        traj, sched = _run(oracle)
        report = certify_run(traj, sched, 3.0 / 8.0, oracle.metadata)
        assert report.passed
        assert not report.empirical_radius
        assert "necessary-condition" not in report.format_table()

    def test_rank_deficient_quadratic_falls_back_to_empirical_radius(self):
        oracle = _quadratic(rank=3)
        assert oracle.metadata.sublevel_radius is None
        traj, sched = _run(oracle)
        report = certify_run(traj, sched, 3.0 / 8.0, oracle.metadata)
        assert report.empirical_radius
        assert "(empirical radius: necessary-condition check only)" in report.format_table()

    def test_start_above_certified_sublevel_goes_empirical(self):
        oracle = _quadratic(rank=None)
        x0 = 3.0 * np.ones(oracle.n)
        assert oracle.value(x0) > oracle.metadata.start_value
        traj, sched = _run(oracle, x0=x0)
        report = certify_run(traj, sched, 3.0 / 8.0, oracle.metadata)
        assert report.empirical_radius

    def test_iterates_outside_claimed_ball_refused(self):
        oracle = _quadratic(rank=None)
        traj, sched = _run(oracle, x0=2.0 * np.ones(oracle.n))
        tiny = 0.5 * max(np.linalg.norm(r.x) for r in traj.records)
        with pytest.raises(RuntimeError, match="left the claimed sublevel ball"):
            certify_run(traj, sched, 3.0 / 8.0, oracle.metadata, radius=tiny)

    def test_requires_optimum_and_minimizer(self):
        oracle = _quadratic(rank=None)
        traj, sched = _run(oracle)
        meta = replace(oracle.metadata, f_star=None)
        with pytest.raises(ValueError, match="optimal value and a minimizer"):
            certify_run(traj, sched, 3.0 / 8.0, meta)

    def test_requires_bound_schedule(self):
        oracle = _quadratic(rank=None)
        traj, sched = _run(oracle)
        with pytest.raises(ValueError, match="not bound"):
            certify_run(traj, replace(sched, n=None), 3.0 / 8.0, oracle.metadata)

    def test_inadmissible_triple_refused(self):
        oracle = _quadratic(rank=None)
        traj, sched = _run(oracle)
        # growth factor is 2 at p = 2, q = 0, so theta = 0.6 breaks gamma*theta < 1
        with pytest.raises(ValueError, match="inadmissible"):
            certify_run(traj, sched, 0.6, oracle.metadata)


class TestLocalOrder:
    def test_exact_squaring_gives_order_two(self):
        est = estimate_order_from_errors([1e-3, 1e-6, 1e-12])
        assert est.conclusive
        assert_allclose(est.order, 2.0, rtol=1e-12)
        assert est.indices == (0, 1, 2)

    def test_geometric_decay_reads_as_order_one(self):
        errors = 1e-3 * 0.5 ** np.arange(8)
        est = estimate_order_from_errors(errors)
        assert est.conclusive
        assert 1.0 < est.order < 1.2

    def test_window_keeps_the_tail(self):
        errors = 1e-3 * 0.5 ** np.arange(10)
        est = estimate_order_from_errors(errors, window=6)
        assert est.indices == tuple(range(4, 10))

    def test_out_of_band_and_none_errors_are_skipped(self):
        est = estimate_order_from_errors([0.5, 1e-3, 1e-4, 1e-5])
        assert est.conclusive and est.indices == (1, 2, 3)
        est = estimate_order_from_errors([None, 1e-3, 1e-4, 1e-5])
        assert est.conclusive and est.indices == (1, 2, 3)
        # below the rounding floor the distances carry no signal
        est = estimate_order_from_errors([1e-3, 1e-5, 1e-16])
        assert not est.conclusive and est.order is None

    def test_nonconsecutive_survivors_are_inconclusive(self):
        est = estimate_order_from_errors([1e-3, 1e-15, 1e-4, 1e-15, 1e-5])
        assert est.indices == (0, 2, 4)
        assert not est.conclusive

    def test_run_must_reach_local_regime(self):
        oracle = _quadratic(rank=None)
        sched = ScheduleConfig(p=2.0, c1=1.0)
        traj = run(oracle, np.ones(oracle.n),
                   SolverConfig(schedule=sched, epsilon=1e-14, max_outer=1))
        with pytest.raises(ValueError, match="local regime"):
            estimate_local_order(traj, oracle)

    def test_oracle_without_solution_set_rejected(self):
        oracle = _quadratic(rank=None)
        traj, _ = _run(oracle)
        # a custom objective need not know its minimizer
        blind = ObjectiveOracle(oracle.n, ProblemMetadata(taylor_bound=0.0))
        with pytest.raises(ValueError, match="solution set"):
            estimate_local_order(traj, blind)


class TestStepDistanceRatios:
    def test_real_run_ratios_stay_bounded(self):
        X, y = generate_logistic(30, 4, seed=3, scale=0.5)
        oracle = make_logistic(X, y)
        traj, _ = _run(oracle)
        report = check_step_distance_ratios(traj, oracle)
        assert report.ok
        assert 0.0 < report.min_ratio <= report.max_ratio < math.inf
        assert len(report.ratios) <= 10

    def test_run_with_no_usable_steps_is_not_ok(self):
        oracle = _quadratic(rank=None)
        traj, _ = _run(oracle, x0=oracle.metadata.x_star)
        report = check_step_distance_ratios(traj, oracle)
        assert not report.ok
        assert report.ratios == ()
        assert report.min_ratio == math.inf and report.max_ratio == 0.0
