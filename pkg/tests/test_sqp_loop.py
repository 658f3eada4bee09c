import json

import numpy as np
import pytest

from velox_core.oracle import compare_profiles, forward_backward
from velox_core.planner import (
    PlannerSettings,
    PlanStatus,
    SqpPlanner,
    assemble,
    build_discrete_problem,
    cold_start_guess,
    constraint_violations,
    discrete_accel,
    evaluate_errors,
    sqp_solve,
)
from velox_core.solvers import AdmmSolver
from velox_core.solvers.qp_types import QpSolution, QpStatus
from velox_core.track import sample_local_path, synthetic
from velox_core.vehicle import coast_speed_analytic

# Tolerancias ajustadas para comparar con soluciones de referencia
PRECISE = dict(points=81, slack_count=8, horizon_m=400.0, eps_sqp_tol=0.01, eps_qp_tol=1e-5,
               qp_max_iter=20000, max_iter=30, time_budget_s=60.0)


def _solve(dp, settings=None, **kwargs):
    settings = settings or dp.settings
    return SqpPlanner(settings.sqp_config()).solve(dp, **kwargs)


def _straight_problem(settings, devbot, v_ini=20.0, a_x_ini=0.0, track=None, **kwargs):
    track = track or synthetic.straight_track(length=3000.0)
    limit_map = synthetic.constant_limit_map(track.lap_length)
    path = sample_local_path(track, limit_map, 0.0, settings.steps())
    return build_discrete_problem(path, devbot, settings, v_ini=v_ini, a_x_ini=a_x_ini, **kwargs)


def _assert_settled_tail(plan, floor):
    """Una vez bajo el suelo de linealización la velocidad ya no crece."""
    below = np.flatnonzero(plan.v[1:] <= floor)
    assert below.size
    tail = plan.v[below[0] + 1:]
    assert np.all(np.diff(tail) <= 1e-12)
    assert np.all(tail >= 0.0)


class TestEvaluateErrors:
    def test_identical_iterates(self):
        assert evaluate_errors([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 3) == (0.0, 0.0)

    def test_mean_and_max(self):
        eps_bar, eps_hat = evaluate_errors([3.0, 4.0], [0.0, 0.0], 2)
        assert eps_bar == pytest.approx(2.5)
        assert eps_hat == pytest.approx(4.0)


class TestConvergence:
    def test_straight_line_plan(self, devbot, small_performance):
        dp = _straight_problem(small_performance, devbot)
        plan = _solve(dp)
        assert plan.status == PlanStatus.CONVERGED
        assert 1 <= plan.iters <= small_performance.max_iter
        assert plan.v[0] == pytest.approx(20.0)
        assert np.all(plan.v <= dp.path.v_max + 0.05)
        assert plan.v[-1] <= dp.v_end + 0.05
        assert plan.t[0] == 0.0 and np.all(np.diff(plan.t) > 0)
        assert len(plan.per_iter_diag) == plan.iters

    def test_functional_shortcut(self, devbot, small_performance):
        dp = _straight_problem(small_performance, devbot)
        assert sqp_solve(dp, small_performance.sqp_config()).status == PlanStatus.CONVERGED

    def test_diagnostics_are_serializable(self, devbot, small_performance):
        plan = _solve(_straight_problem(small_performance, devbot))
        lines = plan.iteration_records_jsonl().splitlines()
        assert len(lines) == plan.iters
        assert {'iter', 'alpha', 'gamma', 'eps_bar', 'eps_hat', 'qp_iters', 'obj_terms'} <= set(json.loads(lines[0]))
        assert plan.summary()['status'] == 'Converged'

    def test_warm_restart_from_solution(self, devbot, small_performance):
        dp = _straight_problem(small_performance, devbot)
        first = _solve(dp)
        second = _solve(dp, init=first.v, warm_duals=first.duals)
        assert second.status == PlanStatus.CONVERGED
        assert second.iters <= min(first.iters, 2)

    def test_exact_penalty_keeps_slack_at_zero(self, devbot):
        settings = PlannerSettings.performance(points=31, slack_count=3, horizon_m=150.0, time_budget_s=10.0,
                                               eps_qp_tol=1e-5, qp_max_iter=20000, qp_polish=True)
        track = synthetic.single_corner_track()
        limit_map = synthetic.stepped_limit_map(track.lap_length, seed=2)
        path = sample_local_path(track, limit_map, 300.0, settings.steps())
        dp = build_discrete_problem(path, devbot, settings, v_ini=20.0)
        plan = _solve(dp)
        assert plan.status == PlanStatus.CONVERGED
        assert float(np.sum(plan.eps)) <= 1e-3
        assert plan.violations['diamond_pp'] < 0.01

    def test_emergency_profile_brakes_to_rest(self, devbot, small_emergency):
        dp = _straight_problem(small_emergency, devbot, v_ini=30.0)
        plan = _solve(dp)
        assert plan.status == PlanStatus.CONVERGED
        assert plan.v[-1] < 1.0
        assert np.all(np.diff(plan.v) <= 0.05)
        _assert_settled_tail(plan, small_emergency.sqp_config().min_linearization_speed)


class TestTermination:
    def test_time_limit(self, devbot, small_performance):
        settings = small_performance.model_copy(update={'time_budget_s': 1e-9, 'eps_sqp_tol': 1e-9})
        plan = _solve(_straight_problem(settings, devbot))
        assert plan.status == PlanStatus.TIME_LIMIT
        assert plan.iters == 1

    def test_iteration_limit(self, devbot, small_performance):
        settings = small_performance.model_copy(update={'max_iter': 1, 'eps_sqp_tol': 1e-9})
        plan = _solve(_straight_problem(settings, devbot))
        assert plan.status == PlanStatus.ITER_LIMIT
        assert plan.iters == 1

    def test_initial_speed_above_limit_is_infeasible(self, devbot, small_performance):
        plan = _solve(_straight_problem(small_performance, devbot, v_ini=100.0))
        assert plan.status == PlanStatus.INFEASIBLE
        assert plan.certificate is not None
        assert plan.iters == 1


class TestReferenceSolutions:
    def test_coasting_matches_analytic_decay(self, devbot):
        settings = PlannerSettings.performance(rho_j=0.0, **PRECISE)
        track = synthetic.straight_track(length=1000.0, p_max=0.0)
        v0 = 60.0
        # Con P = 0 el primer tramo solo admite F ≤ 0: a_x[0] = −c_r·v0²/m
        a0 = -devbot.drag_lump_kg_per_m * v0 ** 2 / devbot.mass_kg
        dp = _straight_problem(settings, devbot, v_ini=v0, a_x_ini=a0, track=track)
        plan = _solve(dp)
        assert plan.status == PlanStatus.CONVERGED
        window = plan.s_m <= 200.0
        expected = coast_speed_analytic(v0, plan.s_m[window], devbot)
        np.testing.assert_allclose(plan.v[window], expected, rtol=5e-3)

    def test_launch_follows_force_envelope(self, devbot):
        settings = PlannerSettings.performance(rho_j=0.0, delta_a=None, **PRECISE)
        vehicle = devbot.model_copy(update={'power_max_W': 1e9})
        track = synthetic.straight_track(length=1000.0, p_max=1e9)
        dp = _straight_problem(settings, vehicle, v_ini=1.0, track=track)
        plan = _solve(dp)
        oracle = forward_backward(dp.path, dp.params, dp.v_ini, dp.v_end)
        assert plan.status == PlanStatus.CONVERGED
        assert compare_profiles(plan.v, oracle).max_rel_dev <= 0.02


class _FlakySolver:
    """ADMM real salvo en las llamadas indicadas, que devuelven un certificado de infactibilidad."""

    def __init__(self, settings, failing_calls):
        self.inner = AdmmSolver(settings)
        self.failing_calls = set(failing_calls)
        self.calls = 0

    def solve(self, qp, warm_start=None, trace_id='N/A'):
        self.calls += 1
        if self.calls in self.failing_calls:
            return QpSolution(status=QpStatus.PRIMAL_INFEASIBLE, z=np.zeros(qp.n), y=np.zeros(qp.m), iterations=1,
                              residual_primal=np.inf, residual_dual=0.0, certificate=np.ones(qp.m))
        return self.inner.solve(qp, warm_start=warm_start, trace_id=trace_id)


def _corner_problem(settings, devbot, start, v_ini=30.0):
    track = synthetic.single_corner_track(length=1200.0)
    limit_map = synthetic.constant_limit_map(track.lap_length)
    path = sample_local_path(track, limit_map, start, settings.steps())
    return build_discrete_problem(path, devbot, settings, v_ini=v_ini)


def _cold_iterate(dp):
    guess = cold_start_guess(dp.path, dp.params, dp.v_ini, dp.v_end, dp.a_x_ini, dp.settings.delta_a, dp.mode)
    return np.concatenate((guess[1:], np.zeros(dp.N)))


class TestColdStart:
    @pytest.mark.parametrize("start", [0.0, 200.0])
    def test_guess_satisfies_nonlinear_rows(self, devbot, start):
        dp = _corner_problem(PlannerSettings.performance(), devbot, start)
        violations = constraint_violations(dp, _cold_iterate(dp))
        for name, value in violations.items():
            assert value <= 1e-3, name

    def test_guess_respects_acceleration_handover(self, devbot):
        settings = PlannerSettings.performance()
        dp = _corner_problem(settings, devbot, 0.0)
        guess = cold_start_guess(dp.path, dp.params, dp.v_ini, dp.v_end, 0.0, settings.delta_a, dp.mode)
        a_x = discrete_accel(guess, dp.path.ds)
        assert abs(a_x[0]) <= settings.delta_a + 1e-9
        assert np.all(guess <= dp.path.v_max + 1e-9)

    def test_first_full_size_qp_is_feasible(self, devbot):
        settings = PlannerSettings.performance()
        dp = _corner_problem(settings, devbot, 200.0)
        o = _cold_iterate(dp)
        o[:dp.n_vel] = np.maximum(o[:dp.n_vel], settings.sqp_config().min_linearization_speed)
        assembled = assemble(dp.with_linearization(o))
        solution = AdmmSolver(settings.admm_settings()).solve(assembled.qp)
        assert solution.status not in (QpStatus.PRIMAL_INFEASIBLE, QpStatus.DUAL_INFEASIBLE)

    def test_emergency_guess_brakes_to_rest(self, devbot):
        settings = PlannerSettings.emergency()
        dp = _straight_problem(settings, devbot, v_ini=30.0)
        guess = cold_start_guess(dp.path, dp.params, dp.v_ini, dp.v_end, mode=dp.mode)
        assert guess[0] == pytest.approx(30.0)
        assert np.all(np.diff(guess) <= 0.0)
        assert guess[-1] == 0.0


@pytest.mark.slow
class TestFullSizeProblems:
    @pytest.mark.parametrize("start", [0.0, 200.0])
    def test_performance_with_corner_in_horizon(self, devbot, start):
        settings = PlannerSettings.performance(time_budget_s=30.0)
        dp = _corner_problem(settings, devbot, start)
        plan = _solve(dp)
        assert plan.status == PlanStatus.CONVERGED
        assert plan.max_slack_pct <= settings.eps_max_pct + 1e-6
        assert plan.violations['power'] <= 10.0 * settings.eps_qp_tol * devbot.power_max_W

    def test_objective_terms_are_dominated_by_velocity(self, devbot):
        settings = PlannerSettings.performance(time_budget_s=30.0)
        plan = _solve(_corner_problem(settings, devbot, 200.0))
        assert plan.status == PlanStatus.CONVERGED
        terms = plan.objective_terms
        assert terms['J_v'] >= 100.0 * terms['J_j']
        assert terms['J_v'] >= 100.0 * terms['J_eps_l']

    def test_power_cap_on_converged_plan(self, devbot):
        settings = PlannerSettings.performance(**PRECISE)
        dp = _straight_problem(settings, devbot, v_ini=40.0)
        plan = _solve(dp)
        assert plan.status == PlanStatus.CONVERGED
        cap = np.minimum(devbot.power_max_W, dp.path.p_max[:-1])
        assert np.max(plan.P) >= 0.9 * devbot.power_max_W
        assert np.all(plan.P <= cap + 1e-3 * devbot.power_max_W)

    def test_emergency_brakes_to_rest(self, devbot):
        settings = PlannerSettings.emergency(time_budget_s=30.0)
        plan = _solve(_straight_problem(settings, devbot, v_ini=30.0))
        assert plan.status == PlanStatus.CONVERGED
        assert plan.max_slack_pct <= settings.eps_max_pct + 1e-6
        assert plan.v[-1] < 1.0
        _assert_settled_tail(plan, settings.sqp_config().min_linearization_speed)


class TestInfeasibleRecovery:
    def test_backs_off_after_accepted_step(self, devbot, small_performance):
        settings = small_performance.model_copy(update={'max_iter': 4, 'eps_sqp_tol': 1e-9})
        dp = _straight_problem(settings, devbot)
        solver = _FlakySolver(settings.admm_settings(), failing_calls={2})
        plan = SqpPlanner(settings.sqp_config(), solver=solver).solve(dp)
        assert plan.status == PlanStatus.ITER_LIMIT
        assert [record.alpha for record in plan.per_iter_diag][1] == 0.0
        assert plan.per_iter_diag[1].qp_status == QpStatus.PRIMAL_INFEASIBLE.value
        assert plan.certificate is None

    def test_gives_up_after_backoff_limit(self, devbot, small_performance):
        settings = small_performance.model_copy(update={'eps_sqp_tol': 1e-9})
        dp = _straight_problem(settings, devbot)
        config = settings.sqp_config()
        solver = _FlakySolver(settings.admm_settings(), failing_calls=range(2, 100))
        plan = SqpPlanner(config, solver=solver).solve(dp)
        assert plan.status == PlanStatus.INFEASIBLE
        assert plan.iters == 2 + config.max_infeasible_backoff
        assert plan.certificate is not None

    def test_infeasible_warm_start_restarts_cold(self, devbot, small_performance):
        dp = _straight_problem(small_performance, devbot)
        solver = _FlakySolver(small_performance.admm_settings(), failing_calls={1})
        plan = SqpPlanner(small_performance.sqp_config(), solver=solver).solve(dp, init=dp.v_lin)
        assert plan.status == PlanStatus.CONVERGED
        assert solver.calls >= 2
