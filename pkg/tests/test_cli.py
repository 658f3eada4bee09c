import json
import os

import pytest

from velox_core.commands import CommandManager
from velox_core.config import ScenarioConfig
from velox_core.main import main
from velox_core.orchestrator import RaceOrchestrator
from velox_core.planner.settings import PlannerSettings
from velox_core.simulation import strategy_lap_energy
from velox_core.track import load_track_csv

SMALL_PERFORMANCE = {'points': 31, 'slack_count': 3, 'horizon_m': 150.0, 'time_budget_s': 5.0}
SMALL_EMERGENCY = {'points': 21, 'slack_count': 2, 'horizon_m': 100.0, 'time_budget_s': 5.0}
DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')


def _scenario(**overrides):
    document = {
        'schema_version': 1,
        'name': "recta de pruebas",
        'synthetic_track': {'kind': 'straight', 'params': {'length': 3000.0}},
        'performance': dict(SMALL_PERFORMANCE),
        'emergency': dict(SMALL_EMERGENCY),
        'start': {'s_glo': 0.0, 'v': 20.0, 'a_x': 0.0},
    }
    document.update(overrides)
    return document


def _run(command, scenario_path, out_dir, *extra):
    return main([command, '--scenario', str(scenario_path), '--out', str(out_dir), *extra])


class TestCommandDiscovery:
    def test_all_commands_are_registered(self):
        assert CommandManager().get_command_names() == ['oracle-check', 'plan', 'qp-dump', 'simulate']

    def test_unknown_command(self):
        response = CommandManager().execute_command('replay')
        assert response['exit_code'] == 1


class TestPlanCommand:
    def test_nominal_plan(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        assert _run('plan', write_scenario(_scenario()), out) == 0
        for name in ('plan_profile.csv', 'plan_summary.json', 'sqp_iterations.jsonl'):
            assert (out / name).is_file()
        summary = json.loads((out / 'plan_summary.json').read_text())
        assert summary['status'] == 'Converged'
        header = (out / 'plan_profile.csv').read_text().splitlines()[0].split(',')
        assert header[:3] == ['s_m[m]', 's_glo[m]', 't[s]']
        assert {'v[m/s]', 'F[N]', 'P[W]', 'eps[%]'} <= set(header)

    def test_emergency_mode_and_position(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        assert _run('plan', write_scenario(_scenario()), out, '--mode', 'Emergency', '--position', '500') == 0
        summary = json.loads((out / 'plan_summary.json').read_text())
        assert summary['mode'] == 'Emergency'

    def test_infeasible_start_exits_with_two(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        scenario = _scenario(start={'s_glo': 0.0, 'v': 100.0, 'a_x': 0.0})
        assert _run('plan', write_scenario(scenario), out) == 2
        assert 'certificate' in json.loads((out / 'plan_summary.json').read_text())

    def test_iteration_limit_exits_with_three(self, write_scenario, tmp_path):
        scenario = _scenario(performance={**SMALL_PERFORMANCE, 'max_iter': 1, 'eps_sqp_tol': 1e-9})
        assert _run('plan', write_scenario(scenario), tmp_path / "out") == 3

    @pytest.mark.slow
    @pytest.mark.parametrize("position", [100.0, 200.0, 1300.0])
    def test_full_size_oval_with_corner_ahead(self, write_scenario, tmp_path, position):
        with open(os.path.join(DATA_DIR, 'scenario_oval.json'), encoding='utf-8') as f:
            scenario = json.load(f)
        for key in ('track_file', 'accel_map_file', 'energy_strategy_file'):
            scenario[key] = os.path.join(DATA_DIR, scenario[key])
        scenario['events'] = []
        scenario['performance'] = {'time_budget_s': 60.0}
        out = tmp_path / "out"
        assert _run('plan', write_scenario(scenario), out, '--position', str(position)) == 0
        summary = json.loads((out / 'plan_summary.json').read_text())
        assert summary['status'] == 'Converged'
        assert summary['max_slack_pct'] <= 3.0 + 1e-6


class TestInputErrors:
    def test_missing_scenario(self, tmp_path):
        assert _run('plan', tmp_path / "nope.json", tmp_path / "out") == 1

    def test_missing_track_file(self, write_scenario, tmp_path):
        scenario = _scenario(track_file="no_such_track.csv")
        del scenario['synthetic_track']
        assert _run('plan', write_scenario(scenario), tmp_path / "out") == 1

    def test_unsupported_schema_version(self, write_scenario, tmp_path):
        assert _run('plan', write_scenario(_scenario(schema_version=2)), tmp_path / "out") == 1

    def test_unknown_keys_are_rejected(self, write_scenario, tmp_path):
        assert _run('plan', write_scenario(_scenario(solver="osqp")), tmp_path / "out") == 1

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ esto no es json")
        assert _run('plan', path, tmp_path / "out") == 1


class TestScenarioInputs:
    def test_energy_budget_is_derived_from_strategy(self):
        config = ScenarioConfig.load(os.path.join(DATA_DIR, 'scenario_oval.json'))
        assert config.race.energy_budget_J is None
        inputs = config.build_inputs()
        assert inputs.energy_budget_J > 0
        unrestricted = strategy_lap_energy(load_track_csv(config.track_file), inputs.limit_map,
                                           inputs.vehicle, config.start.v)
        assert inputs.energy_budget_J < unrestricted
        orchestrator = RaceOrchestrator.from_scenario(config)
        assert orchestrator.energy_budget_J == pytest.approx(inputs.energy_budget_J)

    def test_no_strategy_means_no_derived_budget(self, write_scenario):
        config = ScenarioConfig.load(write_scenario(_scenario()))
        assert config.build_inputs().energy_budget_J is None


class TestQpDumpCommand:
    def test_default_presets(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        scenario = _scenario()
        del scenario['performance'], scenario['emergency']
        assert _run('qp-dump', write_scenario(scenario), out) == 0
        performance = json.loads((out / 'qp_performance.json').read_text())
        emergency = json.loads((out / 'qp_emergency.json').read_text())
        assert (performance['n'], performance['m']) == (126, 810)
        assert len(performance['A_triplets']) == 1944
        assert len(performance['P_triplets']) == 351
        emergency_preset = PlannerSettings.emergency()
        emergency_n = emergency_preset.points - 1 + emergency_preset.slack_count
        assert (emergency['n'], emergency['m']) == (emergency_n, 348)
        assert emergency_n == 54
        assert list(performance['row_index'])[0] == 'velocity_box'

    def test_row_layout_metadata(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        scenario = _scenario()
        del scenario['performance'], scenario['emergency']
        assert _run('qp-dump', write_scenario(scenario), out) == 0
        performance = json.loads((out / 'qp_performance.json').read_text())['metadata']
        emergency = json.loads((out / 'qp_emergency.json').read_text())['metadata']
        assert performance['mode'] == 'Performance'
        assert performance['row_counts']['initial_accel'] == 1
        assert performance['initial_accel_two_sided']
        assert performance['initial_accel_one_sided_rows'] == 2
        assert performance['m_split_initial_accel'] == 811
        assert sum(performance['row_counts'].values()) == 810
        assert 'initial_accel' not in emergency['row_counts']
        assert emergency['m_split_initial_accel'] == 348


class TestOracleCheckCommand:
    def test_refuses_jerk_penalty(self, write_scenario, tmp_path):
        assert _run('oracle-check', write_scenario(_scenario()), tmp_path / "out") == 1

    def test_jerk_free_plan_passes(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        scenario = _scenario(
            synthetic_track={'kind': 'single_corner', 'params': {}},
            performance={'points': 81, 'slack_count': 8, 'horizon_m': 400.0, 'rho_j': 0.0, 'eps_sqp_tol': 0.01,
                         'eps_qp_tol': 1e-4, 'qp_max_iter': 20000, 'max_iter': 30, 'time_budget_s': 60.0},
            start={'s_glo': 100.0, 'v': 30.0, 'a_x': 0.0},
        )
        assert _run('oracle-check', write_scenario(scenario), out) == 0
        report = json.loads((out / 'oracle_report.json').read_text())
        assert report['passed']
        assert report['max_rel_dev'] <= 0.02
        assert (out / 'oracle_profile.csv').is_file()

    def test_failing_comparison_exits_with_four(self, write_scenario, tmp_path):
        scenario = _scenario(performance={**SMALL_PERFORMANCE, 'rho_j': 0.0, 'max_iter': 1, 'eps_sqp_tol': 1e-9})
        assert _run('oracle-check', write_scenario(scenario), tmp_path / "out") == 4


class TestSimulateCommand:
    def test_emergency_stop_run(self, write_scenario, tmp_path):
        out = tmp_path / "out"
        scenario = _scenario(replan={'replan_distance_m': 25.0},
                             events=[{'type': 'emergency', 'distance_m': 100.0}])
        assert _run('simulate', write_scenario(scenario), out) == 0
        summary = json.loads((out / 'race_summary.json').read_text())
        assert summary['end_reason'] == 'stopped'
        assert 'profile' not in summary
        lines = (out / 'cycle_diagnostics.jsonl').read_text().splitlines()
        assert len(lines) == summary['cycles']
        assert (out / 'race_profile.csv').is_file()

    def test_cycle_cap_exits_with_three(self, write_scenario, tmp_path):
        scenario = _scenario(race={'max_cycles': 2})
        assert _run('simulate', write_scenario(scenario), tmp_path / "out") == 3

    def test_map_patch_event(self, write_scenario, tmp_path):
        patch_file = tmp_path / "patches.csv"
        patch_file.write_text("s_glo,ax_bar,ay_bar,t_apply\n1000,9,9,0\n1050,9,9,0\n")
        scenario = _scenario(race={'max_cycles': 3}, events=[{'type': 'map_patch', 'file': patch_file.name}])
        out = tmp_path / "out"
        assert _run('simulate', write_scenario(scenario), out) == 3
        summary = json.loads((out / 'race_summary.json').read_text())
        assert [entry['stamp'] for entry in summary['patch_audit']] == [1]
