# FILE: velox_core/commands/simulate_command.py

import os
from typing import Any, Dict

from ..config import ScenarioConfig
from ..orchestrator import RaceOrchestrator
from .command_base import EXIT_LIMIT, VeloxCommand
from .reporting import ensure_out_dir, race_to_frame, write_csv, write_json, write_jsonl


class SimulateCommand(VeloxCommand):
    """Carrera en lazo cerrado; un PlanInfeasibleError llega al CommandManager como código 2."""

    @property
    def name(self) -> str:
        return "simulate"

    @property
    def description(self) -> str:
        return "Simula la carrera y escribe race_profile.csv, race_summary.json y cycle_diagnostics.jsonl."

    def execute(self, **kwargs) -> Dict[str, Any]:
        config = ScenarioConfig.load(kwargs['scenario'])
        out_dir = ensure_out_dir(kwargs.get('out') or 'velox_out')

        report = RaceOrchestrator.from_scenario(config, kwargs.get('seed')).run_race()

        write_csv(race_to_frame(report), os.path.join(out_dir, 'race_profile.csv'))
        write_json(report.summary(), os.path.join(out_dir, 'race_summary.json'))
        write_jsonl(report.cycle_diagnostics, os.path.join(out_dir, 'cycle_diagnostics.jsonl'))

        result = {'end_reason': report.end_reason, 'lap_times_s': report.lap_times_s,
                  'total_time_s': report.total_time_s, 'cycles': report.cycles, 'out': out_dir}
        if report.end_reason == 'max_cycles':
            return self.error("La simulación agotó max_cycles.", EXIT_LIMIT, result)
        return self.success(result)
