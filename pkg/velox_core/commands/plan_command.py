# FILE: velox_core/commands/plan_command.py

import os
from typing import Any, Dict, List

from ..planner.settings import PlannerMode
from ..planner.sqp import PlanStatus, SqpPlanner
from ..utils.logger import logger
from .command_base import PLAN_EXIT_CODES, CommandArgument, VeloxCommand, build_horizon_problem
from .reporting import ensure_out_dir, plan_to_frame, write_csv, write_json


class PlanCommand(VeloxCommand):
    """Planifica un único horizonte desde --position y vuelca el perfil y el diagnóstico SQP."""

    @property
    def name(self) -> str:
        return "plan"

    @property
    def description(self) -> str:
        return "Planifica un horizonte y escribe plan_profile.csv, plan_summary.json y sqp_iterations.jsonl."

    def get_arguments(self) -> List[CommandArgument]:
        return [
            CommandArgument(flag='--position', help="Posición s_glo de inicio del horizonte (m).", kind='float'),
            CommandArgument(flag='--mode', help="Perfil a planificar.", default=PlannerMode.PERFORMANCE.value,
                            choices=[mode.value for mode in PlannerMode]),
        ]

    def execute(self, **kwargs) -> Dict[str, Any]:
        config, inputs = self.load_scenario(kwargs['scenario'], kwargs.get('seed'))
        mode = PlannerMode(kwargs.get('mode') or PlannerMode.PERFORMANCE.value)
        position = kwargs.get('position')
        out_dir = ensure_out_dir(kwargs.get('out') or 'velox_out')

        dp = build_horizon_problem(config, inputs, mode, position)
        settings = dp.settings
        trace_id = f"plan-{mode.value.lower()}-{dp.path.origin_glo:.1f}"
        plan = SqpPlanner(settings.sqp_config()).solve(dp, trace_id=trace_id)

        write_csv(plan_to_frame(plan, settings.slack_group_size), os.path.join(out_dir, 'plan_profile.csv'))
        summary = plan.summary()
        if plan.status == PlanStatus.INFEASIBLE and plan.certificate is not None:
            summary['certificate'] = plan.certificate
            logger.error("Certificado de infactibilidad registrado.", extra={
                'trace_id': trace_id, 'data': {'certificate_norm_inf': float(abs(plan.certificate).max())}})
        write_json(summary, os.path.join(out_dir, 'plan_summary.json'))
        with open(os.path.join(out_dir, 'sqp_iterations.jsonl'), 'w', encoding='utf-8') as f:
            f.write(plan.iteration_records_jsonl() + "\n")

        exit_code = PLAN_EXIT_CODES[plan.status]
        result = {'plan_status': plan.status.value, 'iterations': plan.iters, 'out': out_dir}
        if exit_code:
            return self.error(f"El plan terminó con estado {plan.status.value}.", exit_code, result)
        return self.success(result)
