# FILE: velox_core/commands/oracle_check_command.py

import os
from typing import Any, Dict, List

from ..errors import OracleInfeasibleStartError
from ..oracle.forward_backward import compare_profiles, forward_backward
from ..planner.settings import PlannerMode
from ..planner.sqp import PlanStatus, SqpPlanner
from ..utils.logger import logger
from .command_base import (
    EXIT_INPUT_ERROR,
    EXIT_ORACLE_FAIL,
    CommandArgument,
    VeloxCommand,
    build_horizon_problem,
)
from .reporting import ensure_out_dir, oracle_to_frame, write_csv, write_json

# Potencia efectivamente ilimitada: el oráculo no modela el límite de potencia
UNLIMITED_POWER_W = 1e9
PASS_REL_DEV = 0.02


class OracleCheckCommand(VeloxCommand):
    """
    Compara el plan SQP convergido con el perfil hacia delante/atrás en un
    horizonte sin tirón ni límite de potencia.
    """

    @property
    def name(self) -> str:
        return "oracle-check"

    @property
    def description(self) -> str:
        return "Compara el SQP con el oráculo y escribe oracle_profile.csv y oracle_report.json."

    def get_arguments(self) -> List[CommandArgument]:
        return [
            CommandArgument(flag='--position', help="Posición s_glo de inicio del horizonte (m).", kind='float'),
            CommandArgument(flag='--tolerance', help="Desviación relativa máxima admitida.", kind='float',
                            default=PASS_REL_DEV),
        ]

    def execute(self, **kwargs) -> Dict[str, Any]:
        config, inputs = self.load_scenario(kwargs['scenario'], kwargs.get('seed'))
        tolerance = kwargs.get('tolerance') or PASS_REL_DEV
        out_dir = ensure_out_dir(kwargs.get('out') or 'velox_out')

        if config.performance.rho_j != 0:
            return self.error(
                f"El oráculo no es válido con penalización de tirón (ρ_j = {config.performance.rho_j}); "
                "fije performance.rho_j = 0 en el escenario.", EXIT_INPUT_ERROR)

        # --- FASE 1: ORÁCULO ---
        vehicle = inputs.vehicle.model_copy(update={'power_max_W': UNLIMITED_POWER_W})
        inputs = inputs.model_copy(update={'vehicle': vehicle})
        dp = build_horizon_problem(config, inputs, PlannerMode.PERFORMANCE, kwargs.get('position'),
                                   p_max=UNLIMITED_POWER_W)
        try:
            oracle = forward_backward(dp.path, dp.params, dp.v_ini, dp.v_end)
        except OracleInfeasibleStartError as e:
            return self.error(str(e), EXIT_INPUT_ERROR)

        # --- FASE 2: PLAN SQP ---
        # a_x[0] del oráculo como aceleración inicial: ambos parten del mismo estado
        dp = build_horizon_problem(config, inputs, PlannerMode.PERFORMANCE, kwargs.get('position'),
                                   p_max=UNLIMITED_POWER_W, a_x_ini=float(oracle.a_x[0]))
        trace_id = f"oracle-check-{dp.path.origin_glo:.1f}"
        plan = SqpPlanner(dp.settings.sqp_config()).solve(dp, trace_id=trace_id)

        # --- FASE 3: COMPARACIÓN ---
        comparison = compare_profiles(plan.v, oracle)
        passed = plan.status == PlanStatus.CONVERGED and comparison.max_rel_dev <= tolerance
        report = {
            'passed': passed,
            'tolerance': tolerance,
            'plan_status': plan.status.value,
            'plan_iterations': plan.iters,
            **comparison.model_dump(),
        }
        write_csv(oracle_to_frame(oracle, plan.v, plan.s_glo), os.path.join(out_dir, 'oracle_profile.csv'))
        write_json(report, os.path.join(out_dir, 'oracle_report.json'))

        log = logger.info if passed else logger.warning
        log(f"Comparación con el oráculo: desviación máxima {100 * comparison.max_rel_dev:.3f} %.",
            extra={'trace_id': trace_id, 'data': report})
        if not passed:
            return self.error("El plan se aparta del oráculo más de lo admitido.", EXIT_ORACLE_FAIL, report)
        return self.success(report)
