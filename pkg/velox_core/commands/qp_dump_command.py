# FILE: velox_core/commands/qp_dump_command.py

import os
from typing import Any, Dict, List

import numpy as np

from ..planner.assembler import assemble
from ..planner.settings import PlannerMode
from ..planner.sqp import cold_start_guess
from ..solvers.qp_types import dump_problem
from ..utils.logger import logger
from .command_base import CommandArgument, VeloxCommand, build_horizon_problem
from .reporting import ensure_out_dir


class QpDumpCommand(VeloxCommand):
    """Vuelca el primer QP de cada modo (linealizado en el arranque en frío) en tripletas JSON."""

    @property
    def name(self) -> str:
        return "qp-dump"

    @property
    def description(self) -> str:
        return "Escribe qp_performance.json y qp_emergency.json con su row_index."

    def get_arguments(self) -> List[CommandArgument]:
        return [CommandArgument(flag='--position', help="Posición s_glo de inicio del horizonte (m).", kind='float')]

    def execute(self, **kwargs) -> Dict[str, Any]:
        config, inputs = self.load_scenario(kwargs['scenario'], kwargs.get('seed'))
        out_dir = ensure_out_dir(kwargs.get('out') or 'velox_out')

        sizes = {}
        for mode in PlannerMode:
            dp = build_horizon_problem(config, inputs, mode, kwargs.get('position'))
            guess = cold_start_guess(dp.path, dp.params, dp.v_ini, dp.v_end, dp.a_x_ini, dp.settings.delta_a, mode)
            sqp_cfg = dp.settings.sqp_config()
            o = np.concatenate((np.maximum(guess[1:], sqp_cfg.min_linearization_speed), np.zeros(dp.N)))
            assembled = assemble(dp.with_linearization(o), with_condition=True)

            path = os.path.join(out_dir, f"qp_{mode.value.lower()}.json")
            layout = {'mode': mode.value, **assembled.row_layout()}
            dump_problem(assembled.qp, path, assembled.row_index, metadata=layout)
            sizes[mode.value] = {'n': assembled.qp.n, 'm': assembled.qp.m, 'nnz_A': assembled.nnz_A,
                                 'nnz_P': assembled.nnz_P, 'nnz_total': assembled.nnz_total,
                                 'hessian_condition': assembled.hessian_condition, 'file': path,
                                 'row_counts': layout['row_counts'],
                                 'm_split_initial_accel': layout['m_split_initial_accel']}
            logger.info(f"QP {mode.value} volcado en '{path}'.", extra={'data': sizes[mode.value]})
        return self.success(sizes)
