# FILE: velox_core/commands/command_base.py

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..config import ScenarioConfig, ScenarioInputs
from ..planner.assembler import DiscreteProblem, build_discrete_problem
from ..planner.settings import PlannerMode
from ..planner.sqp import PlanStatus
from ..track.track_map import sample_local_path

# Códigos de salida compartidos por todos los comandos
EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3
EXIT_ORACLE_FAIL = 4

PLAN_EXIT_CODES = {
    PlanStatus.CONVERGED: EXIT_OK,
    PlanStatus.INFEASIBLE: EXIT_INFEASIBLE,
    PlanStatus.ITER_LIMIT: EXIT_LIMIT,
    PlanStatus.TIME_LIMIT: EXIT_LIMIT,
}


class CommandArgument(BaseModel):
    """
    Firma de un argumento de línea de comandos. `main.py` construye los
    sub-parsers de argparse a partir de estas firmas.
    """
    flag: str = Field(..., description="Opción larga, p. ej. '--position'.")
    help: str = Field(..., description="Texto de ayuda.")
    kind: Literal['str', 'int', 'float', 'flag'] = Field('str', description="Tipo del valor.")
    required: bool = False
    default: Any = None
    choices: Optional[List[str]] = None

    @property
    def dest(self) -> str:
        return self.flag.lstrip('-').replace('-', '_')


# Argumentos comunes a todos los comandos
COMMON_ARGUMENTS = [
    CommandArgument(flag='--scenario', help="Fichero JSON del escenario.", required=True),
    CommandArgument(flag='--out', help="Directorio de salida.", default='velox_out'),
    CommandArgument(flag='--seed', help="Semilla de los generadores sintéticos.", kind='int'),
    CommandArgument(flag='--verbose', help="Trazas DEBUG en consola.", kind='flag'),
]


class VeloxCommand(ABC):
    """
    Clase base de los comandos de la CLI.

    Cada comando vive en un módulo `*_command.py` del paquete `commands` y el
    CommandManager lo descubre al arrancar. `execute` devuelve un diccionario
    serializable con 'status' ('success' o 'error'), 'result' o
    'error_message', y 'exit_code'.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Nombre del sub-comando (ej. 'plan')."""
        pass

    @property
    def description(self) -> str:
        return ""

    def get_arguments(self) -> List[CommandArgument]:
        """Argumentos propios además de los comunes."""
        return []

    @abstractmethod
    def execute(self, **kwargs) -> Dict[str, Any]:
        pass

    @staticmethod
    def load_scenario(scenario: str, seed: Optional[int] = None) -> Tuple[ScenarioConfig, ScenarioInputs]:
        config = ScenarioConfig.load(scenario)
        return config, config.build_inputs(seed)

    @staticmethod
    def success(result: Dict[str, Any], exit_code: int = EXIT_OK) -> Dict[str, Any]:
        return {'status': 'success', 'result': result, 'exit_code': exit_code}

    @staticmethod
    def error(message: str, exit_code: int, result: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        response = {'status': 'error', 'error_message': message, 'exit_code': exit_code}
        if result is not None:
            response['result'] = result
        return response


def build_horizon_problem(config: ScenarioConfig, inputs: ScenarioInputs, mode: PlannerMode,
                          position: Optional[float] = None, **overrides) -> DiscreteProblem:
    """Problema discreto de un único horizonte desde `position` con el estado de salida del escenario."""
    settings = config.performance if mode == PlannerMode.PERFORMANCE else config.emergency
    start = float(config.start.s_glo if position is None else position)
    path = sample_local_path(inputs.track, inputs.limit_map, start, settings.steps())
    if 'p_max' in overrides:
        path = path.model_copy(update={'p_max': np.full(path.M, overrides.pop('p_max'))})
    kwargs = {'v_ini': config.start.v, 'a_x_ini': config.start.a_x, **overrides}
    return build_discrete_problem(path, inputs.vehicle, settings, **kwargs)
