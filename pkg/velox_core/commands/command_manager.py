# FILE: velox_core/commands/command_manager.py

import importlib
import inspect
import pkgutil
from typing import Any, Dict, List

from pydantic import ValidationError

from ..errors import PlanInfeasibleError, ScenarioError
from ..utils.logger import logger
from .command_base import EXIT_INFEASIBLE, EXIT_INPUT_ERROR, VeloxCommand


class CommandManager:
    """
    Descubre, carga y gestiona los comandos de la CLI.

    Es el registro central de sub-comandos y el punto de entrada para
    ejecutarlos; traduce las excepciones conocidas a códigos de salida.
    """

    def __init__(self):
        self.commands: Dict[str, VeloxCommand] = {}
        self._load_commands()

    def _load_commands(self):
        """Importa los módulos `*_command` del paquete y registra sus VeloxCommand."""
        package = importlib.import_module(__package__)
        logger.debug("Cargando comandos...")
        for _, module_name, _ in pkgutil.iter_modules(package.__path__):
            if not module_name.endswith("_command"):
                continue
            try:
                module = importlib.import_module(f".{module_name}", package=__package__)
                for _, cls in inspect.getmembers(module, inspect.isclass):
                    if issubclass(cls, VeloxCommand) and cls is not VeloxCommand and not inspect.isabstract(cls):
                        command = cls()
                        self.commands[command.name] = command
                        logger.debug(f"  - Comando '{command.name}' cargado.")
            except Exception as e:
                logger.error(f"Error al cargar el comando {module_name}: {e}")

    def get_command_names(self) -> List[str]:
        return sorted(self.commands.keys())

    def execute_command(self, command_name: str, **kwargs) -> Dict[str, Any]:
        if command_name not in self.commands:
            return {'status': 'error', 'error_message': f"Comando '{command_name}' no encontrado.",
                    'exit_code': EXIT_INPUT_ERROR}
        try:
            return self.commands[command_name].execute(**kwargs)
        except (ScenarioError, ValidationError, OSError) as e:
            logger.error(f"Entrada inválida para '{command_name}': {e}")
            return {'status': 'error', 'error_message': str(e), 'exit_code': EXIT_INPUT_ERROR}
        except PlanInfeasibleError as e:
            logger.error(str(e))
            return {'status': 'error', 'error_message': str(e), 'exit_code': EXIT_INFEASIBLE}
        except Exception as e:
            logger.exception(f"Error inesperado al ejecutar '{command_name}'.")
            return {'status': 'error', 'error_message': f"Error al ejecutar '{command_name}': {e}",
                    'exit_code': EXIT_INPUT_ERROR}
