from .command_base import CommandArgument, VeloxCommand
from .command_manager import CommandManager

__all__ = ["CommandArgument", "CommandManager", "VeloxCommand"]
