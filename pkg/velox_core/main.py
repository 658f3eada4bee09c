from dotenv import load_dotenv

load_dotenv()

import argparse
import json
import sys
from typing import List, Optional

from .commands import CommandManager
from .commands.command_base import COMMON_ARGUMENTS, CommandArgument
from .utils.logger import logger, set_console_level

_TYPES = {'str': str, 'int': int, 'float': float}


def _add_argument(parser: argparse.ArgumentParser, argument: CommandArgument):
    if argument.kind == 'flag':
        parser.add_argument(argument.flag, dest=argument.dest, action='store_true', help=argument.help)
        return
    parser.add_argument(argument.flag, dest=argument.dest, type=_TYPES[argument.kind], required=argument.required,
                        default=argument.default, choices=argument.choices, help=argument.help)


def build_parser(manager: CommandManager) -> argparse.ArgumentParser:
    """Un sub-parser por comando descubierto, con los argumentos comunes y los propios."""
    parser = argparse.ArgumentParser(prog="velox", description="Planificador de velocidad de tiempo mínimo mpSQP.")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in manager.get_command_names():
        command = manager.commands[name]
        sub = subparsers.add_parser(name, help=command.description, description=command.description)
        for argument in COMMON_ARGUMENTS + command.get_arguments():
            _add_argument(sub, argument)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    manager = CommandManager()
    args = vars(build_parser(manager).parse_args(argv))
    command_name = args.pop('command')
    if args.get('verbose'):
        set_console_level('DEBUG')

    logger.info(f"Ejecutando el comando '{command_name}'.", extra={'data': args})
    response = manager.execute_command(command_name, **args)
    print(json.dumps(response, indent=2, default=str, ensure_ascii=False))
    return int(response.get('exit_code', 1))


if __name__ == "__main__":
    sys.exit(main())
