# FILE: velox_core/utils/logger.py (LOGGER CON TRAZAS POR PLAN / CICLO)

import json
import logging
import logging.handlers
import os
import threading
from typing import Optional

import coloredlogs

NO_TRACE = 'N/A'
_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


# --- FILTRO: CAMBIO DE PLAN / CICLO ---
class TraceChangeFilter(logging.Filter):
    """
    Marca `record.new_trace` cuando aparece un trace_id distinto del anterior.
    Con `parallel_modes` los dos planes registran desde hilos distintos; el
    último trace visto se protege con un cerrojo.
    """

    def __init__(self):
        super().__init__()
        self._last_trace_id: Optional[str] = None
        self._lock = threading.Lock()

    def filter(self, record):
        record.trace_id = getattr(record, 'trace_id', NO_TRACE)
        with self._lock:
            record.new_trace = record.trace_id not in (NO_TRACE, self._last_trace_id)
            if record.new_trace:
                self._last_trace_id = record.trace_id
        return True


def _json_default(value):
    # escalares y arrays de numpy
    if hasattr(value, 'tolist'):
        return value.tolist()
    return str(value)


def _trace_kind(trace_id: str) -> str:
    if trace_id.startswith('cycle-'):
        return "CICLO"
    if trace_id.startswith('plan-') or trace_id.startswith('oracle-check-'):
        return "PLAN"
    return "TRAZA"


# --- FORMATEADOR DEL FICHERO ---
class PlainTextTraceFormatter(logging.Formatter):
    """
    Texto plano para el fichero de trazas: separador al empezar cada plan o
    ciclo, `data` como JSON indentado y la excepción al final.
    """

    def format(self, record):
        # La excepción va después de los datos: se formatea aparte
        exc_info, record.exc_info, record.exc_text = record.exc_info, None, None
        try:
            lines = [super().format(record)]
        finally:
            record.exc_info = exc_info

        data = getattr(record, 'data', None)
        if data is not None:
            dumped = json.dumps(data, indent=4, ensure_ascii=False, default=_json_default)
            lines.append("    [EXTRA DATA]\n    " + dumped.replace('\n', '\n    '))
        if exc_info:
            lines.append("[EXCEPTION]\n" + self.formatException(exc_info))

        message = "\n".join(lines)
        if not getattr(record, 'new_trace', False):
            return message
        rule = "=" * 120
        return f"\n{rule}\n=== {_trace_kind(record.trace_id)} | Trace ID: {record.trace_id} ===\n{rule}\n{message}"


# --- CONFIGURACIÓN CENTRAL ---
LOG_DIR = os.getenv("VELOX_LOG_DIR", os.path.join(os.path.dirname(__file__), '..', '..', 'velox_logs'))
LOG_FILE = "velox_trace.log"
LOG_PATH = os.path.join(LOG_DIR, LOG_FILE)
FILE_FMT = '%(asctime)s - %(levelname)s - [%(module)s:%(funcName)s:%(lineno)d] - (Trace: %(trace_id)s) - %(message)s'
CONSOLE_FMT = '%(asctime)s %(levelname)s [%(module)s] (Trace: %(trace_id)s) %(message)s'


def _console_level(default: str = "WARNING") -> str:
    level = os.getenv("VELOX_LOG", default).upper()
    return level if level in _LEVELS else default


def setup_logger(log_dir: str = LOG_DIR, console_level: Optional[str] = None) -> logging.Logger:
    """
    Logger global `VeloxLogger`: fichero rotado a medianoche (siempre DEBUG) y
    consola coloreada con el nivel de VELOX_LOG.
    """
    os.makedirs(log_dir, exist_ok=True)

    velox_logger = logging.getLogger("VeloxLogger")
    velox_logger.propagate = False
    velox_logger.handlers.clear()
    velox_logger.filters.clear()
    velox_logger.addFilter(TraceChangeFilter())

    file_handler = logging.handlers.TimedRotatingFileHandler(
        os.path.join(log_dir, LOG_FILE), when="midnight", interval=1, backupCount=7, encoding='utf-8'
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(PlainTextTraceFormatter(fmt=FILE_FMT))
    velox_logger.addHandler(file_handler)

    coloredlogs.install(level=console_level or _console_level(), logger=velox_logger, fmt=CONSOLE_FMT)
    # coloredlogs ajusta el nivel del logger al de la consola; el fichero necesita DEBUG
    velox_logger.setLevel(logging.DEBUG)
    return velox_logger


def set_console_level(level: str):
    """Cambia el nivel de la consola sin tocar el fichero de trazas."""
    for handler in logger.handlers:
        if not isinstance(handler, logging.handlers.TimedRotatingFileHandler):
            handler.setLevel(level.upper())


# --- Instancia Global ---
logger = setup_logger()
