import logging
import sys

import numpy as np

from velox_core.utils.logger import PlainTextTraceFormatter, TraceChangeFilter


def _record(message, trace_id=None, data=None, exc_info=None):
    record = logging.LogRecord("VeloxLogger", logging.INFO, __file__, 1, message, None, exc_info)
    if trace_id is not None:
        record.trace_id = trace_id
    if data is not None:
        record.data = data
    return record


class TestTraceChangeFilter:
    def test_marks_only_changes(self):
        trace_filter = TraceChangeFilter()
        flags = []
        for trace_id in ("cycle-00001", "cycle-00001", None, "plan-performance-0.0"):
            record = _record("x", trace_id)
            trace_filter.filter(record)
            flags.append(record.new_trace)
        assert flags == [True, False, False, True]

    def test_missing_trace_gets_placeholder(self):
        record = _record("x")
        TraceChangeFilter().filter(record)
        assert record.trace_id == 'N/A'


class TestPlainTextTraceFormatter:
    def _format(self, record):
        TraceChangeFilter().filter(record)
        return PlainTextTraceFormatter(fmt='%(message)s').format(record)

    def test_separator_names_the_cycle(self):
        text = self._format(_record("hola", "cycle-00042"))
        assert "=== CICLO | Trace ID: cycle-00042 ===" in text
        assert text.rstrip().endswith("hola")

    def test_numpy_data_is_serialized(self):
        text = self._format(_record("plan", "plan-performance-0.0", data={'v': np.array([1.0, 2.0])}))
        assert "[EXTRA DATA]" in text
        assert "1.0" in text and "2.0" in text

    def test_exception_follows_data(self):
        try:
            raise ZeroDivisionError("división")
        except ZeroDivisionError:
            record = _record("fallo", "cycle-00001", data={'input': 0}, exc_info=sys.exc_info())
        text = self._format(record)
        assert text.index("[EXTRA DATA]") < text.index("[EXCEPTION]")
        assert text.count("ZeroDivisionError: división") == 1
