import json
import logging


# Keys passed through ``extra=`` that are copied verbatim into JSON records.
EXTRA_FIELDS = ("scenario", "cycle", "phase", "data", "log_data", "run_data")


class JSONFormatter(logging.Formatter):
    """Log formatter to JSON"""

    def format(self, record):
        log_data = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
            "message": record.getMessage(),
            "process": record.process,
        }

        # Add exception if exists
        if record.exc_info and record.exc_info[0] is not None:
            log_data["exception"] = {
                "type": record.exc_info[0].__name__,
                "message": str(record.exc_info[1]),
                "traceback": self.formatException(record.exc_info),
            }

        for key in EXTRA_FIELDS:
            if hasattr(record, key):
                log_data[key] = getattr(record, key)

        if hasattr(record, "execution_time"):
            log_data["execution_time"] = getattr(record, "execution_time")

        return json.dumps(log_data, ensure_ascii=False, default=str)


class CycleFormatter(logging.Formatter):
    """Prefixes simulation records with the scenario name and control cycle"""

    def format(self, record):
        record = logging.makeLogRecord(record.__dict__)
        scenario = getattr(record, "scenario", None)
        cycle = getattr(record, "cycle", None)
        if scenario is not None and cycle is not None:
            record.msg = f"[{scenario}#{cycle}] {record.msg}"
        elif scenario is not None:
            record.msg = f"[{scenario}] {record.msg}"
        return super().format(record)
