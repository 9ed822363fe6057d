import logging
import functools
from time import perf_counter, time

performance_logger = logging.getLogger("performance")
runs_logger = logging.getLogger("runs")


class LoggingMixin:
    """Mixin to add logging to classes"""

    @property
    def logger(self):
        if not hasattr(self, "_logger"):
            module = self.__module__
            class_name = self.__class__.__name__
            self._logger = logging.getLogger(f"{module}.{class_name}")
        return self._logger

    def log_info(self, message, **kwargs):
        self.logger.info(message, extra={"data": kwargs})


def log_execution_time(logger_name="performance", level=logging.DEBUG):
    """Decorator for measuring execution time of functions"""

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            logger = logging.getLogger(logger_name)
            start_time = perf_counter()

            try:
                return func(*args, **kwargs)
            finally:
                execution_time = perf_counter() - start_time
                logger.log(
                    level,
                    f"Function {func.__name__} executed in {execution_time:.4f} seconds",
                    extra={
                        "function_name": func.__name__,
                        "execution_time": execution_time,
                    },
                )

        return wrapper

    return decorator


def run_log(outcome, scenario=None, **kwargs):
    """
    Helper for the per-run audit trail

        Args:
            outcome: Run outcome (WITHDRAW_COMPLETED, HALTED_TIMEOUT, ...)
            scenario: Name of the scenario that was run
            **kwargs: Additional metrics
    """
    run_data = {"outcome": outcome, "scenario": scenario, **kwargs}
    runs_logger.info(f"{outcome} - {scenario or 'adhoc'}", extra={"run_data": run_data})


class StructuredLogger:
    """Structured logger for simulation components"""

    def __init__(self, component_name, **default_fields):
        self.logger = logging.getLogger(f"apps.{component_name}")
        self.default_fields = default_fields
        self.component_name = component_name

    def log(self, level, event, **fields):
        """Structured log"""
        log_data = {
            "component": self.component_name,
            "event": event,
            "timestamp": time(),
            **self.default_fields,
            **fields,
        }

        log_message = f"{event} - {fields.get('message', '')}".strip(" -")
        extra = {"log_data": log_data}
        if "cycle" in fields:
            extra["cycle"] = fields["cycle"]
        if "scenario" in self.default_fields:
            extra["scenario"] = self.default_fields["scenario"]

        self.logger.log(logging.getLevelName(level), log_message, extra=extra)

    def event(self, event_type, **fields):
        """Shortcut for events"""
        self.log("INFO", event_type, **fields)

    def debug_event(self, event_type, **fields):
        """Shortcut for high-rate per-cycle events"""
        self.log("DEBUG", event_type, **fields)

    def error_event(self, event_type, error=None, **fields):
        """Shortcut for errors"""
        if error:
            fields["error"] = str(error)
            fields["error_type"] = type(error).__name__
        self.log("ERROR", event_type, **fields)
