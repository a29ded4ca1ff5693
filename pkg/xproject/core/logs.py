import logging
import socket
import time
from enum import Enum
from typing import Dict, Any, Optional

from opentelemetry._logs import SeverityNumber
from opentelemetry.sdk._logs import LoggerProvider
from opentelemetry.trace import get_current_span

from xproject.config import TelemetryConfig
from xproject.utils.masking import mask_sensitive


class LogLevel(Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


_SEVERITY = {
    LogLevel.DEBUG: SeverityNumber.DEBUG,
    LogLevel.INFO: SeverityNumber.INFO,
    LogLevel.WARNING: SeverityNumber.WARN,
    LogLevel.ERROR: SeverityNumber.ERROR,
}


class LogsManager:
    """
    Structured run logging.

    - OTel log records when a logger provider is configured
    - Python logger fallback otherwise (the CLI sends it to stderr)
    - Sensitive attribute masking (tokens never reach a log line)
    - trace_id/span_id injection for correlation with spans
    """

    def __init__(self, config: TelemetryConfig, logger_provider: Optional[LoggerProvider] = None):
        self.config = config
        self.hostname = socket.gethostname()
        self.otel_logger_provider = logger_provider
        self.otel_logger = None
        if logger_provider is not None:
            try:
                self.otel_logger = logger_provider.get_logger(config.service_name or "xproject")
            except Exception:
                self.otel_logger = None

        self.python_logger = logging.getLogger("xproject.run")

    # --------------------------------------------------------
    # Context helpers
    # --------------------------------------------------------
    def _get_trace_context(self) -> Dict[str, str]:
        try:
            ctx = get_current_span().get_span_context()
            if ctx and ctx.trace_id != 0:
                return {
                    "trace_id": f"{ctx.trace_id:032x}",
                    "span_id": f"{ctx.span_id:016x}",
                }
        except Exception:
            pass
        return {}

    def _extra_context(self) -> Dict[str, Any]:
        return {
            "service.name": self.config.service_name,
            "host.name": self.hostname,
            "timestamp": int(time.time() * 1000),
        }

    def _mask(self, attributes: Dict[str, Any]) -> Dict[str, Any]:
        return mask_sensitive(attributes or {}, self.config.sensitive_fields or [])

    # --------------------------------------------------------
    # Main Logging Method
    # --------------------------------------------------------
    def log(self, level: LogLevel, message: str, attributes: Optional[Dict[str, Any]] = None):
        attributes = self._mask(dict(attributes or {}))
        attributes.update(self._get_trace_context())

        if self.otel_logger:
            try:
                self.otel_logger.emit(
                    body=message,
                    severity_number=_SEVERITY[level],
                    severity_text=level.value,
                    attributes={**attributes, **self._extra_context()},
                )
                return
            except Exception:
                pass

        rendered = " ".join(f"{k}={v}" for k, v in sorted(attributes.items()))
        getattr(self.python_logger, level.value.lower(), self.python_logger.info)(
            f"{message} {rendered}".rstrip(), extra={"otel": attributes}
        )

    def debug(self, msg, attributes=None): self.log(LogLevel.DEBUG, msg, attributes)
    def info(self, msg, attributes=None): self.log(LogLevel.INFO, msg, attributes)
    def warning(self, msg, attributes=None): self.log(LogLevel.WARNING, msg, attributes)
    def error(self, msg, attributes=None): self.log(LogLevel.ERROR, msg, attributes)

    # --------------------------------------------------------
    # Flush
    # --------------------------------------------------------
    def flush(self, timeout_seconds: float = 5.0):
        try:
            if self.otel_logger_provider and hasattr(self.otel_logger_provider, "force_flush"):
                self.otel_logger_provider.force_flush(int(timeout_seconds * 1000))
        except Exception:
            pass

        try:
            if self.otel_logger_provider and hasattr(self.otel_logger_provider, "shutdown"):
                self.otel_logger_provider.shutdown()
        except Exception:
            pass

        for handler in getattr(self.python_logger, "handlers", []):
            try:
                handler.flush()
            except Exception:
                pass
