import logging
import threading
from typing import Optional, List

from .config import TelemetryConfig
from .core.otel_setup import setup_otel
from .core.traces import TracesManager
from .core.metrics import MetricsManager
from .core.logs import LogsManager
from .auto.library_instrumentor import LibraryInstrumentor

logger = logging.getLogger(__name__)

_active: Optional["TelemetryCollector"] = None
_active_lock = threading.Lock()


class TelemetryCollector:
    """
    Owns the tracing, metrics and logging managers for one command run.

    Creating a collector registers it as the active one; instrumented
    operations pick it up through ``get_active_collector()``.
    """

    def __init__(self, config: Optional[TelemetryConfig] = None, libraries: Optional[List[str]] = None):
        self.config = config or TelemetryConfig()

        providers = setup_otel(self.config)
        self.tracer_provider = providers.get("tracer_provider")
        self.meter_provider = providers.get("meter_provider")
        self.logger_provider = providers.get("logger_provider")
        self._log_handler = providers.get("log_handler")

        self._traces = TracesManager(self.tracer_provider)
        self._metrics = MetricsManager(self.meter_provider)
        self._logs = LogsManager(self.config, logger_provider=self.logger_provider)

        self._lib_instrumentor = LibraryInstrumentor()
        if self.config.auto_instrument and self.config.enable_traces and libraries:
            try:
                self._lib_instrumentor.instrument(libraries)
            except Exception:
                logger.debug("Library auto-instrumentation failed", exc_info=True)

        _set_active(self)

    # ---------------- PROPERTIES ----------------
    @property
    def traces(self) -> TracesManager:
        return self._traces

    @property
    def metrics(self) -> MetricsManager:
        return self._metrics

    @property
    def logs(self) -> LogsManager:
        return self._logs

    def instrumented_libraries(self):
        return self._lib_instrumentor.status()

    # ---------------- LIFECYCLE ----------------
    def shutdown(self):
        """Flush every signal and deregister."""
        for lib in list(self._lib_instrumentor.status()):
            self._lib_instrumentor.uninstrument(lib)
        try:
            if self.tracer_provider is not None:
                self.tracer_provider.force_flush()
                self.tracer_provider.shutdown()
        except Exception:
            logger.debug("Error flushing tracer provider", exc_info=True)
        self._metrics.flush()
        if self._log_handler is not None:
            logging.getLogger("xproject").removeHandler(self._log_handler)
            self._log_handler = None
        self._logs.flush()
        _set_active(None, expected=self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()
        return False


def _set_active(collector: Optional[TelemetryCollector], expected: Optional[TelemetryCollector] = None):
    global _active
    with _active_lock:
        if expected is not None and _active is not expected:
            return
        _active = collector


def get_active_collector() -> Optional[TelemetryCollector]:
    return _active
