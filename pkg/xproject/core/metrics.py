import logging
from typing import Dict, Any, Optional

logger = logging.getLogger(__name__)

try:
    from opentelemetry import metrics as ot_metrics
except Exception:
    ot_metrics = None


METER_NAME = "xproject"


# ---------------- NO-OP FALLBACK TYPES -------------------

class _NoopCounter:
    def add(self, value: float = 1.0, attributes: Dict[str, Any] = None):
        return None


class _NoopHistogram:
    def record(self, value: float, attributes: Dict[str, Any] = None):
        return None


class MetricsManager:
    """
    Counters and histograms for run accounting, with no-op fallbacks when
    OpenTelemetry metrics are not configured.

    Without a meter provider the global OTel API is used, which is itself a
    no-op until `setup_otel` registers a provider.
    """

    def __init__(self, meter_provider=None):
        self.meter_provider = meter_provider
        self._instruments: Dict[str, Any] = {}

    def get_meter(self):
        try:
            if self.meter_provider:
                return self.meter_provider.get_meter(METER_NAME)
            if ot_metrics:
                return ot_metrics.get_meter(METER_NAME)
        except Exception as e:
            logger.debug("get_meter failed: %s", e, exc_info=True)
        return None

    def _get_or_create(self, name: str, inst_type: str, unit: Optional[str] = None):
        existing = self._instruments.get(name)
        if existing is not None:
            return existing

        meter = self.get_meter()
        try:
            if meter:
                kwargs = {"unit": unit} if unit else {}
                creator = {
                    "counter": meter.create_counter,
                    "histogram": meter.create_histogram,
                }[inst_type]
                inst = creator(name, **kwargs)
                self._instruments[name] = inst
                return inst
        except Exception as e:
            logger.debug("Failed to create %s '%s': %s", inst_type, name, e, exc_info=True)

        noop = _NoopCounter() if inst_type == "counter" else _NoopHistogram()
        self._instruments[name] = noop
        return noop

    # ------------------- COUNTERS ---------------------

    def increment_counter(self, name: str, value: float = 1.0, attributes: Dict[str, Any] = None):
        inst = self._get_or_create(name, "counter")
        try:
            inst.add(value, attributes or {})
        except Exception:
            logger.debug("Error incrementing counter '%s'", name, exc_info=True)

    # ------------------- HISTOGRAM ----------------------

    def record_histogram(self, name: str, value: float, attributes: Dict[str, Any] = None, unit=None):
        inst = self._get_or_create(name, "histogram", unit=unit)
        try:
            inst.record(value, attributes or {})
        except Exception:
            logger.debug("Error recording histogram '%s'", name, exc_info=True)

    # --------------------- FLUSH ------------------------

    def flush(self):
        try:
            if self.meter_provider and hasattr(self.meter_provider, "shutdown"):
                self.meter_provider.shutdown()
        except Exception:
            logger.debug("Error flushing meter provider", exc_info=True)


_default_metrics = MetricsManager()


def run_metrics() -> MetricsManager:
    """Metrics manager of the active collector, or one bound to the global OTel API."""
    from xproject.collector import get_active_collector

    collector = get_active_collector()
    if collector is not None:
        return collector.metrics
    return _default_metrics
