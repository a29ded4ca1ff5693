import logging
import sys
from typing import Dict, Any

from opentelemetry import trace, metrics
from opentelemetry._logs import set_logger_provider
from opentelemetry.sdk.resources import Resource

from opentelemetry.sdk.trace import TracerProvider, SpanLimits
from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter

from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import (
    PeriodicExportingMetricReader,
    ConsoleMetricExporter,
)

from opentelemetry.sdk._logs import LoggerProvider, LoggingHandler
from opentelemetry.sdk._logs.export import (
    BatchLogRecordProcessor,
    ConsoleLogExporter,
)

from ..config import TelemetryConfig

logger = logging.getLogger(__name__)


OTLP_PROTOCOL = "http/protobuf"


def otlp_exporters(config: TelemetryConfig):
    """
    OTLP/HTTP exporters for the configured endpoint, or three Nones when no
    endpoint is set, the protocol is not http/protobuf, or the `exporters`
    extra is missing. Callers fall back to console exporters on None.
    """
    if not config.collector_endpoint:
        return None, None, None
    if config.protocol != OTLP_PROTOCOL:
        logger.warning("OTLP protocol %r is not supported (only %s), exporting to console",
                       config.protocol, OTLP_PROTOCOL)
        return None, None, None
    try:
        from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
        from opentelemetry.exporter.otlp.proto.http.metric_exporter import OTLPMetricExporter
        from opentelemetry.exporter.otlp.proto.http._log_exporter import OTLPLogExporter
    except ImportError as e:
        logger.warning("OTLP exporters unavailable, falling back to console: %s", e)
        return None, None, None

    base = config.collector_endpoint.rstrip("/")
    headers = config.headers or {}
    return (
        OTLPSpanExporter(endpoint=f"{base}/v1/traces", headers=headers),
        OTLPMetricExporter(endpoint=f"{base}/v1/metrics", headers=headers),
        OTLPLogExporter(endpoint=f"{base}/v1/logs", headers=headers),
    )


def setup_otel(config: TelemetryConfig) -> Dict[str, Any]:
    """
    Build the providers for every enabled signal:
    - Traces  → OTLP (or console on stderr)
    - Metrics → OTLP (or console on stderr)
    - Logs    → OTLP (or console on stderr), bridged from Python logging

    Disabled signals get no provider; the OpenTelemetry API then hands out
    no-op tracers and meters.
    """

    providers = {
        "tracer_provider": None,
        "meter_provider": None,
        "logger_provider": None,
        "log_handler": None,
    }

    if not config.any_enabled:
        return providers

    resource = Resource.create({
        "service.name": config.service_name,
        **(config.resource_attributes or {}),
    })

    span_exporter, metric_exporter, log_exporter = otlp_exporters(config)

    # =========================================================
    # TRACES
    # =========================================================
    if config.enable_traces:
        try:
            tracer_provider = TracerProvider(
                resource=resource,
                span_limits=SpanLimits(max_attributes=128, max_events=256, max_links=128),
            )
            tracer_provider.add_span_processor(
                BatchSpanProcessor(
                    span_exporter or ConsoleSpanExporter(out=sys.stderr),
                    schedule_delay_millis=config.export_interval_ms,
                    max_export_batch_size=config.max_export_batch_size,
                    max_queue_size=config.max_queue_size,
                )
            )
            trace.set_tracer_provider(tracer_provider)
            providers["tracer_provider"] = tracer_provider
        except Exception:
            logger.exception("Trace setup failed")

    # =========================================================
    # METRICS
    # =========================================================
    if config.enable_metrics:
        try:
            meter_provider = MeterProvider(
                resource=resource,
                metric_readers=[
                    PeriodicExportingMetricReader(
                        exporter=metric_exporter or ConsoleMetricExporter(out=sys.stderr),
                        export_interval_millis=config.export_interval_ms,
                    )
                ],
            )
            metrics.set_meter_provider(meter_provider)
            providers["meter_provider"] = meter_provider
        except Exception:
            logger.exception("Metric setup failed")

    # =========================================================
    # LOGS
    # =========================================================
    if config.enable_logs:
        try:
            logger_provider = LoggerProvider(resource=resource)
            logger_provider.add_log_record_processor(
                BatchLogRecordProcessor(log_exporter or ConsoleLogExporter(out=sys.stderr))
            )
            set_logger_provider(logger_provider)

            # bridge the package's Python loggers into the provider
            handler = LoggingHandler(level=logging.NOTSET, logger_provider=logger_provider)
            logging.getLogger("xproject").addHandler(handler)

            providers["logger_provider"] = logger_provider
            providers["log_handler"] = handler
        except Exception:
            logger.exception("Log setup failed")

    return providers
