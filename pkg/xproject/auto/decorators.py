"""
Operation instrumentation.

Every public toolkit operation is wrapped by ``@instrumented(name)`` and
produces the same telemetry shape:

- span ``xproject.<name>`` with code attributes and the outcome
- counter ``xproject.<name>.calls`` (outcome=success|error)
- histogram ``xproject.<name>.duration_ms``

The active TelemetryCollector is used when one exists; otherwise the
global OpenTelemetry API is used, which is a no-op until providers are
registered. Telemetry failures never change what the wrapped function
returns or raises.
"""

import functools
import logging
import time
from typing import Any, Callable, Dict, TypeVar

from xproject.core.metrics import run_metrics
from xproject.core.traces import TracesManager

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def _resolve_traces() -> TracesManager:
    from xproject.collector import get_active_collector

    collector = get_active_collector()
    if collector is not None:
        return collector.traces
    return TracesManager()


def _execute_with_telemetry(callable_fn, span_name: str, base_attrs: Dict[str, Any]):
    traces = _resolve_traces()
    meters = run_metrics()
    counter_name = f"{span_name}.calls"
    histogram_name = f"{span_name}.duration_ms"

    start = time.perf_counter()
    with traces.start_span(span_name, attributes=base_attrs) as span:
        try:
            result = callable_fn()
        except Exception as e:
            duration = (time.perf_counter() - start) * 1000
            attrs = {**base_attrs, "outcome": "error", "exception.type": type(e).__name__}
            traces.record_exception(span, e)
            meters.increment_counter(counter_name, 1, attrs)
            meters.record_histogram(histogram_name, duration, attrs, unit="ms")
            logger.debug("%s failed after %.1f ms: %s", span_name, duration, e)
            raise

        duration = (time.perf_counter() - start) * 1000
        span.set_attribute("duration_ms", duration)
        attrs = {**base_attrs, "outcome": "success"}
        meters.increment_counter(counter_name, 1, attrs)
        meters.record_histogram(histogram_name, duration, attrs, unit="ms")
        return result


def instrumented(name: str) -> Callable[[F], F]:
    def dec(fn: F) -> F:
        span_name = f"xproject.{name}"
        base_attrs = {
            "code.function": fn.__name__,
            "code.module": fn.__module__,
        }

        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            return _execute_with_telemetry(lambda: fn(*args, **kwargs), span_name, base_attrs)

        return wrapper  # type: ignore[return-value]
    return dec
