from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

from opentelemetry import trace
from opentelemetry.trace import Span, SpanKind, Status, StatusCode

TRACER_NAME = "xproject"


class TracesManager:
    """
    Span creation for a run. Without a tracer provider the global tracer is
    used, which stays a no-op until `setup_otel` registers one.
    """

    def __init__(self, tracer_provider=None):
        if tracer_provider is not None:
            self.tracer = tracer_provider.get_tracer(TRACER_NAME)
        else:
            self.tracer = trace.get_tracer(TRACER_NAME)

    @contextmanager
    def start_span(
        self,
        name: str,
        attributes: Optional[Dict[str, Any]] = None,
        kind: SpanKind = SpanKind.INTERNAL,
    ) -> Iterator[Span]:
        # exceptions are recorded by the caller through record_exception
        with self.tracer.start_as_current_span(
            name,
            attributes=attributes,
            kind=kind,
            record_exception=False,
            set_status_on_exception=False,
        ) as span:
            yield span

    @staticmethod
    def record_exception(span: Span, exception: BaseException) -> None:
        span.record_exception(exception)
        span.set_status(Status(StatusCode.ERROR, str(exception)))
