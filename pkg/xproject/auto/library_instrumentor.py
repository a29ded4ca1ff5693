import logging
from typing import List, Dict

logger = logging.getLogger(__name__)


class LibraryInstrumentor:
    """
    Instruments the HTTP client libraries used by the remote translation
    backend so every POST /translate shows up as a client span.
    Instrumentors come from the optional `auto` extra; missing ones are skipped.
    """

    _INSTRUMENTOR_MAP = {
        "requests": ("opentelemetry.instrumentation.requests", "RequestsInstrumentor"),
        "urllib3": ("opentelemetry.instrumentation.urllib3", "URLLib3Instrumentor"),
    }

    def __init__(self):
        self._status: Dict[str, str] = {}

    def _load(self, lib: str):
        module_path, class_name = self._INSTRUMENTOR_MAP[lib]
        mod = __import__(module_path, fromlist=[class_name])
        return getattr(mod, class_name)()

    # --------------------------------------------------------------
    def instrument(self, libs: List[str]) -> Dict[str, bool]:
        results = {}

        for lib in libs:
            lib = lib.lower()

            if self._status.get(lib) == "instrumented":
                results[lib] = True
                continue

            if lib not in self._INSTRUMENTOR_MAP:
                logger.debug("No instrumentor mapped for %s", lib)
                results[lib] = False
                continue

            try:
                inst = self._load(lib)
                inst.instrument()
                self._status[lib] = "instrumented"
                logger.debug("Instrumented library: %s", lib)
                results[lib] = True
            except Exception as e:
                logger.debug("Failed to instrument %s: %s", lib, e, exc_info=True)
                results[lib] = False

        return results

    # --------------------------------------------------------------
    def uninstrument(self, lib: str) -> bool:
        lib = lib.lower()
        if self._status.get(lib) != "instrumented":
            return False
        try:
            self._load(lib).uninstrument()
            self._status[lib] = "uninstrumented"
            return True
        except Exception:
            return False

    def status(self) -> Dict[str, str]:
        return dict(self._status)
