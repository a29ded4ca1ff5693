from .decorators import instrumented
from .library_instrumentor import LibraryInstrumentor

__all__ = ["instrumented", "LibraryInstrumentor"]
