from typing import Optional


class XProjectError(Exception):
    """Base class for every error raised by the toolkit.

    ``exit_code`` is what the command line reports when the error reaches it.
    """

    exit_code = 2

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# --------------------
# USAGE (exit 1)
# --------------------
class UsageError(XProjectError):
    exit_code = 1


# --------------------
# DATA (exit 2)
# --------------------
class DataError(XProjectError):
    exit_code = 2


class CorpusError(DataError):
    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyResultError(CorpusError):
    pass


class AnnotationError(DataError):
    def __init__(self, message: str, position: Optional[int] = None):
        if position is not None:
            message = f"{message} (at character {position})"
        super().__init__(message)
        self.position = position


class MarkerCollisionError(DataError):
    pass


class OntologyError(DataError):
    def __init__(
        self,
        message: str,
        domain: Optional[str] = None,
        intent: Optional[str] = None,
        row: Optional[int] = None,
    ):
        where = "/".join(p for p in (domain, intent) if p)
        if row is not None:
            where = f"{where} row {row}" if where else f"row {row}"
        super().__init__(f"{where}: {message}" if where else message)
        self.domain = domain
        self.intent = intent
        self.row = row


class ProjectionError(DataError):
    pass


class EvaluationError(DataError):
    pass


# --------------------
# BACKEND (exit 3)
# --------------------
class BackendError(XProjectError):
    exit_code = 3


class TranslationError(BackendError):
    pass


class EmptyTranslationError(TranslationError):
    pass


class RemoteStatusError(TranslationError):
    def __init__(self, status: int, body: str):
        excerpt = (body or "")[:200]
        super().__init__(f"translation service answered {status}: {excerpt}")
        self.status = status
        self.body_excerpt = excerpt


class BackendUnavailableError(TranslationError):
    pass


class SpanTranslationError(TranslationError):
    """A span surface failed after its masked sentence was translated."""

    def __init__(self, surface: str, cause: XProjectError, translated_masked: Optional[str] = None):
        super().__init__(f"span {surface!r}: {cause.message}")
        self.surface = surface
        self.cause = cause
        self.translated_masked = translated_masked
