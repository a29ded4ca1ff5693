import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple, Union

from xproject.errors import DataError, EmptyTranslationError, XProjectError
from xproject.core.metrics import run_metrics

logger = logging.getLogger(__name__)

CacheKey = Tuple[str, str, str, str]


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    src: str
    tgt: str
    # position in the submitting batch; seeds the deterministic mocks
    seq: int = 0

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise DataError("translation request text is empty")
        if self.src == self.tgt:
            raise DataError(f"source and target language are both {self.src!r}")


@dataclass(frozen=True)
class TranslationResult:
    text: str
    backend_id: str
    cached: bool = False
    ok = True


@dataclass(frozen=True)
class TranslationFailure:
    request: TranslationRequest
    error: XProjectError
    ok = False

    @property
    def text(self) -> None:
        return None


TranslationOutcome = Union[TranslationResult, TranslationFailure]


class TranslationBackend(ABC):
    """A translation system: text in the source language to text in the target.

    Implementations must be callable from several threads at once.
    """

    backend_id: str = "backend"

    @abstractmethod
    def translate_text(self, request: TranslationRequest) -> str:
        ...

    def translate(self, request: TranslationRequest) -> TranslationResult:
        text = self.translate_text(request)
        if text is None or not text.strip():
            raise EmptyTranslationError(
                f"{self.backend_id} returned an empty translation for {request.text[:60]!r}"
            )
        return TranslationResult(text=text, backend_id=self.backend_id)

    def cache_key(self, request: TranslationRequest) -> CacheKey:
        return (self.backend_id, request.src, request.tgt, request.text)


def translate(backend: TranslationBackend, req: TranslationRequest) -> TranslationResult:
    try:
        result = backend.translate(req)
    except XProjectError:
        run_metrics().increment_counter(
            "xproject.translator.requests", 1, {"backend": backend.backend_id, "outcome": "error"}
        )
        raise
    run_metrics().increment_counter(
        "xproject.translator.requests",
        1,
        {"backend": backend.backend_id, "outcome": "success", "cached": result.cached},
    )
    return result
