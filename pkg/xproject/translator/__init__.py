from .base import (
    TranslationBackend,
    TranslationFailure,
    TranslationOutcome,
    TranslationRequest,
    TranslationResult,
    translate,
)
from .batch import translate_batch, translate_outcome
from .cache import CachedBackend, TranslationCache
from .mocks import (
    FaultBackend,
    FaultEvent,
    FaultProfile,
    IdentityBackend,
    PseudoBackend,
    ReverseBackend,
    build_mock_backend,
)
from .remote import RemoteBackend

__all__ = [
    "CachedBackend",
    "FaultBackend",
    "FaultEvent",
    "FaultProfile",
    "IdentityBackend",
    "PseudoBackend",
    "RemoteBackend",
    "ReverseBackend",
    "TranslationBackend",
    "TranslationCache",
    "TranslationFailure",
    "TranslationOutcome",
    "TranslationRequest",
    "TranslationResult",
    "build_mock_backend",
    "translate",
    "translate_batch",
    "translate_outcome",
]
