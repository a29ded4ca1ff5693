import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

from xproject.auto.decorators import instrumented
from xproject.errors import TranslationError, UsageError, XProjectError
from xproject.translator.base import (
    TranslationBackend,
    TranslationFailure,
    TranslationOutcome,
    TranslationRequest,
    translate,
)
from xproject.translator.cache import CachedBackend, TranslationCache

logger = logging.getLogger(__name__)


def translate_outcome(backend: TranslationBackend, req: TranslationRequest) -> TranslationOutcome:
    """Translate one request; any exception comes back as a TranslationFailure."""
    try:
        return translate(backend, req)
    except XProjectError as e:
        return TranslationFailure(req, e)
    except Exception as e:  # any other exception is a failed position
        logger.debug("backend %s raised %r", backend.backend_id, e, exc_info=True)
        return TranslationFailure(req, TranslationError(f"{type(e).__name__}: {e}"))


@instrumented("translator.translate_batch")
def translate_batch(
    backend: TranslationBackend,
    reqs: Sequence[TranslationRequest],
    max_in_flight: int = 1,
    cache: Optional[TranslationCache] = None,
) -> List[TranslationOutcome]:
    """Translate every request; outcome ``i`` always belongs to request ``i``.

    At most ``max_in_flight`` requests are outstanding. A failing request
    yields a TranslationFailure in its slot and the rest carry on.
    """
    if not isinstance(max_in_flight, int) or max_in_flight < 1:
        raise UsageError(f"max_in_flight must be a positive integer, got {max_in_flight!r}")
    if cache is not None and not isinstance(backend, CachedBackend):
        backend = CachedBackend(backend, cache)

    if max_in_flight == 1 or len(reqs) <= 1:
        return [translate_outcome(backend, req) for req in reqs]

    with ThreadPoolExecutor(max_workers=min(max_in_flight, len(reqs)),
                            thread_name_prefix="xproject-mt") as pool:
        return list(pool.map(lambda req: translate_outcome(backend, req), reqs))
