import hashlib
import json
import logging
import os
import threading
from typing import Dict, Optional

from xproject.core.metrics import run_metrics
from xproject.translator.base import (
    CacheKey,
    TranslationBackend,
    TranslationRequest,
    TranslationResult,
)
from xproject.utils.records import dumps, write_records

logger = logging.getLogger(__name__)


def key_hash(key: CacheKey) -> str:
    return hashlib.sha256("\x1f".join(key).encode("utf-8")).hexdigest()


class TranslationCache:
    """
    Persistent translation cache.

    On disk: an append-only log of JSON lines ``{key, backend, src, tgt,
    input, output}``; the log is compacted (last writer wins) when opened.
    A corrupt log is set aside as ``<path>.corrupt`` and the cache starts
    empty. Without a path the cache lives in memory only.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._entries: Dict[str, Dict[str, str]] = {}
        self._lock = threading.Lock()
        self._fh = None
        if path:
            self._open()

    # --------------------------------------------------------
    def _open(self):
        if os.path.exists(self.path):
            try:
                self._entries = self._read(self.path)
            except (ValueError, KeyError, TypeError, UnicodeDecodeError) as e:
                corrupt = f"{self.path}.corrupt"
                logger.warning("translation cache %s is corrupt (%s); moved to %s, starting empty",
                               self.path, e, corrupt)
                os.replace(self.path, corrupt)
                self._entries = {}
            write_records(self.path, self._entries.values())
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")

    @staticmethod
    def _read(path: str) -> Dict[str, Dict[str, str]]:
        entries: Dict[str, Dict[str, str]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                key = (record["backend"], record["src"], record["tgt"], record["input"])
                if not isinstance(record["output"], str) or record["key"] != key_hash(key):
                    raise ValueError("record does not match its key hash")
                entries[record["key"]] = record
        return entries

    # --------------------------------------------------------
    def lookup(self, key: CacheKey) -> Optional[str]:
        with self._lock:
            record = self._entries.get(key_hash(key))
        return None if record is None else record["output"]

    def store(self, key: CacheKey, output: str) -> None:
        digest = key_hash(key)
        backend, src, tgt, text = key
        record = {"key": digest, "backend": backend, "src": src, "tgt": tgt,
                  "input": text, "output": output}
        with self._lock:
            current = self._entries.get(digest)
            if current is not None and current["output"] == output:
                return
            self._entries[digest] = record
            if self._fh is not None:
                self._fh.write(dumps(record) + "\n")
                self._fh.flush()

    def __len__(self) -> int:
        return len(self._entries)

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class CachedBackend(TranslationBackend):
    """Read-through cache in front of another backend."""

    def __init__(self, backend: TranslationBackend, cache: TranslationCache):
        self.backend = backend
        self.cache = cache
        self.backend_id = backend.backend_id

    def translate_text(self, request: TranslationRequest) -> str:
        return self.translate(request).text

    def translate(self, request: TranslationRequest) -> TranslationResult:
        key = self.backend.cache_key(request)
        hit = self.cache.lookup(key)
        if hit is not None:
            run_metrics().increment_counter("xproject.translator.cache", 1, {"result": "hit"})
            return TranslationResult(text=hit, backend_id=self.backend_id, cached=True)
        run_metrics().increment_counter("xproject.translator.cache", 1, {"result": "miss"})
        result = self.backend.translate(request)
        self.cache.store(key, result.text)
        return result
