import logging
import threading
import time
from typing import Callable, Optional

import requests

from xproject.core.metrics import run_metrics
from xproject.errors import BackendUnavailableError, RemoteStatusError, TranslationError
from xproject.translator.base import TranslationBackend, TranslationRequest

logger = logging.getLogger(__name__)


class RemoteBackend(TranslationBackend):
    """
    JSON-over-HTTP translation service client.

    Contract: ``POST <url>/translate`` with ``{"text", "src", "tgt"}``,
    answer ``{"text": ...}``; any non-2xx status is an error.

    Retries: transport errors and 5xx statuses are retried ``retries`` times
    after the first attempt, sleeping backoff, 2*backoff, 4*backoff
    (0.5 s / 1 s / 2 s by default). 4xx statuses fail at once.
    """

    def __init__(
        self,
        url: str,
        token: str = "",
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not url:
            raise TranslationError("remote backend needs a service URL")
        base = url.rstrip("/")
        self.endpoint = base if base.endswith("/translate") else f"{base}/translate"
        self.token = token
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._shared_session = session
        self._local = threading.local()
        self.backend_id = f"remote:{self.endpoint}"

    def _session(self) -> requests.Session:
        if self._shared_session is not None:
            return self._shared_session
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def _headers(self):
        headers = {"Content-Type": "application/json", "Accept": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def delays(self):
        return [self.backoff * (2 ** k) for k in range(self.retries)]

    def translate_text(self, request: TranslationRequest) -> str:
        payload = {"text": request.text, "src": request.src, "tgt": request.tgt}
        delays = self.delays()
        attempt = 0

        while True:
            try:
                resp = self._session().post(
                    self.endpoint, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as e:
                problem = f"transport error: {e}"
            else:
                if 200 <= resp.status_code < 300:
                    return self._parse(resp)
                if resp.status_code < 500:
                    raise RemoteStatusError(resp.status_code, resp.text)
                problem = f"status {resp.status_code}: {resp.text[:200]}"

            if attempt >= len(delays):
                raise BackendUnavailableError(
                    f"{self.endpoint} failed after {attempt + 1} attempts ({problem})"
                )
            run_metrics().increment_counter("xproject.translator.retries", 1, {"backend": self.backend_id})
            logger.warning(
                "translation attempt %d failed (%s); retrying in %.1fs",
                attempt + 1, problem, delays[attempt],
            )
            self._sleep(delays[attempt])
            attempt += 1

    def _parse(self, resp: requests.Response) -> str:
        try:
            data = resp.json()
        except ValueError:
            raise TranslationError(f"{self.endpoint} answered with non-JSON body: {resp.text[:200]}")
        text = data.get("text") if isinstance(data, dict) else None
        if not isinstance(text, str):
            raise TranslationError(f"{self.endpoint} answer has no 'text' string: {resp.text[:200]}")
        return text
