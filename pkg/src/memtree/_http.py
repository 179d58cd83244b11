"""Minimal JSON-over-HTTP POST with retries, shared by the remote providers."""

import json
import logging
import os
import threading
import time

import httpx

from .errors import ProtocolError, ProviderUnavailable

logger = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class JsonPoster:
    def __init__(self, url, api_key_env=None, timeout=30.0, max_retries=3,
                 backoff=0.5, max_in_flight=8, client=None):
        self.url = url
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def post(self, payload):
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(self.url, content=body, headers=self._headers())
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                logger.warning("POST %s failed (attempt %d): %s", self.url, attempt + 1, last)
                continue
            if resp.status_code in RETRY_STATUS:
                last = f"HTTP {resp.status_code}"
                logger.warning("POST %s returned %s (attempt %d)", self.url, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ProviderUnavailable(f"{self.url} returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{self.url} returned non-JSON body") from exc
        raise ProviderUnavailable(f"{self.url} unavailable after {self.max_retries + 1} attempts ({last})")
