from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Mapping

from .cache import DiskCache, cache_key
from .providers import Provider
from .types import (ChatRequest, ChatResponse, ConfigurationError, ProviderError,
                    TransientError, TransportError)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 5
    backoff: float = 1.0  # seconds; doubled per attempt
    max_parallel: int = 8


class Gateway:
    """Single entry point for every model call in the harness.

    ``providers`` maps model ids to providers; the key ``"*"`` is the
    fallback. Responses are cached on disk by :func:`cache_key` when a cache
    is given.
    """

    def __init__(self, providers: Mapping[str, Provider] | Provider,
                 cache: DiskCache | None = None, policy: RetryPolicy | None = None,
                 sleep=time.sleep):
        if not isinstance(providers, Mapping):
            providers = {"*": providers}
        self.providers = dict(providers)
        self.cache = cache
        self.policy = policy or RetryPolicy()
        self._slots = threading.BoundedSemaphore(max(1, self.policy.max_parallel))
        self._sleep = sleep
        self._stats_lock = threading.Lock()
        self.network_calls = 0
        self.cache_hits = 0

    def provider_for(self, model_id: str) -> Provider:
        provider = self.providers.get(model_id) or self.providers.get("*")
        if provider is None:
            raise ConfigurationError(f"no provider configured for model {model_id!r}")
        return provider

    def complete_chat(self, request: ChatRequest, policy: RetryPolicy | None = None) -> ChatResponse:
        policy = policy or self.policy
        provider = self.provider_for(request.model_id)
        key = cache_key(request)
        cached = self.cache.get(key) if self.cache is not None else None
        if cached is not None:
            with self._stats_lock:
                self.cache_hits += 1
            response = cached
        else:
            with self._slots:
                response = self._send_with_retries(provider, request, policy)
            self._check_contract(request, response)
            if self.cache is not None:
                self.cache.put(key, request, response)
        if request.response_format == "structured" and not response.tool_calls:
            response.json_payload()  # raises FormatError carrying the raw text
        return response

    def _send_with_retries(self, provider: Provider, request: ChatRequest,
                           policy: RetryPolicy) -> ChatResponse:
        attempt = 0
        while True:
            with self._stats_lock:
                self.network_calls += 1
            try:
                return provider.send(request)
            except TransientError as exc:
                if attempt >= policy.max_retries:
                    raise TransportError(
                        f"{request.model_id}: giving up after {attempt + 1} attempts ({exc})") from exc
                delay = policy.backoff * (2 ** attempt)
                if exc.retry_after is not None:
                    delay = max(delay, exc.retry_after)
                log.warning("transient failure from %s (%s); retry %d in %.2fs",
                            provider.name, exc, attempt + 1, delay)
                if delay > 0:
                    self._sleep(delay)
                attempt += 1

    @staticmethod
    def _check_contract(request: ChatRequest, response: ChatResponse) -> None:
        if response.is_empty:
            raise ProviderError(f"{request.model_id}: empty response payload")
        allowed = request.tool_names()
        unknown = [c.name for c in response.tool_calls if c.name not in allowed]
        if unknown:
            raise ProviderError(f"{request.model_id}: tool calls outside the request schemas: {unknown}")
