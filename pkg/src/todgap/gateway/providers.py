"""Chat providers: a remote chat-completions endpoint and a scripted stand-in."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence, Union

import httpx

from .types import (ChatRequest, ChatResponse, GatewayError, ProviderError, ToolCall,
                    TransientError, Usage)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
BASE_URL_ENV = ("TODGAP_BASE_URL", "OPENAI_BASE_URL")
API_KEY_ENV = ("TODGAP_API_KEY", "OPENAI_API_KEY")


class Provider(Protocol):
    name: str

    def send(self, request: ChatRequest) -> ChatResponse: ...


def _env(names: Sequence[str], default: str | None = None) -> str | None:
    for n in names:
        if os.environ.get(n):
            return os.environ[n]
    return default


# --- remote HTTP ------------------------------------------------------------

def to_wire(request: ChatRequest) -> dict:
    """Render a request in the common chat-completions JSON shape."""
    messages: list[dict] = [{"role": "system", "content": request.system_prompt}]
    for m in request.messages:
        if m.role == "tool":
            messages.append({"role": "tool", "tool_call_id": m.tool_call_id, "content": m.content})
        elif m.tool_calls:
            messages.append({
                "role": "assistant",
                "content": m.content or None,
                "tool_calls": [{"id": c.id, "type": "function",
                                "function": {"name": c.name,
                                             "arguments": json.dumps(dict(c.arguments), sort_keys=True)}}
                               for c in m.tool_calls],
            })
        else:
            messages.append({"role": m.role, "content": m.content})
    body: dict[str, Any] = {"model": request.model_id, "messages": messages,
                            "temperature": request.temperature}
    if request.tool_schemas:
        body["tools"] = [{"type": "function", "function": t.to_json()} for t in request.tool_schemas]
        body["tool_choice"] = request.tool_choice
    if request.response_format == "structured":
        if request.response_schema is not None:
            body["response_format"] = {"type": "json_schema",
                                       "json_schema": {"name": "output", "schema": request.response_schema}}
        else:
            body["response_format"] = {"type": "json_object"}
    return body


def from_wire(payload: Mapping) -> ChatResponse:
    try:
        choice = payload["choices"][0]
        message = choice["message"]
    except (KeyError, IndexError, TypeError):
        raise ProviderError(f"malformed provider payload: {str(payload)[:200]}") from None
    if message.get("refusal"):
        raise ProviderError(f"provider refusal: {message['refusal']}")
    calls = []
    for raw in message.get("tool_calls") or ():
        fn = raw.get("function") or {}
        args_raw = fn.get("arguments") or "{}"
        try:
            args = json.loads(args_raw) if isinstance(args_raw, str) else dict(args_raw)
        except json.JSONDecodeError:
            raise ProviderError(f"undecodable tool arguments for {fn.get('name')}: {args_raw[:200]}") from None
        calls.append(ToolCall(fn.get("name", ""), args, raw.get("id", "")))
    usage = payload.get("usage") or {}
    meta = {k: payload[k] for k in ("id", "model", "system_fingerprint") if k in payload}
    meta["finish_reason"] = choice.get("finish_reason")
    return ChatResponse(
        content=message.get("content"),
        tool_calls=tuple(calls),
        usage=Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
        provider_meta=meta,
    )


class HttpProvider:
    """Chat-completions endpoint; base URL and key come from the environment."""

    name = "http"

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 timeout: float = 120.0, transport: httpx.BaseTransport | None = None):
        self.base_url = (base_url or _env(BASE_URL_ENV, DEFAULT_BASE_URL)).rstrip("/")
        key = api_key if api_key is not None else _env(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(base_url=self.base_url, headers=headers, timeout=timeout,
                                    transport=transport)

    def send(self, request: ChatRequest) -> ChatResponse:
        try:
            resp = self._client.post("/chat/completions", json=to_wire(request))
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientError(f"network failure: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            retry_after = resp.headers.get("retry-after")
            try:
                delay = float(retry_after) if retry_after else None
            except ValueError:
                delay = None
            raise TransientError(f"HTTP {resp.status_code}", resp.status_code, delay)
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        try:
            payload = resp.json()
        except ValueError:
            raise ProviderError(f"non-JSON provider body: {resp.text[:200]}") from None
        return from_wire(payload)

    def close(self) -> None:
        self._client.close()


# --- scripted ---------------------------------------------------------------

class UnmatchedRequestError(ProviderError):
    pass


def request_digest(request: ChatRequest) -> str:
    last = request.last_message.content if request.last_message else ""
    return hashlib.sha256(f"{request.system_prompt}\n{last}".encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MatchSpec:
    """Declarative predicate over a request; every set field must hold."""

    system_contains: str | None = None
    last_contains: str | None = None
    last_role: str | None = None
    any_contains: str | None = None
    tool_choice: str | None = None
    model_id: str | None = None
    digest: str | None = None

    def __call__(self, request: ChatRequest) -> bool:
        last = request.last_message
        if self.model_id is not None and request.model_id != self.model_id:
            return False
        if self.system_contains is not None and self.system_contains not in request.system_prompt:
            return False
        if self.last_role is not None:
            role = last.role if last else None
            if (role or "none") != self.last_role:
                return False
        if self.last_contains is not None and (last is None or self.last_contains not in last.content):
            return False
        if self.any_contains is not None and not any(self.any_contains in m.content for m in request.messages):
            return False
        if self.tool_choice is not None and request.tool_choice != self.tool_choice:
            return False
        if self.digest is not None and request_digest(request) != self.digest:
            return False
        return True


Responder = Union[ChatResponse, GatewayError, Callable[[ChatRequest], ChatResponse]]


@dataclass
class ScriptedExchange:
    match: Callable[[ChatRequest], bool]
    response: Responder
    times: int | None = None  # None = reusable without limit
    used: int = field(default=0, compare=False)


class ScriptedProvider:
    """Deterministic provider answering from an ordered list of exchanges.

    The first exchange whose predicate holds and whose use budget is not spent
    answers. A request that matches nothing raises; there is no fallback.
    """

    name = "scripted"

    def __init__(self, exchanges: Sequence[ScriptedExchange]):
        self.exchanges = list(exchanges)
        self.calls = 0
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            self.requests.append(request)
            for ex in self.exchanges:
                if ex.times is not None and ex.used >= ex.times:
                    continue
                if ex.match(request):
                    ex.used += 1
                    responder = ex.response
                    break
            else:
                last = request.last_message.content[:120] if request.last_message else ""
                raise UnmatchedRequestError(
                    f"no scripted exchange matches request (model={request.model_id}, "
                    f"system={request.system_prompt[:60]!r}..., last={last!r})")
        if isinstance(responder, GatewayError):
            raise responder
        response = responder(request) if callable(responder) else responder
        return _finalize(response, request)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([exchange_from_json(e) for e in spec["exchanges"]])


def _finalize(response: ChatResponse, request: ChatRequest) -> ChatResponse:
    # ids depend on the conversation only, so prompt variants replay the same ids
    convo = json.dumps([request.model_id, [m.to_json() for m in request.messages]], sort_keys=True)
    key = hashlib.sha256(convo.encode("utf-8")).hexdigest()[:10]
    calls = tuple(c if c.id else ToolCall(c.name, c.arguments, f"call_{key}_{i}")
                  for i, c in enumerate(response.tool_calls))
    usage = response.usage
    if usage == Usage():
        prompt_words = len(request.system_prompt.split()) + sum(len(m.content.split()) for m in request.messages)
        usage = Usage(prompt_words, len((response.content or "").split()))
    return ChatResponse(response.content, calls, usage, dict(response.provider_meta) or {"provider": "scripted"})


def exchange_from_json(obj: Mapping) -> ScriptedExchange:
    match = MatchSpec(**obj.get("match", {}))
    raw = obj["response"]
    if "error" in raw:
        err = raw["error"]
        response: Responder = TransientError(err.get("message", "scripted failure"), err.get("status"))
    else:
        content = raw.get("content")
        if "content_json" in raw:
            content = json.dumps(raw["content_json"], sort_keys=True)
        response = ChatResponse(content, tuple(ToolCall.from_json(c) for c in raw.get("tool_calls", ())))
    return ScriptedExchange(match, response, obj.get("times"))
