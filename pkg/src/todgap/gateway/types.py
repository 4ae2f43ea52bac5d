"""Provider-agnostic chat request/response records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping


class GatewayError(RuntimeError):
    pass


class ConfigurationError(GatewayError):
    """No provider is configured for a model id."""


class TransportError(GatewayError):
    """Retries exhausted on transient failures."""


class ProviderError(GatewayError):
    """The provider refused, returned nothing usable, or broke the contract."""


class FormatError(GatewayError):
    """Structured output was requested but the payload does not decode."""

    def __init__(self, message: str, raw: str | None):
        super().__init__(message)
        self.raw = raw


class TransientError(GatewayError):
    """A retryable failure (rate limit, 5xx, network hiccup)."""

    def __init__(self, message: str, status: int | None = None, retry_after: float | None = None):
        super().__init__(message)
        self.status = status
        self.retry_after = retry_after


ROLES = ("user", "assistant", "tool")
RESPONSE_FORMATS = ("free_text", "structured")
TOOL_CHOICES = ("auto", "none")


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: Mapping[str, Any]
    id: str = ""

    def to_json(self) -> dict:
        return {"id": self.id, "name": self.name, "arguments": dict(self.arguments)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ToolCall":
        return cls(obj["name"], dict(obj.get("arguments") or {}), obj.get("id", ""))


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    tool_call_id: str | None = None
    tool_calls: tuple[ToolCall, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"invalid message role {self.role!r}")
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))

    def to_json(self) -> dict:
        out: dict = {"role": self.role, "content": self.content}
        if self.tool_call_id is not None:
            out["tool_call_id"] = self.tool_call_id
        if self.tool_calls:
            out["tool_calls"] = [c.to_json() for c in self.tool_calls]
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "Message":
        return cls(obj["role"], obj.get("content") or "", obj.get("tool_call_id"),
                   tuple(ToolCall.from_json(c) for c in obj.get("tool_calls", ())))


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: Mapping[str, Any] = field(default_factory=lambda: {"type": "object", "properties": {}})

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description, "parameters": self.parameters}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ToolSchema":
        return cls(obj["name"], obj.get("description", ""), obj.get("parameters") or {})


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    system_prompt: str
    messages: tuple[Message, ...] = ()
    tool_schemas: tuple[ToolSchema, ...] = ()
    temperature: float = 0.0
    response_format: str = "free_text"
    response_schema: Mapping[str, Any] | None = None
    tool_choice: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "tool_schemas", tuple(self.tool_schemas))
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.response_format not in RESPONSE_FORMATS:
            raise ValueError(f"invalid response_format {self.response_format!r}")
        if self.tool_choice not in TOOL_CHOICES:
            raise ValueError(f"invalid tool_choice {self.tool_choice!r}")
        open_calls: set[str] = set()
        for i, m in enumerate(self.messages):
            if m.role == "assistant":
                open_calls = {c.id for c in m.tool_calls}
            elif m.role == "tool":
                if m.tool_call_id not in open_calls:
                    raise ValueError(f"message {i}: tool result without a preceding assistant tool call")
            else:
                open_calls = set()

    @property
    def last_message(self) -> Message | None:
        return self.messages[-1] if self.messages else None

    def tool_names(self) -> set[str]:
        return {t.name for t in self.tool_schemas}

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "system_prompt": self.system_prompt,
            "messages": [m.to_json() for m in self.messages],
            "tool_schemas": [t.to_json() for t in self.tool_schemas],
            "temperature": self.temperature,
            "response_format": self.response_format,
            "response_schema": self.response_schema,
            "tool_choice": self.tool_choice,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ChatRequest":
        return cls(
            model_id=obj["model_id"],
            system_prompt=obj.get("system_prompt", ""),
            messages=tuple(Message.from_json(m) for m in obj.get("messages", ())),
            tool_schemas=tuple(ToolSchema.from_json(t) for t in obj.get("tool_schemas", ())),
            temperature=float(obj.get("temperature", 0.0)),
            response_format=obj.get("response_format", "free_text"),
            response_schema=obj.get("response_schema"),
            tool_choice=obj.get("tool_choice", "auto"),
        )


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatResponse:
    content: str | None = None
    tool_calls: tuple[ToolCall, ...] = ()
    usage: Usage = Usage()
    provider_meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))

    @property
    def is_empty(self) -> bool:
        return not (self.content and self.content.strip()) and not self.tool_calls

    def json_payload(self) -> Any:
        """Decode ``content`` as JSON, raising :class:`FormatError`."""
        try:
            return json.loads(self.content or "")
        except json.JSONDecodeError as exc:
            raise FormatError(f"undecodable structured output: {exc.msg}", self.content) from None

    def to_json(self) -> dict:
        return {
            "content": self.content,
            "tool_calls": [c.to_json() for c in self.tool_calls],
            "usage": {"prompt_tokens": self.usage.prompt_tokens,
                      "completion_tokens": self.usage.completion_tokens},
            "provider_meta": dict(self.provider_meta),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ChatResponse":
        usage = obj.get("usage") or {}
        return cls(
            content=obj.get("content"),
            tool_calls=tuple(ToolCall.from_json(c) for c in obj.get("tool_calls", ())),
            usage=Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
            provider_meta=dict(obj.get("provider_meta") or {}),
        )
