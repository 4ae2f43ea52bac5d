"""Provider-agnostic chat-completion gateway with caching and retries."""

from .cache import DiskCache, cache_key
from .client import Gateway, RetryPolicy
from .providers import (HttpProvider, MatchSpec, ScriptedExchange, ScriptedProvider,
                        UnmatchedRequestError)
from .types import (ChatRequest, ChatResponse, ConfigurationError, FormatError, GatewayError,
                    Message, ProviderError, ToolCall, ToolSchema, TransientError,
                    TransportError, Usage)

__all__ = [
    "ChatRequest", "ChatResponse", "ConfigurationError", "DiskCache", "FormatError",
    "Gateway", "GatewayError", "HttpProvider", "MatchSpec", "Message", "ProviderError",
    "RetryPolicy", "ScriptedExchange", "ScriptedProvider", "ToolCall", "ToolSchema",
    "TransientError", "TransportError", "UnmatchedRequestError", "Usage", "cache_key",
]
