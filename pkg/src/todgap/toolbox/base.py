from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping


class ToolArgumentError(ValueError):
    """Bad or missing tool arguments; the agent reports these back to the model."""


class UnknownToolError(KeyError):
    pass


@dataclass(frozen=True)
class ToolResult:
    tool: str
    payload: Mapping[str, Any]
    knowledge_text: str | None = None

    def observation(self) -> str:
        """Text handed back to the model as the tool message."""
        return json.dumps(self.payload, sort_keys=True, ensure_ascii=False)

    def to_json(self) -> dict:
        out: dict = {"tool": self.tool, "payload": dict(self.payload)}
        if self.knowledge_text is not None:
            out["knowledge_text"] = self.knowledge_text
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ToolResult":
        return cls(obj["tool"], obj.get("payload", {}), obj.get("knowledge_text"))


KINDS = ("search", "booking", "knowledge", "stub")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: Mapping[str, Any] = field(default_factory=dict)
    kind: str = "stub"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"invalid tool kind {self.kind!r}")

    @property
    def retrieves_knowledge(self) -> bool:
        return self.kind in ("search", "knowledge")
