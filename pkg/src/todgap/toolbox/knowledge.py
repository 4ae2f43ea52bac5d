"""Product knowledge-base lookup and confirmation-only stub tools."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from ..metrics import tokenize
from .base import ToolResult, UnknownToolError

DOC_SUFFIXES = (".txt", ".md")
DOC_SEPARATOR = "\n---\n"
STUB_TOOLS = ("ScreenShare", "CustomerInfoLookup", "EscalateOrTransfer")


@dataclass(frozen=True)
class Document:
    path: str
    text: str
    counts: Counter


class KnowledgeBase:
    def __init__(self, documents: list[Document]):
        self.documents = sorted(documents, key=lambda d: d.path)

    @classmethod
    def load(cls, root: str | Path | None) -> "KnowledgeBase":
        if root is None:
            return cls([])
        root = Path(root)
        docs = []
        for p in sorted(root.rglob("*")):
            if p.is_file() and p.suffix in DOC_SUFFIXES:
                text = p.read_text(encoding="utf-8")
                docs.append(Document(p.relative_to(root).as_posix(), text, Counter(tokenize(text))))
        return cls(docs)

    def score(self, query: str) -> list[tuple[int, Document]]:
        terms = set(tokenize(query))
        scored = [(sum(d.counts[t] for t in terms), d) for d in self.documents]
        return [(s, d) for s, d in scored if s > 0]


def knowledge_lookup(query: str, kb: KnowledgeBase, k: int = 3) -> ToolResult:
    ranked = sorted(kb.score(query), key=lambda sd: (-sd[0], sd[1].path))[:k]
    text = DOC_SEPARATOR.join(d.text.strip() for _, d in ranked)
    payload = {"query": query, "results": [{"path": d.path, "score": s} for s, d in ranked],
               "content": text}
    return ToolResult("KnowledgeLookup", payload, text)


def stub_invoke(tool_name: str, args: Mapping[str, object]) -> ToolResult:
    if tool_name not in STUB_TOOLS:
        raise UnknownToolError(tool_name)
    return ToolResult(tool_name, {"tool": tool_name, "acknowledged": True, "echo": dict(args)})
