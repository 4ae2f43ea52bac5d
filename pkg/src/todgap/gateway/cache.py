"""Content-addressed, write-once disk cache of chat exchanges."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterator

from .types import ChatRequest, ChatResponse

_KEY_VERSION = "v1"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def cache_key(request: ChatRequest) -> str:
    """Stable hash of everything that influences the provider output."""
    body = canonical_json(request.to_json())
    return hashlib.sha256(f"{_KEY_VERSION}\n{body}".encode("utf-8")).hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class DiskCache:
    """One JSON file per key under ``root/ab/cd/<key>.json``.

    Entries hold both the request and the response so runs can be audited.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, key: str) -> Path:
        return self.root / key[:2] / key[2:4] / f"{key}.json"

    def get(self, key: str) -> ChatResponse | None:
        path = self.path_for(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        return ChatResponse.from_json(entry["response"])

    def put(self, key: str, request: ChatRequest, response: ChatResponse) -> None:
        path = self.path_for(key)
        if path.exists():
            return
        entry = {"key": key, "request": request.to_json(), "response": response.to_json()}
        atomic_write_text(path, json.dumps(entry, sort_keys=True, ensure_ascii=False, indent=1))

    def entries(self) -> Iterator[tuple[ChatRequest, ChatResponse]]:
        for path in sorted(self.root.glob("??/??/*.json")):
            entry = json.loads(path.read_text(encoding="utf-8"))
            yield ChatRequest.from_json(entry["request"]), ChatResponse.from_json(entry["response"])

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("??/??/*.json"))
