"""Label sets attached to a single turn (dialog acts or tool names)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping


@dataclass(frozen=True)
class LabelSet:
    labels: frozenset[str] = frozenset()
    rationale: Mapping[str, str] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(self.labels))

    @classmethod
    def of(cls, *labels: str) -> "LabelSet":
        return cls(frozenset(labels))

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def check_within(self, allowed: Iterable[str], what: str = "label") -> None:
        extra = self.labels - set(allowed)
        if extra:
            raise ValueError(f"unknown {what}(s): {sorted(extra)}")

    def to_json(self) -> dict:
        out: dict = {"labels": sorted(self.labels)}
        if self.rationale:
            out["rationale"] = dict(sorted(self.rationale.items()))
        return out

    @classmethod
    def from_json(cls, obj) -> "LabelSet":
        if isinstance(obj, (list, tuple)):
            return cls(frozenset(obj))
        return cls(frozenset(obj.get("labels", ())), obj.get("rationale"))
