"""Deterministic behavior, knowledge-usage and task-complexity metrics.

Label-set arguments accept anything iterable over label strings
(:class:`~todgap.labels.LabelSet`, ``set``, ``frozenset``, lists).
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Collection, Iterable, Mapping, Sequence

# Paper-default constants; overridable through the run configuration.
DEFAULT_TURN_CONSTANT = 1000.0
DEFAULT_MAX_ACTS = 11
DEFAULT_ALIGNMENT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        if denom == 0:
            return 1.0
        return 2 * self.tp / denom


def turn_counts(pred: Iterable[str], gold: Iterable[str]) -> ConfusionCounts:
    p, g = set(pred), set(gold)
    return ConfusionCounts(len(p & g), len(p - g), len(g - p))


def pooled_counts(pred: Sequence[Collection[str]], gold: Sequence[Collection[str]]) -> ConfusionCounts:
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold")
    total = ConfusionCounts()
    for p, g in zip(pred, gold):
        total = total + turn_counts(p, g)
    return total


def micro_f1(pred: Sequence[Collection[str]], gold: Sequence[Collection[str]]) -> float:
    """Pooled micro-F1; 1.0 when every set on both sides is empty."""
    return pooled_counts(pred, gold).f1


def discrepancy(pred: Sequence[Collection[str]], gold: Sequence[Collection[str]]) -> float:
    return 1.0 - micro_f1(pred, gold)


class Alignment(str, Enum):
    ALIGNED = "aligned"
    MISALIGNED = "misaligned"


def turn_alignment(pred_turn: Iterable[str], gold_turn: Iterable[str],
                   threshold: float = DEFAULT_ALIGNMENT_THRESHOLD) -> Alignment:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    f1 = turn_counts(pred_turn, gold_turn).f1
    return Alignment.ALIGNED if f1 >= threshold else Alignment.MISALIGNED


def mean_labels_per_turn(sets: Sequence[Collection[str]]) -> float:
    if not sets:
        raise ValueError("mean_labels_per_turn needs at least one turn")
    return sum(len(set(s)) for s in sets) / len(sets)


# --- knowledge usage --------------------------------------------------------

def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Case-folded whitespace tokens with edge punctuation removed; empties dropped."""
    tokens = (_strip_punct(tok) for tok in text.casefold().split())
    return [t for t in tokens if t]


def rouge1_precision(response: str, knowledge: str) -> float:
    resp = tokenize(response)
    if not resp or not knowledge:
        return 0.0
    available = Counter(tokenize(knowledge))
    overlap = sum(min(n, available[tok]) for tok, n in Counter(resp).items())
    return overlap / len(resp)


def compression_ratio(response_words: int, knowledge_words: int) -> float:
    # Undefined without retrieved knowledge; callers skip such turns.
    if knowledge_words <= 0:
        raise ValueError("compression ratio is undefined for empty knowledge")
    return 1.0 - response_words / knowledge_words


# --- task complexity --------------------------------------------------------

@dataclass(frozen=True)
class ComplexityScore:
    normalized_turn_count: float
    act_diversity: float
    composite: float

    @classmethod
    def combine(cls, ntc: float, diversity: float) -> "ComplexityScore":
        return cls(ntc, diversity, (ntc + diversity) / 2)

    def to_json(self) -> dict:
        return {"normalized_turn_count": self.normalized_turn_count,
                "act_diversity": self.act_diversity,
                "composite": self.composite}


def normalized_turn_count(t: float, C: float = DEFAULT_TURN_CONSTANT) -> float:
    if t < 0 or C <= 0:
        raise ValueError("need t >= 0 and C > 0")
    return math.log1p(t) / math.log1p(t + C)


def act_diversity(d: float, d_max: int = DEFAULT_MAX_ACTS) -> float:
    if d < 0 or d > d_max:
        raise ValueError(f"distinct-act average {d} outside [0, {d_max}]")
    return d / d_max


def distinct_acts_per_dialog(annotations: Sequence[Collection[str]]) -> int:
    seen: set[str] = set()
    for labels in annotations:
        seen.update(labels)
    return len(seen)


def task_complexity(corpus, iso_annotations: Mapping[str, Sequence[Collection[str]]],
                    C: float = DEFAULT_TURN_CONSTANT,
                    d_max: int = DEFAULT_MAX_ACTS) -> ComplexityScore:
    """Composite complexity of a corpus.

    ``iso_annotations`` maps dialog id to the ISO label sets of its annotated
    turns; every dialog in ``corpus`` needs an entry.
    """
    if not corpus:
        raise ValueError("task_complexity needs at least one dialog")
    missing = [d.id for d in corpus if d.id not in iso_annotations]
    if missing:
        raise ValueError(f"missing ISO annotations for dialogs: {missing[:5]}")
    t = sum(len(d.turns) for d in corpus) / len(corpus)
    d = sum(distinct_acts_per_dialog(iso_annotations[dl.id]) for dl in corpus) / len(corpus)
    return ComplexityScore.combine(normalized_turn_count(t, C), act_diversity(d, d_max))
