"""Few-shot LLM classifiers for dialog acts and tool usage."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Task
from .gateway import ChatRequest, FormatError, Gateway, Message
from .labels import LabelSet
from .metrics import micro_f1, pooled_counts

log = logging.getLogger(__name__)

WOZ_LABELS = ("inform", "request", "select", "recommend", "nooffer", "offerbook",
              "book", "nobook", "greet", "reqmore")
ISO_LABELS = ("set_q", "prop_q", "choice_q", "other_q", "inform", "commissives",
              "directives", "salutation", "apology", "thanking", "feedback")
_EXPECTED = {"woz": WOZ_LABELS, "iso": ISO_LABELS}

REASK = ("Your previous reply could not be used: {error}. Reply again with only a JSON object "
         "that has exactly one key per {kind} ({keys}), each mapping to "
         '{{"reasoning": <string>, "present": <true|false>}}. No other text.')


class LabelParseError(ValueError):
    def __init__(self, message: str, raw: str | None):
        super().__init__(message)
        self.raw = raw


class AnnotationError(RuntimeError):
    """Classifier output stayed unusable after one re-ask."""

    def __init__(self, message: str, raw: str | None):
        super().__init__(message)
        self.raw = raw


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("todgap").joinpath("data", *parts)))


@dataclass(frozen=True)
class Taxonomy:
    name: str
    labels: tuple[str, ...]
    definitions: Mapping[str, str]
    fewshots: Mapping[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)

    def __post_init__(self):
        expected = _EXPECTED.get(self.name)
        if expected is not None and set(self.labels) != set(expected):
            raise ValueError(f"taxonomy {self.name} must have labels {expected}")
        missing = [lab for lab in self.labels if lab not in self.definitions]
        if missing:
            raise ValueError(f"taxonomy {self.name}: no definition for {missing}")


@lru_cache(maxsize=None)
def load_taxonomy(name: str, path: str | None = None) -> Taxonomy:
    src = Path(path) if path else data_path("taxonomies", f"{name}.json")
    raw = json.loads(src.read_text(encoding="utf-8"))
    return Taxonomy(
        name=raw["name"],
        labels=tuple(raw["labels"]),
        definitions=raw["definitions"],
        fewshots={k: tuple((u, r) for u, r in v) for k, v in raw.get("fewshots", {}).items()},
    )


def taxonomy_for_task(task: Task | str) -> str:
    """WOZ acts for the WOZ-derived tasks, ISO acts for open-ended ones."""
    return "woz" if Task(task) in (Task.MULTIWOZ, Task.SPOKENWOZ) else "iso"


@lru_cache(maxsize=None)
def load_tool_bank(path: str | None = None) -> dict:
    src = Path(path) if path else data_path("tools.json")
    return json.loads(src.read_text(encoding="utf-8"))


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return data_path("prompts", name).read_text(encoding="utf-8")


# --- structured output ------------------------------------------------------

def label_schema(allowed: Sequence[str]) -> dict:
    item = {"type": "object",
            "properties": {"reasoning": {"type": "string"}, "present": {"type": "boolean"}},
            "required": ["reasoning", "present"], "additionalProperties": False}
    return {"type": "object", "properties": {lab: item for lab in allowed},
            "required": list(allowed), "additionalProperties": False}


def label_payload(allowed: Sequence[str], present: Sequence[str], reason: str = "") -> dict:
    """Well-formed classifier payload; handy for scripted providers."""
    return {lab: {"present": lab in present,
                  "reasoning": reason or ("present" if lab in present else "absent")}
            for lab in allowed}


def parse_label_output(raw: str | None, allowed: Sequence[str]) -> LabelSet:
    """Strictly decode ``{label: {"present": bool, "reasoning": str}}``."""
    try:
        payload = json.loads(raw or "")
    except json.JSONDecodeError as exc:
        raise LabelParseError(f"not a single JSON value ({exc.msg})", raw) from None
    if not isinstance(payload, dict):
        raise LabelParseError("payload is not an object", raw)
    allowed_set = set(allowed)
    extra = sorted(set(payload) - allowed_set)
    if extra:
        raise LabelParseError(f"unknown label key(s): {extra}", raw)
    missing = [lab for lab in allowed if lab not in payload]
    if missing:
        raise LabelParseError(f"missing label key(s): {missing}", raw)
    present, rationale = set(), {}
    for lab in allowed:
        entry = payload[lab]
        if not isinstance(entry, dict) or not isinstance(entry.get("present"), bool):
            raise LabelParseError(f"label {lab!r}: 'present' must be a boolean", raw)
        reasoning = entry.get("reasoning", "")
        if not isinstance(reasoning, str):
            raise LabelParseError(f"label {lab!r}: 'reasoning' must be a string", raw)
        if entry["present"]:
            present.add(lab)
        rationale[lab] = reasoning
    return LabelSet(frozenset(present), rationale)


def _exchange(user_input: str, response: str, user_header: str, response_header: str) -> str:
    shown = user_input.strip() or "(none; the agent opens the conversation)"
    return f"**{user_header}**:\n{shown}\n\n**{response_header}**:\n{response}"


def _classify(system_prompt: str, exchange: str, allowed: Sequence[str], kind: str,
              gateway: Gateway, model_id: str, temperature: float) -> LabelSet:
    request = ChatRequest(model_id=model_id, system_prompt=system_prompt,
                          messages=(Message("user", exchange),), temperature=temperature,
                          response_format="structured", response_schema=label_schema(allowed))
    try:
        return parse_label_output(gateway.complete_chat(request).content, allowed)
    except (FormatError, LabelParseError) as exc:
        raw, error = exc.raw, str(exc)
    log.info("re-asking %s after unusable output: %s", model_id, error)
    retry = ChatRequest(
        model_id=model_id, system_prompt=system_prompt,
        messages=(Message("user", exchange), Message("assistant", raw or ""),
                  Message("user", REASK.format(error=error, kind=kind, keys=", ".join(allowed)))),
        temperature=temperature, response_format="structured", response_schema=label_schema(allowed))
    try:
        return parse_label_output(gateway.complete_chat(retry).content, allowed)
    except (FormatError, LabelParseError) as exc:
        raise AnnotationError(f"unusable classifier output after re-ask: {exc}", exc.raw) from exc


# --- prompts ----------------------------------------------------------------

def _render_fewshots(bank: Mapping[str, Sequence[Sequence[str]]], labels: Sequence[str]) -> str:
    blocks = []
    for lab in labels:
        shots = bank.get(lab, ())
        if not shots:
            continue
        body = "\n\n".join(f"user: {u}\nagent: {r}" for u, r in shots)
        blocks.append(f"**{lab}**\n\n{body}")
    return "\n\n".join(blocks)


def act_classifier_prompt(taxonomy: Taxonomy) -> str:
    definitions = "\n".join(f"- {lab}: {taxonomy.definitions[lab]}" for lab in taxonomy.labels)
    return _template("act_classifier.txt").format(
        definitions=definitions, fewshots=_render_fewshots(taxonomy.fewshots, taxonomy.labels))


def tool_classifier_prompt(task: Task | str, tool_names: Sequence[str], bank: Mapping | None = None) -> str:
    bank = bank or load_tool_bank()
    task = Task(task)
    description = bank["agent_descriptions"]["pcs" if task is Task.PCS else "woz"]
    defs = "\n".join(f"{i}. **{name}**: {bank['tools'][name]['definition']}"
                     for i, name in enumerate(tool_names, 1))
    shots = _render_fewshots({n: bank["tools"][n].get("fewshots", ()) for n in tool_names}, tool_names)
    return _template("tool_classifier.txt").format(agent_description=description,
                                                   tool_definitions=defs, fewshots=shots)


def classify_acts(user_input: str, response: str, taxonomy: Taxonomy, gateway: Gateway,
                  model_id: str, temperature: float = 0.0) -> LabelSet:
    if not response.strip():
        raise ValueError("cannot classify an empty response")
    exchange = _exchange(user_input, response, "Latest user input", "Latest agent response")
    return _classify(act_classifier_prompt(taxonomy), exchange, taxonomy.labels, "dialog act",
                     gateway, model_id, temperature)


def classify_tools(user_input: str, response: str, registry: Sequence[str], gateway: Gateway,
                   model_id: str, task: Task | str, temperature: float = 0.0) -> LabelSet:
    if not response.strip():
        raise ValueError("cannot classify an empty response")
    names = tuple(getattr(t, "name", t) for t in registry)
    exchange = _exchange(user_input, response, "User input", "Agent response")
    return _classify(tool_classifier_prompt(task, names), exchange, names, "tool",
                     gateway, model_id, temperature)


# --- records ----------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationRecord:
    dialog_id: str
    turn_index: int
    source: str  # "human_expert" | "agent"
    acts: LabelSet
    tools: LabelSet
    iso_acts: LabelSet | None = None

    @property
    def key(self) -> tuple[str, int, str]:
        return (self.dialog_id, self.turn_index, self.source)

    def to_json(self) -> dict:
        out = {"dialog_id": self.dialog_id, "turn_index": self.turn_index, "source": self.source,
               "acts": self.acts.to_json(), "tools": self.tools.to_json()}
        if self.iso_acts is not None:
            out["iso_acts"] = self.iso_acts.to_json()
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "AnnotationRecord":
        iso = obj.get("iso_acts")
        return cls(obj["dialog_id"], int(obj["turn_index"]), obj["source"],
                   LabelSet.from_json(obj["acts"]), LabelSet.from_json(obj["tools"]),
                   LabelSet.from_json(iso) if iso is not None else None)


# --- validation -------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierValidation:
    micro_f1: float
    per_label: Mapping[str, Mapping[str, float]]
    n_turns: int

    def to_json(self) -> dict:
        return {"micro_f1": self.micro_f1, "n_turns": self.n_turns,
                "per_label": {k: dict(v) for k, v in sorted(self.per_label.items())}}


def validate_classifier(predictions: Sequence, gold: Sequence) -> ClassifierValidation:
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    labels = sorted(set().union(*map(set, predictions), *map(set, gold))) if gold else []
    per_label = {}
    for lab in labels:
        c = pooled_counts([{lab} & set(p) for p in predictions], [{lab} & set(g) for g in gold])
        precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
        recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
        per_label[lab] = {"precision": precision, "recall": recall, "f1": c.f1,
                          "support": c.tp + c.fn}
    return ClassifierValidation(micro_f1(predictions, gold), per_label, len(gold))


def random_baseline(gold: Sequence, taxonomy_size: int, trials: int = 100, seed: int = 0,
                    rate: float | None = None) -> float:
    """Mean micro-F1 of a predictor that fires each label independently.

    The firing probability defaults to the empirical label density of
    ``gold``. Gold without any positive label scores 0: no true positive is
    possible, so chance agreement on empty turns is not credited.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    names = sorted(set().union(*map(set, gold))) if gold else []
    if len(names) > taxonomy_size:
        raise ValueError("gold uses more labels than taxonomy_size")
    n = len(gold)
    g = np.zeros((n, taxonomy_size), dtype=bool)
    col = {lab: i for i, lab in enumerate(names)}
    for r, labels in enumerate(gold):
        for lab in labels:
            g[r, col[lab]] = True
    positives = int(g.sum())
    if positives == 0 or n == 0:
        return 0.0
    p = positives / (n * taxonomy_size) if rate is None else rate
    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(trials):
        pred = rng.random((n, taxonomy_size)) < p
        tp = int((pred & g).sum())
        fp = int((pred & ~g).sum())
        fn = int((~pred & g).sum())
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


__all__ = [
    "AnnotationError", "AnnotationRecord", "ClassifierValidation", "ISO_LABELS", "LabelParseError",
    "Taxonomy", "WOZ_LABELS", "act_classifier_prompt", "classify_acts", "classify_tools",
    "label_payload", "label_schema", "load_taxonomy", "load_tool_bank", "parse_label_output",
    "random_baseline", "taxonomy_for_task", "tool_classifier_prompt", "validate_classifier",
]
