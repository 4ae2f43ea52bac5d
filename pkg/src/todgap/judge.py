"""LLM-as-judge scoring of single responses on four 1-5 aspects."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .analysis.stats import welch_t_test
from .annotators import _template
from .corpus import Speaker, Turn
from .gateway import ChatRequest, FormatError, Gateway, Message

log = logging.getLogger(__name__)

ASPECTS = ("coherence", "specificity", "satisfaction", "effectiveness")

REASK = ("Your previous reply could not be used: {error}. Reply again with only a JSON object with "
         "exactly the keys " + ", ".join(ASPECTS) + ', each mapping to {{"score": <integer 1-5>, '
         '"reasoning": <string>}}. No other text.')


class JudgeParseError(ValueError):
    def __init__(self, message: str, raw: str | None):
        super().__init__(message)
        self.raw = raw


class JudgeError(RuntimeError):
    """Judge output stayed unusable after one re-ask."""

    def __init__(self, message: str, raw: str | None):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class ResponseScore:
    coherence: int
    specificity: int
    satisfaction: int
    effectiveness: int
    reasoning: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for aspect in ASPECTS:
            value = getattr(self, aspect)
            if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
                raise ValueError(f"{aspect} must be an integer in [1, 5], got {value!r}")

    def as_dict(self) -> dict[str, int]:
        return {a: getattr(self, a) for a in ASPECTS}

    def to_json(self) -> dict:
        return {"scores": self.as_dict(), "reasoning": dict(sorted(self.reasoning.items()))}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ResponseScore":
        return cls(**{a: int(obj["scores"][a]) for a in ASPECTS}, reasoning=obj.get("reasoning") or {})


def judge_schema() -> dict:
    item = {"type": "object",
            "properties": {"score": {"type": "integer", "minimum": 1, "maximum": 5},
                           "reasoning": {"type": "string"}},
            "required": ["score", "reasoning"], "additionalProperties": False}
    return {"type": "object", "properties": {a: item for a in ASPECTS},
            "required": list(ASPECTS), "additionalProperties": False}


def score_payload(scores: Sequence[int], reason: str = "scripted") -> dict:
    """Well-formed judge payload for the given four scores."""
    return {a: {"score": s, "reasoning": reason} for a, s in zip(ASPECTS, scores, strict=True)}


def parse_judge_output(raw: str | None) -> ResponseScore:
    try:
        payload = json.loads(raw or "")
    except json.JSONDecodeError as exc:
        raise JudgeParseError(f"not a single JSON value ({exc.msg})", raw) from None
    if not isinstance(payload, dict):
        raise JudgeParseError("payload is not an object", raw)
    extra = sorted(set(payload) - set(ASPECTS))
    if extra:
        raise JudgeParseError(f"unknown aspect key(s): {extra}", raw)
    missing = [a for a in ASPECTS if a not in payload]
    if missing:
        raise JudgeParseError(f"missing aspect(s): {missing}", raw)
    scores, reasons = {}, {}
    for a in ASPECTS:
        entry = payload[a]
        if not isinstance(entry, dict):
            raise JudgeParseError(f"aspect {a!r} is not an object", raw)
        score = entry.get("score")
        if isinstance(score, bool) or not isinstance(score, int):
            raise JudgeParseError(f"aspect {a!r}: score must be an integer", raw)
        if not 1 <= score <= 5:
            raise JudgeParseError(f"aspect {a!r}: score {score} outside [1, 5]", raw)
        reasoning = entry.get("reasoning", "")
        if not isinstance(reasoning, str):
            raise JudgeParseError(f"aspect {a!r}: reasoning must be a string", raw)
        scores[a], reasons[a] = score, reasoning
    return ResponseScore(**scores, reasoning=reasons)


def render_history(context: Sequence[Turn]) -> str:
    if not context:
        return "(empty; this is the first turn)"
    return "\n".join(f"{'agent' if t.speaker is Speaker.HUMAN_EXPERT else 'user'}: {t.text}" for t in context)


def judge_message(context: Sequence[Turn], user_input: str, response: str) -> str:
    return (f"**Conversation History**:\n{render_history(context)}\n\n"
            f"**User Input**:\n{user_input.strip() or '(none)'}\n\n"
            f"**Agent Response**:\n{response}")


def score_response(context: Sequence[Turn], user_input: str, response: str, gateway: Gateway,
                   model_id: str, temperature: float = 0.0) -> ResponseScore:
    """Score ``response`` given only what preceded it; never the reference turn."""
    if not response.strip():
        raise ValueError("cannot score an empty response")
    system = _template("judge.txt")
    first = Message("user", judge_message(context, user_input, response))
    request = ChatRequest(model_id, system, (first,), temperature=temperature,
                          response_format="structured", response_schema=judge_schema())
    try:
        return parse_judge_output(gateway.complete_chat(request).content)
    except (FormatError, JudgeParseError) as exc:
        raw, error = exc.raw, str(exc)
    log.info("re-asking judge %s after unusable output: %s", model_id, error)
    retry = ChatRequest(model_id, system,
                        (first, Message("assistant", raw or ""), Message("user", REASK.format(error=error))),
                        temperature=temperature, response_format="structured", response_schema=judge_schema())
    try:
        return parse_judge_output(gateway.complete_chat(retry).content)
    except (FormatError, JudgeParseError) as exc:
        raise JudgeError(f"unusable judge output after re-ask: {exc}", exc.raw) from exc


def aggregate_dialog_scores(scores: Sequence[ResponseScore]) -> dict[str, float]:
    if not scores:
        raise ValueError("aggregate_dialog_scores needs at least one score")
    return {a: sum(getattr(s, a) for s in scores) / len(scores) for a in ASPECTS}


def validate_judge(dialog_scores: Mapping[str, Mapping[str, float]],
                   success_labels: Mapping[str, int]) -> dict[str, dict]:
    """Welch test of per-dialog aspect means, successful vs failed dialogs.

    ``delta_pct`` is the relative difference of the success-group mean over
    the failure-group mean, in percent.
    """
    shared = sorted(set(dialog_scores) & set(success_labels))
    ok = [d for d in shared if success_labels[d] == 1]
    bad = [d for d in shared if success_labels[d] == 0]
    if len(ok) < 2 or len(bad) < 2:
        raise ValueError(f"validate_judge needs >= 2 dialogs per group (success={len(ok)}, failure={len(bad)})")
    out = {}
    for a in ASPECTS:
        x1 = [dialog_scores[d][a] for d in ok]
        x0 = [dialog_scores[d][a] for d in bad]
        m1, m0 = sum(x1) / len(x1), sum(x0) / len(x0)
        test = welch_t_test(x1, x0)
        out[a] = {"mean_success": m1, "mean_failure": m0, "delta_pct": 100.0 * (m1 / m0 - 1.0),
                  "t": test.t, "df": test.df, "p_value": test.p, "n_success": len(x1), "n_failure": len(x0)}
    return out


__all__ = [
    "ASPECTS", "JudgeError", "JudgeParseError", "ResponseScore", "aggregate_dialog_scores",
    "judge_message", "judge_schema", "parse_judge_output", "score_payload", "score_response",
    "validate_judge",
]
