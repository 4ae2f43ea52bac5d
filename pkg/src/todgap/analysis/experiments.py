"""Gap summaries, knowledge usage, alignment split and behavior injection."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..corpus import ContextSlice, count_words
from ..judge import ASPECTS, ResponseScore
from ..labels import LabelSet
from ..metrics import (DEFAULT_ALIGNMENT_THRESHOLD, Alignment, ConfusionCounts, compression_ratio,
                       mean_labels_per_turn, pooled_counts, rouge1_precision, turn_alignment,
                       turn_counts)
from .stats import bootstrap_ci, log_ratio_t_test, pearson_r, welch_t_test

log = logging.getLogger(__name__)

DIMENSIONS = ("acts", "tools")


@dataclass(frozen=True)
class JoinedTurn:
    """Everything known about one expert turn and its regenerated counterpart."""

    dialog_id: str
    turn_index: int
    human_acts: LabelSet
    agent_acts: LabelSet
    human_tools: LabelSet
    agent_tools: LabelSet
    human_response: str = ""
    agent_response: str = ""
    agent_knowledge: str = ""
    score: ResponseScore | None = None

    def labels(self, dimension: str) -> tuple[LabelSet, LabelSet]:
        """(agent, human) label sets of a dimension."""
        if dimension == "acts":
            return self.agent_acts, self.human_acts
        if dimension == "tools":
            return self.agent_tools, self.human_tools
        raise ValueError(f"unknown dimension {dimension!r}")


def _p_or_none(a: Sequence[float], b: Sequence[float]) -> float | None:
    if len(a) < 2 or len(b) < 2:
        return None
    return welch_t_test(a, b).p


# --- behavior gap -------------------------------------------------------------

@dataclass(frozen=True)
class GapSummary:
    dimension: str
    discrepancy: float
    ci95: tuple[float, float] | None
    mean_labels_agent: float
    mean_labels_human: float
    labels_delta_p: float | None
    n_turns: int
    n_dialogs: int
    per_dialog: Mapping[str, float] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.ci95 is not None and not self.ci95[0] <= self.discrepancy <= self.ci95[1]:
            raise ValueError("confidence interval must contain the point estimate")

    def to_json(self) -> dict:
        return {"dimension": self.dimension, "discrepancy": self.discrepancy,
                "ci95": list(self.ci95) if self.ci95 is not None else None,
                "mean_labels_agent": self.mean_labels_agent, "mean_labels_human": self.mean_labels_human,
                "labels_delta_p": self.labels_delta_p, "n_turns": self.n_turns, "n_dialogs": self.n_dialogs,
                "per_dialog": dict(sorted(self.per_dialog.items())), "flags": list(self.flags)}


def _discrepancy_of_rows(rows: np.ndarray) -> float:
    tp, fp, fn = rows.sum(axis=0)
    return 1.0 - ConfusionCounts(int(tp), int(fp), int(fn)).f1


def gap_summary(dimension: str, turns: Sequence[JoinedTurn], resamples: int = 2000,
                seed: int = 0) -> GapSummary:
    """Pooled discrepancy with a dialog-level bootstrap interval.

    The percentile interval of a pooled ratio can, in rare resamples, sit
    entirely on one side of the point estimate; it is then widened to reach
    it so the reported interval always contains the estimate.
    """
    if not turns:
        raise ValueError("gap_summary needs at least one turn")
    agent = [t.labels(dimension)[0] for t in turns]
    human = [t.labels(dimension)[1] for t in turns]
    point = 1.0 - pooled_counts(agent, human).f1

    by_dialog: dict[str, ConfusionCounts] = {}
    for t, a, h in zip(turns, agent, human):
        by_dialog[t.dialog_id] = by_dialog.get(t.dialog_id, ConfusionCounts()) + turn_counts(a, h)
    ids = sorted(by_dialog)
    per_dialog = {d: 1.0 - by_dialog[d].f1 for d in ids}
    flags = []
    if len(ids) >= 2:
        rows = np.array([[by_dialog[d].tp, by_dialog[d].fp, by_dialog[d].fn] for d in ids], dtype=float)
        lo, hi = bootstrap_ci(rows, resamples=resamples, seed=seed, statistic=_discrepancy_of_rows)
        if not lo <= point <= hi:
            flags.append("ci_widened_to_point")
        ci = (min(lo, point), max(hi, point))
    else:
        ci = None
        flags.append("ci_unavailable_single_dialog")

    n_agent = [float(len(a)) for a in agent]
    n_human = [float(len(h)) for h in human]
    return GapSummary(dimension, point, ci, mean_labels_per_turn(agent), mean_labels_per_turn(human),
                      _p_or_none(n_agent, n_human), len(turns), len(ids), per_dialog, tuple(flags))


# --- knowledge usage ----------------------------------------------------------

@dataclass(frozen=True)
class KnowledgeSummary:
    n_turns: int
    agent_rouge: float | None
    human_rouge: float | None
    rouge_p: float | None
    agent_compression: float | None
    human_compression: float | None
    compression_p: float | None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _mean(xs: Sequence[float]) -> float | None:
    return sum(xs) / len(xs) if xs else None


def knowledge_summary(turns: Sequence[JoinedTurn], knowledge_tools: Sequence[str]) -> KnowledgeSummary:
    """Copying (ROUGE-1 precision) and condensation (compression) of knowledge.

    Only turns where both the agent and the human expert used a search or
    knowledge tool, and the agent actually retrieved text, are compared. Both
    responses are measured against the knowledge the agent retrieved for that
    turn, since the expert's own lookups were not recorded.
    """
    kt = set(knowledge_tools)
    ar, hr, ac, hc = [], [], [], []
    for t in turns:
        if not (set(t.agent_tools) & kt and set(t.human_tools) & kt):
            continue
        k_words = count_words(t.agent_knowledge)
        if k_words == 0 or not t.agent_response.strip() or not t.human_response.strip():
            continue
        ar.append(rouge1_precision(t.agent_response, t.agent_knowledge))
        hr.append(rouge1_precision(t.human_response, t.agent_knowledge))
        ac.append(compression_ratio(count_words(t.agent_response), k_words))
        hc.append(compression_ratio(count_words(t.human_response), k_words))
    return KnowledgeSummary(len(ar), _mean(ar), _mean(hr), _p_or_none(ar, hr),
                            _mean(ac), _mean(hc), _p_or_none(ac, hc))


# --- alignment split ----------------------------------------------------------

@dataclass(frozen=True)
class AlignmentSplit:
    dimension: str
    threshold: float
    n_aligned: int
    n_misaligned: int
    aspects: Mapping[str, Mapping[str, float | None]]
    flags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"dimension": self.dimension, "threshold": self.threshold, "n_aligned": self.n_aligned,
                "n_misaligned": self.n_misaligned, "flags": list(self.flags),
                "aspects": {a: dict(v) for a, v in self.aspects.items()}}


def split_by_alignment(turns: Sequence[JoinedTurn], dimension: str,
                       threshold: float = DEFAULT_ALIGNMENT_THRESHOLD) -> AlignmentSplit:
    missing = [(t.dialog_id, t.turn_index) for t in turns if t.score is None]
    if missing:
        raise ValueError(f"turns without judge scores: {missing[:5]}")
    aligned, misaligned = [], []
    for t in turns:
        agent, human = t.labels(dimension)
        group = aligned if turn_alignment(agent, human, threshold) is Alignment.ALIGNED else misaligned
        group.append(t.score)
    flags = []
    if not aligned:
        flags.append("aligned_group_empty")
    if not misaligned:
        flags.append("misaligned_group_empty")
    if aligned and misaligned and (len(aligned) < 2 or len(misaligned) < 2):
        flags.append("group_too_small_for_test")
    aspects = {}
    for a in ASPECTS:
        xa = [float(getattr(s, a)) for s in aligned]
        xm = [float(getattr(s, a)) for s in misaligned]
        aspects[a] = {"aligned_mean": _mean(xa), "misaligned_mean": _mean(xm), "p": _p_or_none(xa, xm)}
    return AlignmentSplit(dimension, threshold, len(aligned), len(misaligned), aspects, tuple(flags))


# --- behavior injection -------------------------------------------------------

@dataclass(frozen=True)
class InjectionResult:
    dimension: str
    n_pairs: int
    aspects: Mapping[str, Mapping[str, float]]

    def to_json(self) -> dict:
        return {"dimension": self.dimension, "n_pairs": self.n_pairs,
                "aspects": {a: dict(v) for a, v in self.aspects.items()}}


class InjectionAborted(RuntimeError):
    """A generation or judging failure stopped the experiment midway."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


def summarize_injection(dimension: str, pairs: Sequence[tuple[ResponseScore, ResponseScore]]) -> InjectionResult:
    """``pairs`` holds (baseline, injected) scores of the same turn."""
    if len(pairs) < 2:
        raise ValueError("an injection summary needs at least two scored turn pairs")
    aspects = {}
    for a in ASPECTS:
        base = [float(getattr(b, a)) for b, _ in pairs]
        inj = [float(getattr(i, a)) for _, i in pairs]
        bm, im = sum(base) / len(base), sum(inj) / len(inj)
        test = log_ratio_t_test(list(zip(inj, base)))
        aspects[a] = {"baseline_mean": bm, "injected_mean": im,
                      "improvement_pct": 100.0 * (im / bm - 1.0), "t": test.t, "p_value": test.p}
    return InjectionResult(dimension, len(pairs), aspects)


def run_injection_experiment(slices: Sequence[ContextSlice], dimension: str,
                             human_behavior: Mapping[tuple[str, int], tuple[LabelSet, LabelSet]],
                             generate: Callable, judge: Callable,
                             max_workers: int = 1) -> tuple[InjectionResult, list[dict]]:
    """Generate and judge each slice with and without the human's behavior.

    ``generate(slice, directive)`` returns a GenerationRecord and
    ``judge(slice, response_text)`` a ResponseScore. ``human_behavior`` maps
    slice keys to the expert's (acts, tools) for that turn. Returns the
    summary and per-turn rows.
    """
    from ..agent import InjectionDirective

    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    missing = [s.key for s in slices if s.key not in human_behavior]
    if missing:
        raise ValueError(f"no human annotations for slices: {missing[:5]}")

    def one(s: ContextSlice) -> dict:
        acts, tools = human_behavior[s.key]
        directive = (InjectionDirective(target_acts=acts) if dimension == "acts"
                     else InjectionDirective(target_tools=tools))
        base = generate(s, None)
        inj = generate(s, directive)
        return {"dialog_id": s.dialog_id, "target_index": s.target_index,
                "directive": directive.to_json(), "baseline": base, "injected": inj,
                "baseline_score": judge(s, base.response_text),
                "injected_score": judge(s, inj.response_text)}

    rows: list[dict] = []
    if max_workers <= 1:
        for s in slices:
            try:
                rows.append(one(s))
            except Exception as exc:
                raise InjectionAborted(f"injection stopped at {s.dialog_id}#{s.target_index}: {exc}", rows) from exc
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(one, s) for s in slices]
            for s, fut in zip(slices, futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    raise InjectionAborted(f"injection stopped at {s.dialog_id}#{s.target_index}: {exc}",
                                           rows) from exc
    result = summarize_injection(dimension, [(r["baseline_score"], r["injected_score"]) for r in rows])
    return result, rows


# --- complexity vs gap --------------------------------------------------------

def complexity_gap_correlation(complexity: Mapping[str, float],
                               gaps: Mapping[str, Mapping[str, float]]) -> dict:
    """Per-model Pearson r of (task complexity, discrepancy), then averaged.

    ``gaps`` maps model -> task -> discrepancy. Models with fewer than two
    tasks, or without variance, are listed but excluded from the average.
    """
    per_model: dict[str, float | None] = {}
    for model, by_task in sorted(gaps.items()):
        tasks = sorted(t for t in by_task if t in complexity)
        x = [complexity[t] for t in tasks]
        y = [by_task[t] for t in tasks]
        try:
            per_model[model] = pearson_r(x, y)
        except ValueError:
            per_model[model] = None
    usable = [r for r in per_model.values() if r is not None and math.isfinite(r)]
    return {"per_model": per_model, "average": _mean(usable), "n_models": len(usable)}


__all__ = [
    "AlignmentSplit", "DIMENSIONS", "GapSummary", "InjectionAborted", "InjectionResult", "JoinedTurn",
    "KnowledgeSummary", "complexity_gap_correlation", "gap_summary", "knowledge_summary",
    "run_injection_experiment", "split_by_alignment", "summarize_injection",
]
