"""Dialog data model, corpus ingestion, statistics and teacher-forcing slices."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .labels import LabelSet


class Speaker(str, Enum):
    HUMAN_EXPERT = "human_expert"
    USER = "user"


class Task(str, Enum):
    MULTIWOZ = "multiwoz"
    SPOKENWOZ = "spokenwoz"
    PCS = "pcs"
    CUSTOM = "custom"


# transcript speaker string -> Speaker
_WIRE_SPEAKERS = {"agent": Speaker.HUMAN_EXPERT, "user": Speaker.USER}
_SPEAKER_WIRE = {v: k for k, v in _WIRE_SPEAKERS.items()}


class CorpusError(ValueError):
    """Malformed or inconsistent corpus input."""

    def __init__(self, message: str, *, file: str | None = None, line: int | None = None,
                 field_name: str | None = None):
        where = ""
        if file is not None:
            where = f"{file}"
            if line is not None:
                where += f":{line}"
            where += ": "
        if field_name:
            message = f"field '{field_name}': {message}"
        super().__init__(where + message)
        self.file = file
        self.line = line
        self.field_name = field_name


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: Speaker
    text: str
    gold_acts: LabelSet | None = None
    gold_tools: LabelSet | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"turn {self.index}: text is empty")

    @property
    def is_expert(self) -> bool:
        return self.speaker is Speaker.HUMAN_EXPERT


@dataclass(frozen=True)
class Dialog:
    id: str
    task: Task
    turns: tuple[Turn, ...]
    success_label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        for pos, turn in enumerate(self.turns):
            if turn.index != pos:
                raise ValueError(
                    f"dialog {self.id}: turn indexes must be contiguous from 0; "
                    f"expected {pos}, found {turn.index}")
        if self.success_label not in (None, 0, 1):
            raise ValueError(f"dialog {self.id}: success must be 0 or 1")

    def expert_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.is_expert]


@dataclass(frozen=True)
class CorpusStats:
    chat_count: int
    mean_turns_per_chat: float
    mean_words_per_turn: float

    def to_json(self) -> dict:
        return {"chat_count": self.chat_count,
                "mean_turns_per_chat": self.mean_turns_per_chat,
                "mean_words_per_turn": self.mean_words_per_turn}


@dataclass(frozen=True)
class ContextSlice:
    dialog_id: str
    target_index: int
    context: tuple[Turn, ...]
    reference_response: str
    task: Task = Task.CUSTOM
    gold_acts: LabelSet | None = field(default=None, compare=False)
    gold_tools: LabelSet | None = field(default=None, compare=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.dialog_id, self.target_index)

    @property
    def user_input(self) -> str:
        """Most recent user utterance in the context ("" when the expert opens)."""
        for turn in reversed(self.context):
            if turn.speaker is Speaker.USER:
                return turn.text
        return ""


# --- ingestion --------------------------------------------------------------

def load_corpus(path: str | Path, task: Task | str, fmt: str = "auto") -> list[Dialog]:
    """Load every dialog under ``path``.

    ``fmt`` is ``"transcript"`` (newline-delimited records), ``"multiwoz22"``
    (MultiWOZ 2.2 style export, file or directory) or ``"auto"``, which picks
    transcript for ``.jsonl`` files and the MultiWOZ adapter otherwise.
    """
    path = Path(path)
    task = Task(task)
    if not path.exists():
        raise CorpusError(f"corpus path does not exist: {path}")
    if fmt == "auto":
        fmt = "transcript" if path.is_file() and path.suffix == ".jsonl" else "multiwoz22"
    if fmt == "transcript":
        dialogs = _load_transcript(path, task)
    elif fmt == "multiwoz22":
        dialogs = load_multiwoz22(path, task)
    else:
        raise CorpusError(f"unknown corpus format {fmt!r}")
    _check_unique(dialogs, str(path))
    return dialogs


def _check_unique(dialogs: Iterable[Dialog], source: str) -> None:
    seen: set[str] = set()
    for d in dialogs:
        if d.id in seen:
            raise CorpusError(f"duplicate dialog id {d.id!r}", file=source, field_name="id")
        seen.add(d.id)


def _load_transcript(path: Path, task: Task) -> list[Dialog]:
    files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    dialogs = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"invalid JSON: {exc.msg}", file=str(f), line=lineno) from None
                dialogs.append(parse_transcript_record(record, task, file=str(f), line=lineno))
    return dialogs


def parse_transcript_record(record: dict, task: Task, *, file: str | None = None,
                            line: int | None = None) -> Dialog:
    def fail(msg, name):
        raise CorpusError(msg, file=file, line=line, field_name=name)

    if not isinstance(record, dict):
        fail("record must be an object", None)
    dialog_id = record.get("id")
    if not isinstance(dialog_id, str) or not dialog_id:
        fail("missing or empty dialog id", "id")
    rec_task = record.get("task", task.value)
    if rec_task != task.value:
        fail(f"task {rec_task!r} does not match requested task {task.value!r}", "task")
    raw_turns = record.get("turns")
    if not isinstance(raw_turns, list) or not raw_turns:
        fail("turns must be a non-empty list", "turns")

    turns = []
    for pos, raw in enumerate(raw_turns):
        prefix = f"turns[{pos}]"
        if not isinstance(raw, dict):
            fail("turn must be an object", prefix)
        idx = raw.get("index", pos)
        if idx != pos:
            fail(f"turn index gap: expected {pos}, found {idx}", f"{prefix}.index")
        speaker = _WIRE_SPEAKERS.get(raw.get("speaker"))
        if speaker is None:
            fail(f"speaker must be 'agent' or 'user', got {raw.get('speaker')!r}", f"{prefix}.speaker")
        text = raw.get("text")
        if not isinstance(text, str) or not text.strip():
            fail("text must be a non-empty string", f"{prefix}.text")
        acts = _label_field(raw, "acts", prefix, fail)
        tools = _label_field(raw, "tools", prefix, fail)
        turns.append(Turn(pos, speaker, text, acts, tools))

    success = record.get("success")
    if success is not None and (isinstance(success, bool) or success not in (0, 1)):
        fail("success must be 0 or 1", "success")
    return Dialog(dialog_id, task, tuple(turns), success)


def _label_field(raw: dict, name: str, prefix: str, fail) -> LabelSet | None:
    if name not in raw or raw[name] is None:
        return None
    value = raw[name]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        fail("must be a list of strings", f"{prefix}.{name}")
    return LabelSet(frozenset(value))


def dialog_to_record(dialog: Dialog) -> dict:
    turns = []
    for t in dialog.turns:
        raw: dict = {"index": t.index, "speaker": _SPEAKER_WIRE[t.speaker], "text": t.text}
        if t.gold_acts is not None:
            raw["acts"] = sorted(t.gold_acts.labels)
        if t.gold_tools is not None:
            raw["tools"] = sorted(t.gold_tools.labels)
        turns.append(raw)
    record: dict = {"id": dialog.id, "task": dialog.task.value, "turns": turns}
    if dialog.success_label is not None:
        record["success"] = dialog.success_label
    return record


def write_corpus(dialogs: Iterable[Dialog], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogs:
            fh.write(json.dumps(dialog_to_record(d), ensure_ascii=False, sort_keys=True) + "\n")


# MultiWOZ 2.2 act type -> WOZ taxonomy label (with the greet/book merges)
MULTIWOZ_ACT_MAP = {
    "inform": "inform", "request": "request", "select": "select",
    "recommend": "recommend", "nooffer": "nooffer", "offerbook": "offerbook",
    "book": "book", "offerbooked": "book", "nobook": "nobook",
    "greet": "greet", "welcome": "greet", "bye": "greet", "thank": "greet",
    "thanks": "greet", "reqmore": "reqmore",
}


def map_multiwoz_acts(dialog_act: dict | None) -> LabelSet | None:
    if dialog_act is None:
        return None
    labels = set()
    for key in dialog_act:
        act = key.split("-", 1)[-1].lower()
        if act in MULTIWOZ_ACT_MAP:
            labels.add(MULTIWOZ_ACT_MAP[act])
    return LabelSet(frozenset(labels))


def load_multiwoz22(path: str | Path, task: Task | str = Task.MULTIWOZ) -> list[Dialog]:
    """Read a MultiWOZ 2.2 style export into :class:`Dialog` values.

    Accepts a JSON file holding a list of dialogs, a ``.jsonl`` file, or a
    directory of ``dialogues_*.json`` files. A sibling ``dialog_acts.json``
    (keyed dialogue_id -> turn_id) is used when turns carry no acts.
    """
    path = Path(path)
    task = Task(task)
    if path.is_dir():
        files = sorted(p for p in path.glob("*.json") if p.name != "dialog_acts.json")
        acts_file = path / "dialog_acts.json"
    else:
        files = [path]
        acts_file = path.parent / "dialog_acts.json"
    side_acts = json.loads(acts_file.read_text(encoding="utf-8")) if acts_file.exists() else {}

    dialogs = []
    for f in files:
        if f.suffix == ".jsonl":
            raws = [json.loads(line) for line in f.read_text(encoding="utf-8").splitlines() if line.strip()]
        else:
            raws = json.loads(f.read_text(encoding="utf-8"))
            if isinstance(raws, dict):
                raws = [raws]
        for raw in raws:
            dialogs.append(_multiwoz_dialog(raw, task, side_acts, str(f)))
    return dialogs


def _multiwoz_dialog(raw: dict, task: Task, side_acts: dict, file: str) -> Dialog:
    dialog_id = raw.get("dialogue_id")
    if not dialog_id:
        raise CorpusError("missing dialogue_id", file=file, field_name="dialogue_id")
    turns_raw = raw.get("turns")
    if isinstance(turns_raw, dict):  # columnar layout
        n = len(turns_raw.get("utterance", []))
        turns_raw = [{k: v[i] for k, v in turns_raw.items() if isinstance(v, list) and len(v) == n}
                     for i in range(n)]
    if not turns_raw:
        raise CorpusError(f"dialog {dialog_id} has no turns", file=file, field_name="turns")

    turns = []
    for pos, t in enumerate(turns_raw):
        spk = t.get("speaker")
        if spk in ("SYSTEM", "system", 1):
            speaker = Speaker.HUMAN_EXPERT
        elif spk in ("USER", "user", 0):
            speaker = Speaker.USER
        else:
            raise CorpusError(f"dialog {dialog_id}: unknown speaker {spk!r}", file=file,
                              field_name=f"turns[{pos}].speaker")
        text = t.get("utterance", "")
        if not isinstance(text, str) or not text.strip():
            raise CorpusError(f"dialog {dialog_id}: empty utterance", file=file,
                              field_name=f"turns[{pos}].utterance")
        act_obj = t.get("dialog_act")
        if act_obj is None and isinstance(t.get("dialogue_acts"), dict):
            act_obj = t["dialogue_acts"].get("dialog_act")
            if isinstance(act_obj, dict) and "act_type" in act_obj:
                act_obj = {a: [] for a in act_obj["act_type"]}
        if act_obj is None:
            turn_id = str(t.get("turn_id", pos))
            act_obj = side_acts.get(dialog_id, {}).get(turn_id, {}).get("dialog_act")
        acts = map_multiwoz_acts(act_obj) if speaker is Speaker.HUMAN_EXPERT else None
        turns.append(Turn(pos, speaker, text, acts, None))
    return Dialog(dialog_id, task, tuple(turns), raw.get("success"))


# --- statistics and slicing -------------------------------------------------

def count_words(text: str) -> int:
    return len(text.split())


def corpus_statistics(dialogs: Sequence[Dialog]) -> CorpusStats:
    if not dialogs:
        raise ValueError("corpus_statistics needs at least one dialog")
    n_turns = sum(len(d.turns) for d in dialogs)
    n_words = sum(count_words(t.text) for d in dialogs for t in d.turns)
    return CorpusStats(
        chat_count=len(dialogs),
        mean_turns_per_chat=n_turns / len(dialogs),
        mean_words_per_turn=n_words / n_turns if n_turns else 0.0,
    )


def slice_contexts(dialog: Dialog) -> list[ContextSlice]:
    slices = []
    for turn in dialog.turns:
        if turn.is_expert:
            slices.append(ContextSlice(
                dialog_id=dialog.id,
                target_index=turn.index,
                context=dialog.turns[: turn.index],
                reference_response=turn.text,
                task=dialog.task,
                gold_acts=turn.gold_acts,
                gold_tools=turn.gold_tools,
            ))
    return slices
