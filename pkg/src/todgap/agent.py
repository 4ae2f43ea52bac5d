"""Zero-shot ReAct agent regenerating one teacher-forced expert turn at a time."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

from .annotators import _template, load_taxonomy, taxonomy_for_task
from .corpus import ContextSlice, Speaker, Task, Turn
from .gateway import ChatRequest, Gateway, GatewayError, Message, ToolSchema
from .labels import LabelSet
from .toolbox import ToolArgumentError, Toolbox, ToolResult, ToolSpec, registry_for
from .toolbox.woz import WozDatabase, render_entity_digest

log = logging.getLogger(__name__)

DEFAULT_MAX_REACT_STEPS = 6
INJECTION_HEADER = "***Behavior Targets***"


class AgentError(RuntimeError):
    """A turn could not be generated; carries the slice it belongs to."""

    def __init__(self, message: str, slice_key: tuple[str, int] | None = None):
        super().__init__(message)
        self.slice_key = slice_key


@dataclass(frozen=True)
class InjectionDirective:
    target_acts: LabelSet | None = None
    target_tools: LabelSet | None = None

    def __post_init__(self):
        if self.target_acts is None and self.target_tools is None:
            raise ValueError("an injection directive needs target acts, target tools, or both")

    def to_json(self) -> dict:
        out = {}
        if self.target_acts is not None:
            out["target_acts"] = sorted(self.target_acts)
        if self.target_tools is not None:
            out["target_tools"] = sorted(self.target_tools)
        return out

    @classmethod
    def from_json(cls, obj: Mapping | None) -> "InjectionDirective | None":
        if not obj:
            return None
        acts, tools = obj.get("target_acts"), obj.get("target_tools")
        return cls(LabelSet.of(*acts) if acts is not None else None,
                   LabelSet.of(*tools) if tools is not None else None)


@dataclass(frozen=True)
class AgentConfig:
    task: Task
    model_id: str
    registry: tuple[ToolSpec, ...]
    entity_digest: str = ""
    guidelines: str = ""
    max_react_steps: int = DEFAULT_MAX_REACT_STEPS
    temperature: float = 0.0
    base_task: Task | None = None  # template and registry source for custom tasks

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "registry", tuple(self.registry))
        if self.max_react_steps < 1:
            raise ValueError("max_react_steps must be >= 1")
        if self.task is Task.CUSTOM and self.base_task is None:
            raise ValueError("custom tasks need a base_task")
        expected = {s.name for s in registry_for(self.task, self.base_task)}
        if {s.name for s in self.registry} != expected:
            raise ValueError(f"registry does not match task {self.task.value}")

    @property
    def template_task(self) -> Task:
        return Task(self.base_task) if self.task is Task.CUSTOM else self.task

    @classmethod
    def for_task(cls, task: Task | str, model_id: str, db: WozDatabase | None = None,
                 max_react_steps: int = DEFAULT_MAX_REACT_STEPS, temperature: float = 0.0,
                 base_task: Task | str | None = None) -> "AgentConfig":
        task = Task(task)
        base = Task(base_task) if base_task is not None else None
        effective = base if task is Task.CUSTOM else task
        digest = render_entity_digest(db) if db is not None and effective is not Task.PCS else ""
        return cls(task, model_id, registry_for(task, base), digest,
                   _template("guidelines.txt").strip(), max_react_steps, temperature, base)

    @property
    def act_labels(self) -> tuple[str, ...]:
        return load_taxonomy(taxonomy_for_task(self.template_task)).labels

    @property
    def tool_schemas(self) -> tuple[ToolSchema, ...]:
        return tuple(ToolSchema(s.name, s.description, s.parameters) for s in self.registry)


def _join(labels: LabelSet) -> str:
    return ", ".join(labels) if len(labels) else "none"


def injection_block(config: AgentConfig, directive: InjectionDirective) -> str:
    lines = ["", "", INJECTION_HEADER]
    if directive.target_acts is not None:
        directive.target_acts.check_within(config.act_labels, "dialog act")
        lines.append(f"For this turn, respond using dialog acts: {_join(directive.target_acts)}.")
    if directive.target_tools is not None:
        directive.target_tools.check_within([s.name for s in config.registry], "tool")
        if len(directive.target_tools):
            lines.append(f"For this turn, use exactly these tools: {_join(directive.target_tools)}.")
        else:
            lines.append("For this turn, use no tools.")
    return "\n".join(lines)


def build_system_prompt(config: AgentConfig, directive: InjectionDirective | None = None) -> str:
    template = _template(f"agent_{config.template_task.value}.txt")
    injection = injection_block(config, directive) if directive is not None else ""
    return template.format(entity_digest=config.entity_digest, guidelines=config.guidelines,
                           injection=injection)


def context_messages(context: Sequence[Turn]) -> list[Message]:
    """Expert turns become assistant messages, user turns user messages."""
    return [Message("assistant" if t.speaker is Speaker.HUMAN_EXPERT else "user", t.text) for t in context]


@dataclass(frozen=True)
class ToolInvocation:
    name: str
    arguments: Mapping[str, Any]
    result: ToolResult | None = None
    error: str | None = None

    def to_json(self) -> dict:
        out: dict = {"name": self.name, "arguments": dict(self.arguments)}
        if self.result is not None:
            out["result"] = self.result.to_json()
        if self.error is not None:
            out["error"] = self.error
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ToolInvocation":
        res = obj.get("result")
        return cls(obj["name"], dict(obj.get("arguments") or {}),
                   ToolResult.from_json(res) if res is not None else None, obj.get("error"))


@dataclass(frozen=True)
class GenerationRecord:
    dialog_id: str
    target_index: int
    model_id: str
    response_text: str
    tool_invocations: tuple[ToolInvocation, ...] = ()
    knowledge_text: str = ""
    steps_used: int = 1
    forced_final: bool = False
    injected: InjectionDirective | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tool_invocations", tuple(self.tool_invocations))
        if not self.response_text.strip():
            raise ValueError("response_text must be non-empty")

    @property
    def key(self) -> tuple[str, int]:
        return (self.dialog_id, self.target_index)

    @property
    def tools(self) -> LabelSet:
        return LabelSet(frozenset(inv.name for inv in self.tool_invocations))

    @property
    def retrieved_knowledge(self) -> bool:
        return bool(self.knowledge_text.strip())

    def to_json(self) -> dict:
        out = {
            "dialog_id": self.dialog_id, "target_index": self.target_index,
            "model_id": self.model_id, "response_text": self.response_text,
            "tool_invocations": [inv.to_json() for inv in self.tool_invocations],
            "knowledge_text": self.knowledge_text, "steps_used": self.steps_used,
            "forced_final": self.forced_final,
            "usage": {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens},
        }
        if self.injected is not None:
            out["injected"] = self.injected.to_json()
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "GenerationRecord":
        usage = obj.get("usage") or {}
        return cls(
            obj["dialog_id"], int(obj["target_index"]), obj["model_id"], obj["response_text"],
            tuple(ToolInvocation.from_json(i) for i in obj.get("tool_invocations", ())),
            obj.get("knowledge_text", ""), int(obj.get("steps_used", 1)),
            bool(obj.get("forced_final", False)), InjectionDirective.from_json(obj.get("injected")),
            int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)),
        )


def run_react_turn(slice_: ContextSlice, config: AgentConfig, gateway: Gateway, toolbox: Toolbox,
                   directive: InjectionDirective | None = None) -> GenerationRecord:
    """Regenerate the expert turn at ``slice_.target_index`` from its context.

    The model may call tools for up to ``max_react_steps`` provider calls; if
    it is still calling tools then, one extra call with tools disabled forces
    a final answer. A tool-argument error is reported back to the model once;
    a second one aborts the turn.
    """
    system_prompt = build_system_prompt(config, directive)
    schemas = config.tool_schemas
    messages = context_messages(slice_.context)
    invocations: list[ToolInvocation] = []
    usage = [0, 0]
    arg_errors = 0

    def call(tool_choice: str):
        request = ChatRequest(config.model_id, system_prompt, tuple(messages), schemas,
                              config.temperature, tool_choice=tool_choice)
        try:
            response = gateway.complete_chat(request)
        except GatewayError as exc:
            raise AgentError(f"{slice_.dialog_id}#{slice_.target_index}: {exc}", slice_.key) from exc
        usage[0] += response.usage.prompt_tokens
        usage[1] += response.usage.completion_tokens
        return response

    steps, text, forced = 0, None, False
    while steps < config.max_react_steps:
        response = call("auto")
        steps += 1
        if not response.tool_calls:
            text = response.content
            break
        messages.append(Message("assistant", response.content or "", tool_calls=response.tool_calls))
        for tc in response.tool_calls:
            try:
                result = toolbox.execute(tc.name, tc.arguments)
            except ToolArgumentError as exc:
                arg_errors += 1
                if arg_errors > 1:
                    raise AgentError(f"{slice_.dialog_id}#{slice_.target_index}: repeated tool "
                                     f"argument error ({tc.name}: {exc})", slice_.key) from exc
                invocations.append(ToolInvocation(tc.name, dict(tc.arguments), error=str(exc)))
                observation = json.dumps({"error": str(exc)}, sort_keys=True)
            else:
                invocations.append(ToolInvocation(tc.name, dict(tc.arguments), result))
                observation = result.observation()
            messages.append(Message("tool", observation, tool_call_id=tc.id))
    else:
        log.info("%s#%d: step budget spent, forcing a final answer", slice_.dialog_id, slice_.target_index)
        forced = True
        text = call("none").content

    if not text or not text.strip():
        raise AgentError(f"{slice_.dialog_id}#{slice_.target_index}: no final response text", slice_.key)
    knowledge = "\n".join(inv.result.knowledge_text for inv in invocations
                          if inv.result is not None and inv.result.knowledge_text
                          and toolbox.spec(inv.name).retrieves_knowledge)
    return GenerationRecord(slice_.dialog_id, slice_.target_index, config.model_id, text.strip(),
                            tuple(invocations), knowledge, steps, forced, directive, usage[0], usage[1])


def run_turns(slices: Sequence[ContextSlice], config: AgentConfig, gateway: Gateway, toolbox: Toolbox,
              directive_for: Callable[[ContextSlice], InjectionDirective | None] | None = None,
              max_workers: int = 1) -> list[GenerationRecord]:
    """Generate every slice; results come back in input order."""
    def one(s: ContextSlice) -> GenerationRecord:
        return run_react_turn(s, config, gateway, toolbox, directive_for(s) if directive_for else None)

    if max_workers <= 1:
        return [one(s) for s in slices]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, slices))


__all__ = [
    "AgentConfig", "AgentError", "DEFAULT_MAX_REACT_STEPS", "GenerationRecord", "InjectionDirective",
    "ToolInvocation", "build_system_prompt", "context_messages", "injection_block", "run_react_turn",
    "run_turns",
]
