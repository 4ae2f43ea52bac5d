"""Run configuration: one YAML file, secrets only from the environment."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .corpus import Task
from .metrics import DEFAULT_ALIGNMENT_THRESHOLD, DEFAULT_MAX_ACTS, DEFAULT_TURN_CONSTANT

STAGES = ("generate", "annotate", "score", "analyze", "inject")
PROVIDER_KINDS = ("scripted", "http")
# keys that only say where or how fast to run; they never change results
_UNHASHED = (("output_dir",), ("cache_dir",), ("provider", "max_parallel"))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSource:
    task: Task
    corpus: Path
    format: str = "auto"
    db: Path | None = None
    kb: Path | None = None
    base: Task | None = None


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    root: Path
    tasks: dict[str, TaskSource]
    output_dir: Path
    cache_dir: Path
    agent_models: tuple[str, ...]
    classifier_model: str
    judge_model: str
    provider_kind: str
    script: Path | None
    base_url: str | None
    max_retries: int
    backoff: float
    max_parallel: int
    seed: int
    bootstrap_resamples: int
    C: float
    d_max: int
    alignment_threshold: float
    max_react_steps: int
    agent_temperature: float
    stages: dict[str, bool]
    inject_dimensions: tuple[str, ...]
    target_model: str
    min_classifier_f1: float | None
    hash: str = field(default="")

    @property
    def constants(self) -> dict:
        return {"C": self.C, "d_max": self.d_max, "alignment_threshold": self.alignment_threshold}


def config_hash(raw: dict) -> str:
    body = copy.deepcopy(raw)
    for path in _UNHASHED:
        node = body
        for key in path[:-1]:
            node = node.get(key) or {}
        if isinstance(node, dict):
            node.pop(path[-1], None)
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    return value


def _resolve(root: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (root / p)


def _number(section: dict, key: str, default, kind, name: str):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}.{key} must be a {kind.__name__}, got {value!r}") from None


def parse_config(raw: dict, root: Path) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    raw = copy.deepcopy(raw)

    tasks = {}
    for name, spec in _section(raw, "tasks").items():
        if isinstance(spec, str):
            spec = {"corpus": spec}
        try:
            task = Task(spec.get("task", name))
        except ValueError:
            raise ConfigError(f"tasks.{name}: unknown task {spec.get('task', name)!r}") from None
        if "corpus" not in spec:
            raise ConfigError(f"tasks.{name}: 'corpus' is required")
        base = spec.get("base")
        if task is Task.CUSTOM and base is None:
            raise ConfigError(f"tasks.{name}: custom tasks need 'base' (multiwoz, spokenwoz or pcs)")
        tasks[name] = TaskSource(task, _resolve(root, spec["corpus"]), spec.get("format", "auto"),
                                 _resolve(root, spec.get("db")), _resolve(root, spec.get("kb")),
                                 Task(base) if base is not None else None)
    if not tasks:
        raise ConfigError("no tasks configured")

    models = _section(raw, "models")
    agents = models.get("agents") or models.get("agent")
    if isinstance(agents, str):
        agents = [agents]
    if not agents:
        raise ConfigError("models.agents must list at least one model id")
    for key in ("classifier", "judge"):
        if not isinstance(models.get(key), str):
            raise ConfigError(f"models.{key} must be a model id")

    provider = _section(raw, "provider")
    kind = provider.get("kind", "http")
    if kind not in PROVIDER_KINDS:
        raise ConfigError(f"provider.kind must be one of {PROVIDER_KINDS}")
    script = _resolve(root, provider.get("script"))
    if kind == "scripted" and script is None:
        raise ConfigError("provider.script is required for the scripted provider")

    constants = _section(raw, "constants")
    agent = _section(raw, "agent")
    stages_raw = _section(raw, "stages")
    unknown = sorted(set(stages_raw) - set(STAGES))
    if unknown:
        raise ConfigError(f"unknown stage toggle(s): {unknown}")
    inject = _section(raw, "inject")
    dims = tuple(inject.get("dimensions", ("acts", "tools")))
    if not set(dims) <= {"acts", "tools"}:
        raise ConfigError("inject.dimensions may only contain 'acts' and 'tools'")

    output_dir = _resolve(root, raw.get("output_dir", "out"))
    cfg = RunConfig(
        raw=raw, root=root, tasks=tasks,
        output_dir=output_dir,
        cache_dir=_resolve(root, raw.get("cache_dir")) or output_dir / "cache",
        agent_models=tuple(agents), classifier_model=models["classifier"], judge_model=models["judge"],
        provider_kind=kind, script=script, base_url=provider.get("base_url"),
        max_retries=_number(provider, "max_retries", 5, int, "provider"),
        backoff=_number(provider, "backoff", 1.0, float, "provider"),
        max_parallel=_number(provider, "max_parallel", 8, int, "provider"),
        seed=_number(raw, "seed", 0, int, "config"),
        bootstrap_resamples=_number(raw, "bootstrap_resamples", 2000, int, "config"),
        C=_number(constants, "C", DEFAULT_TURN_CONSTANT, float, "constants"),
        d_max=_number(constants, "d_max", DEFAULT_MAX_ACTS, int, "constants"),
        alignment_threshold=_number(constants, "alignment_threshold", DEFAULT_ALIGNMENT_THRESHOLD,
                                    float, "constants"),
        max_react_steps=_number(agent, "max_react_steps", 6, int, "agent"),
        agent_temperature=_number(agent, "temperature", 0.0, float, "agent"),
        stages={s: bool(stages_raw.get(s, True)) for s in STAGES},
        inject_dimensions=dims,
        target_model=_section(raw, "targets").get("model", "gpt-4o"),
        min_classifier_f1=_number(_section(raw, "validation"), "min_micro_f1", None, float, "validation"),
        hash=config_hash(raw),
    )
    if cfg.C <= 0 or cfg.d_max < 1 or not 0 < cfg.alignment_threshold <= 1:
        raise ConfigError("constants out of range (C > 0, d_max >= 1, 0 < alignment_threshold <= 1)")
    if cfg.max_react_steps < 1 or cfg.max_parallel < 1 or cfg.max_retries < 0:
        raise ConfigError("agent.max_react_steps and provider.max_parallel must be >= 1")
    return cfg


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read a YAML run configuration; relative paths resolve against its folder.

    ``overrides`` maps dotted keys (``"seed"``, ``"provider.max_parallel"``)
    to values applied before validation.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    raw = raw or {}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return parse_config(raw, path.parent.resolve())


__all__ = ["ConfigError", "PROVIDER_KINDS", "RunConfig", "STAGES", "TaskSource", "config_hash",
           "load_config", "parse_config"]
