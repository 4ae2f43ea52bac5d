"""Resumable experiment stages with manifests, driven by a RunConfig."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .agent import INJECTION_HEADER, AgentConfig, GenerationRecord, run_react_turn, run_turns
from .analysis.experiments import (InjectionAborted, JoinedTurn, complexity_gap_correlation, gap_summary,
                                   knowledge_summary, run_injection_experiment, split_by_alignment)
from .analysis.report import build_report, jsonable, resolve_targets, write_report
from .annotators import (AnnotationRecord, classify_acts, classify_tools, load_taxonomy, random_baseline,
                         taxonomy_for_task, validate_classifier)
from .config import ConfigError, RunConfig
from .corpus import ContextSlice, Dialog, Task, corpus_statistics, dialog_to_record, load_corpus, \
    parse_transcript_record, slice_contexts
from .gateway import DiskCache, Gateway, HttpProvider, RetryPolicy, ScriptedProvider
from .gateway.cache import atomic_write_text
from .judge import ResponseScore, aggregate_dialog_scores, score_response, validate_judge
from .metrics import distinct_acts_per_dialog, task_complexity
from .toolbox import KnowledgeBase, Toolbox, WozDatabase

log = logging.getLogger(__name__)

COMMANDS = ("ingest", "generate", "annotate", "judge", "analyze", "inject", "report", "validate-classifiers")
TOKENIZATION = ("casefold; split on whitespace; strip leading/trailing punctuation "
                "(Unicode category P); drop empty tokens")


class PrerequisiteError(RuntimeError):
    """An upstream stage has not produced its outputs yet."""


class ManifestMismatchError(ConfigError):
    """Existing artifacts were produced under a different configuration."""


class ValidationFailure(RuntimeError):
    pass


def _slug(model_id: str) -> str:
    return model_id.replace("/", "__").replace(":", "_")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """One configured run rooted at ``cfg.output_dir``."""

    def __init__(self, cfg: RunConfig, force: bool = False, provider=None):
        self.cfg = cfg
        self.out = cfg.output_dir
        self.force = force
        self._provider = provider
        self._gateway: Gateway | None = None
        self._toolboxes: dict[str, Toolbox] = {}
        self._dbs: dict[str, WozDatabase | None] = {}

    # --- plumbing ---------------------------------------------------------

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            provider = self._provider
            if provider is None:
                if self.cfg.provider_kind == "scripted":
                    provider = ScriptedProvider.from_file(self.cfg.script)
                else:
                    provider = HttpProvider(base_url=self.cfg.base_url)
            policy = RetryPolicy(self.cfg.max_retries, self.cfg.backoff, self.cfg.max_parallel)
            self._gateway = Gateway(provider, DiskCache(self.cfg.cache_dir), policy)
        return self._gateway

    def map(self, fn: Callable, items: Sequence) -> list:
        if self.cfg.max_parallel <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.cfg.max_parallel) as pool:
            return list(pool.map(fn, items))

    def path(self, *parts: str) -> Path:
        return self.out.joinpath(*parts)

    def manifest_path(self, stage: str) -> Path:
        return self.path("manifests", f"{stage}.json")

    def read_manifest(self, stage: str) -> dict | None:
        p = self.manifest_path(stage)
        return json.loads(p.read_text(encoding="utf-8")) if p.exists() else None

    def _check_hash(self, stage: str, manifest: dict) -> bool:
        """True when the manifest belongs to this configuration."""
        if manifest.get("config_hash") == self.cfg.hash:
            return True
        if self.force:
            return False
        raise ManifestMismatchError(
            f"outputs of '{stage}' in {self.out} were produced with config hash "
            f"{manifest.get('config_hash')}, current is {self.cfg.hash}; rerun with --force to overwrite")

    def require(self, *stages: str) -> None:
        for stage in stages:
            m = self.read_manifest(stage)
            if m is None or not m.get("complete"):
                raise PrerequisiteError(f"missing outputs of '{stage}'; run `todgap {stage}` first")
            self._check_hash(stage, m)

    def done(self, stage: str) -> bool:
        m = self.read_manifest(stage)
        if m is None:
            return False
        return self._check_hash(stage, m) and bool(m.get("complete"))

    def write_manifest(self, stage: str, inputs: Iterable[Path], outputs: Iterable[Path],
                       complete: bool = True, **extra) -> None:
        def entry(p: Path) -> dict:
            rel = p.relative_to(self.out).as_posix() if p.is_relative_to(self.out) else p.name
            return {"path": rel, "sha256": _sha256(p)} if p.is_file() else {"path": rel}

        body = {"stage": stage, "config_hash": self.cfg.hash, "complete": complete,
                "inputs": [entry(p) for p in inputs], "outputs": [entry(p) for p in outputs], **extra}
        atomic_write_text(self.manifest_path(stage), json.dumps(body, sort_keys=True, indent=1) + "\n")

    def write_jsonl(self, path: Path, records: Iterable[dict]) -> Path:
        lines = [json.dumps({**r, "config_hash": self.cfg.hash}, sort_keys=True, ensure_ascii=False)
                 for r in records]
        atomic_write_text(path, "".join(line + "\n" for line in lines))
        return path

    def read_jsonl(self, path: Path) -> list[dict]:
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                if row.pop("config_hash", None) != self.cfg.hash and not self.force:
                    raise ManifestMismatchError(f"{path} was written under a different configuration")
                rows.append(row)
        return rows

    def write_json(self, path: Path, obj) -> Path:
        atomic_write_text(path, json.dumps(jsonable({**obj, "config_hash": self.cfg.hash}), sort_keys=True,
                                           indent=1, ensure_ascii=False, allow_nan=False) + "\n")
        return path

    def read_json(self, path: Path) -> dict:
        obj = json.loads(path.read_text(encoding="utf-8"))
        if obj.pop("config_hash", None) != self.cfg.hash and not self.force:
            raise ManifestMismatchError(f"{path} was written under a different configuration")
        return obj

    # --- shared loaders ---------------------------------------------------

    def dialogs(self, name: str) -> list[Dialog]:
        task = self.cfg.tasks[name].task
        return [parse_transcript_record(r, task) for r in self.read_jsonl(self.path("corpus", f"{name}.jsonl"))]

    def slices(self, name: str) -> list[ContextSlice]:
        return [s for d in self.dialogs(name) for s in slice_contexts(d)]

    def effective_task(self, name: str) -> Task:
        src = self.cfg.tasks[name]
        return src.base if src.task is Task.CUSTOM else src.task

    def db(self, name: str) -> WozDatabase | None:
        if name not in self._dbs:
            src = self.cfg.tasks[name]
            self._dbs[name] = WozDatabase.load(src.db) if src.db is not None else None
        return self._dbs[name]

    def toolbox(self, name: str) -> Toolbox:
        if name not in self._toolboxes:
            src = self.cfg.tasks[name]
            self._toolboxes[name] = Toolbox.for_task(src.task, self.db(name), KnowledgeBase.load(src.kb),
                                                     base=src.base)
        return self._toolboxes[name]

    def agent_config(self, name: str, model: str) -> AgentConfig:
        src = self.cfg.tasks[name]
        return AgentConfig.for_task(src.task, model, self.db(name), self.cfg.max_react_steps,
                                    self.cfg.agent_temperature, src.base)

    def generations(self, model: str, name: str) -> list[GenerationRecord]:
        path = self.path("generations", _slug(model), f"{name}.jsonl")
        return [GenerationRecord.from_json(r) for r in self.read_jsonl(path)]

    def annotations(self, source: str, name: str) -> dict[tuple[str, int], AnnotationRecord]:
        path = self.path("annotations", source, f"{name}.jsonl")
        recs = [AnnotationRecord.from_json(r) for r in self.read_jsonl(path)]
        return {(r.dialog_id, r.turn_index): r for r in recs}

    def scores(self, model: str, name: str) -> dict[tuple[str, int], ResponseScore]:
        path = self.path("scores", _slug(model), f"{name}.jsonl")
        return {(r["dialog_id"], r["target_index"]): ResponseScore.from_json(r["score"])
                for r in self.read_jsonl(path)}

    # --- stages -------------------------------------------------------------

    def ingest(self) -> bool:
        if self.done("ingest"):
            return False
        inputs, outputs, stats = [], [], {}
        for name, src in sorted(self.cfg.tasks.items()):
            dialogs = load_corpus(src.corpus, src.task, src.format)
            outputs.append(self.write_jsonl(self.path("corpus", f"{name}.jsonl"),
                                            (dialog_to_record(d) for d in dialogs)))
            stats[name] = corpus_statistics(dialogs).to_json()
            inputs.append(src.corpus)
        outputs.append(self.write_json(self.path("corpus", "stats.json"), {"stats": stats}))
        self.write_manifest("ingest", inputs, outputs, stats=stats)
        return True

    def generate(self) -> bool:
        self.require("ingest")
        if self.done("generate"):
            return False
        gw, outputs, counts = self.gateway, [], {}
        for model in self.cfg.agent_models:
            for name in sorted(self.cfg.tasks):
                config, toolbox = self.agent_config(name, model), self.toolbox(name)
                records = run_turns(self.slices(name), config, gw, toolbox, max_workers=self.cfg.max_parallel)
                outputs.append(self.write_jsonl(self.path("generations", _slug(model), f"{name}.jsonl"),
                                                (r.to_json() for r in records)))
                counts[f"{model}/{name}"] = len(records)
        self.write_manifest("generate", [self.manifest_path("ingest")], outputs, counts=counts)
        return True

    def annotate(self) -> bool:
        self.require("ingest", "generate")
        if self.done("annotate"):
            return False
        gw, model, outputs = self.gateway, self.cfg.classifier_model, []
        iso = load_taxonomy("iso")
        for name in sorted(self.cfg.tasks):
            task = self.effective_task(name)
            taxonomy = load_taxonomy(taxonomy_for_task(task))
            registry = self.toolbox(name).names

            def human(s: ContextSlice) -> dict:
                acts = s.gold_acts
                if acts is None:
                    acts = classify_acts(s.user_input, s.reference_response, taxonomy, gw, model)
                tools = s.gold_tools
                if tools is None:
                    tools = classify_tools(s.user_input, s.reference_response, registry, gw, model, task)
                iso_acts = classify_acts(s.user_input, s.reference_response, iso, gw, model)
                rec = AnnotationRecord(s.dialog_id, s.target_index, "human_expert", acts, tools, iso_acts)
                return {**rec.to_json(), "acts_source": "gold" if s.gold_acts is not None else "classifier",
                        "tools_source": "gold" if s.gold_tools is not None else "classifier"}

            rows = self.map(human, self.slices(name))
            outputs.append(self.write_jsonl(self.path("annotations", "human", f"{name}.jsonl"), rows))

            for agent_model in self.cfg.agent_models:
                by_key = {s.key: s for s in self.slices(name)}

                def agent(g: GenerationRecord) -> dict:
                    s = by_key[g.key]
                    acts = classify_acts(s.user_input, g.response_text, taxonomy, gw, model)
                    rec = AnnotationRecord(g.dialog_id, g.target_index, "agent", acts, g.tools)
                    return {**rec.to_json(), "acts_source": "classifier", "tools_source": "invocations"}

                rows = self.map(agent, self.generations(agent_model, name))
                outputs.append(self.write_jsonl(
                    self.path("annotations", _slug(agent_model), f"{name}.jsonl"), rows))
        self.write_manifest("annotate", [self.manifest_path("generate")], outputs)
        return True

    def judge(self) -> bool:
        self.require("ingest", "generate")
        if self.done("judge"):
            return False
        gw, outputs = self.gateway, []
        for model in self.cfg.agent_models:
            for name in sorted(self.cfg.tasks):
                by_key = {s.key: s for s in self.slices(name)}

                def one(g: GenerationRecord) -> dict:
                    s = by_key[g.key]
                    score = score_response(s.context, s.user_input, g.response_text, gw, self.cfg.judge_model)
                    return {"dialog_id": g.dialog_id, "target_index": g.target_index, "source": "agent",
                            "score": score.to_json()}

                rows = self.map(one, self.generations(model, name))
                outputs.append(self.write_jsonl(self.path("scores", _slug(model), f"{name}.jsonl"), rows))
        self.write_manifest("judge", [self.manifest_path("generate")], outputs)
        return True

    def joined(self, model: str, name: str, with_scores: bool) -> list[JoinedTurn]:
        human = self.annotations("human", name)
        agent = self.annotations(_slug(model), name)
        scores = self.scores(model, name) if with_scores else {}
        refs = {s.key: s.reference_response for s in self.slices(name)}
        out = []
        for g in self.generations(model, name):
            h, a = human[g.key], agent[g.key]
            out.append(JoinedTurn(g.dialog_id, g.target_index, h.acts, a.acts, h.tools, a.tools,
                                  refs[g.key], g.response_text, g.knowledge_text, scores.get(g.key)))
        return out

    def analyze(self) -> bool:
        with_scores = self.cfg.stages["score"]
        self.require("annotate", *(("judge",) if with_scores else ()))
        if self.done("analyze"):
            return False
        cfg = self.cfg
        stats = self.read_json(self.path("corpus", "stats.json"))["stats"]
        complexity = {}
        for name in sorted(cfg.tasks):
            dialogs = self.dialogs(name)
            human = self.annotations("human", name)
            iso = {d.id: [human[(d.id, t.index)].iso_acts for t in d.turns if (d.id, t.index) in human]
                   for d in dialogs}
            score = task_complexity(dialogs, iso, cfg.C, cfg.d_max)
            complexity[name] = {**score.to_json(),
                                "mean_turns": sum(len(d.turns) for d in dialogs) / len(dialogs),
                                "mean_distinct_acts": sum(distinct_acts_per_dialog(v) for v in iso.values())
                                / len(dialogs)}

        gaps, knowledge, judge, alignment = {}, {}, {}, {}
        for model in cfg.agent_models:
            for name in sorted(cfg.tasks):
                turns = self.joined(model, name, with_scores)
                gaps.setdefault(model, {})[name] = {
                    dim: gap_summary(dim, turns, cfg.bootstrap_resamples, cfg.seed).to_json()
                    for dim in ("acts", "tools")}
                ktools = [s.name for s in self.toolbox(name).registry.values() if s.retrieves_knowledge]
                knowledge.setdefault(model, {})[name] = knowledge_summary(turns, ktools).to_json()
                if with_scores:
                    judge.setdefault(model, {})[name] = self._judge_section(name, turns)
                    alignment.setdefault(model, {})[name] = {
                        dim: split_by_alignment(turns, dim, cfg.alignment_threshold).to_json()
                        for dim in ("acts", "tools")}

        correlation = complexity_gap_correlation(
            {n: c["composite"] for n, c in complexity.items()},
            {m: {n: g["acts"]["discrepancy"] for n, g in by_task.items()} for m, by_task in gaps.items()})
        body = {"corpora": stats, "complexity": complexity, "gaps": gaps, "knowledge": knowledge,
                "judge": judge, "alignment": alignment, "correlation": correlation}
        out = self.write_json(self.path("analysis", "analysis.json"), body)
        self.write_manifest("analyze", [self.manifest_path("annotate")], [out])
        return True

    def _judge_section(self, name: str, turns: Sequence[JoinedTurn]) -> dict:
        by_dialog: dict[str, list[ResponseScore]] = {}
        for t in turns:
            by_dialog.setdefault(t.dialog_id, []).append(t.score)
        dialog_means = {d: aggregate_dialog_scores(s) for d, s in sorted(by_dialog.items())}
        section = {"turn_means": aggregate_dialog_scores([t.score for t in turns]),
                   "dialog_means": dialog_means, "n_turns": len(turns), "validation": None}
        labels = {d.id: d.success_label for d in self.dialogs(name) if d.success_label is not None}
        try:
            section["validation"] = validate_judge(dialog_means, labels)
        except ValueError as exc:
            section["validation_skipped"] = str(exc)
        return section

    def inject(self) -> bool:
        self.require("annotate")
        if self.done("inject"):
            return False
        gw, cfg, outputs, summary = self.gateway, self.cfg, [], {}
        for model in cfg.agent_models:
            for name in sorted(cfg.tasks):
                config, toolbox = self.agent_config(name, model), self.toolbox(name)
                human = self.annotations("human", name)
                behavior = {k: (r.acts, r.tools) for k, r in human.items()}
                slices = self.slices(name)

                def generate(s, directive, config=config, toolbox=toolbox):
                    return run_react_turn(s, config, gw, toolbox, directive)

                def judge(s, text):
                    return score_response(s.context, s.user_input, text, gw, cfg.judge_model)

                for dim in cfg.inject_dimensions:
                    path = self.path("injection", _slug(model), name, f"{dim}.jsonl")
                    try:
                        result, rows = run_injection_experiment(slices, dim, behavior, generate, judge,
                                                                cfg.max_parallel)
                    except InjectionAborted as exc:
                        outputs.append(self.write_jsonl(path, (_injection_row(r) for r in exc.partial)))
                        self.write_manifest("inject", [self.manifest_path("annotate")], outputs,
                                            complete=False, error=str(exc))
                        raise
                    outputs.append(self.write_jsonl(path, (_injection_row(r) for r in rows)))
                    summary.setdefault(model, {}).setdefault(name, {})[dim] = result.to_json()
        outputs.append(self.write_json(self.path("injection", "summary.json"), {"injection": summary}))
        self.write_manifest("inject", [self.manifest_path("annotate")], outputs)
        return True

    def report(self) -> bool:
        with_inject = self.cfg.stages["inject"]
        self.require("analyze", *(("inject",) if with_inject else ()))
        if self.done("report"):
            return False
        cfg = self.cfg
        analysis = self.read_json(self.path("analysis", "analysis.json"))
        injection = (self.read_json(self.path("injection", "summary.json"))["injection"]
                     if with_inject else {})
        validations = None
        vpath = self.path("validation", "validation.json")
        if vpath.exists() and self.done("validate-classifiers"):
            validations = self.read_json(vpath)["validations"]
        targets = resolve_targets(analysis["gaps"], injection, analysis["correlation"], validations,
                                  cfg.target_model, (cfg.raw.get("targets") or {}).get("overrides"))
        report = build_report(
            self.metadata(), analysis["corpora"], analysis["complexity"], analysis["gaps"],
            knowledge=analysis["knowledge"], judge=analysis["judge"], alignment=analysis["alignment"],
            injection=injection, correlation=analysis["correlation"], targets=targets,
            validations=validations)
        outputs = write_report(report, self.path("report"))
        self.write_manifest("report", [self.manifest_path("analyze")], outputs)
        return True

    def metadata(self) -> dict:
        cfg = self.cfg
        return {
            "config_hash": cfg.hash, "harness_version": __version__, "seed": cfg.seed,
            "bootstrap_resamples": cfg.bootstrap_resamples, "bootstrap_unit": "dialog",
            "constants": cfg.constants, "provider": cfg.provider_kind,
            "models": {"agents": list(cfg.agent_models), "classifier": cfg.classifier_model,
                       "judge": cfg.judge_model},
            "agent": {"max_react_steps": cfg.max_react_steps, "temperature": cfg.agent_temperature},
            "tasks": {n: {"task": s.task.value, "base": s.base.value if s.base else None}
                      for n, s in sorted(cfg.tasks.items())},
            "rouge_tokenization": TOKENIZATION,
            "injection_wording": {"header": INJECTION_HEADER,
                                  "acts": "For this turn, respond using dialog acts: <acts>.",
                                  "tools": "For this turn, use exactly these tools: <tools>.",
                                  "no_tools": "For this turn, use no tools."},
            "stages": cfg.stages,
        }

    def validate_classifiers(self) -> bool:
        self.require("ingest")
        if self.done("validate-classifiers"):
            return False
        gw, model, cfg = self.gateway, self.cfg.classifier_model, self.cfg
        pools: dict[str, tuple[list, list, int]] = {}

        def add(key, preds, golds, size):
            p, g, _ = pools.get(key, ([], [], size))
            pools[key] = (p + preds, g + golds, size)

        for name in sorted(cfg.tasks):
            task = self.effective_task(name)
            tax = load_taxonomy(taxonomy_for_task(task))
            gold_slices = [s for s in self.slices(name) if s.gold_acts is not None]
            preds = self.map(lambda s: classify_acts(s.user_input, s.reference_response, tax, gw, model),
                             gold_slices)
            if gold_slices:
                add(f"acts:{tax.name}", preds, [s.gold_acts for s in gold_slices], len(tax.labels))

        # tool classifiers are checked against the tools agents actually invoked
        if self.read_manifest("generate") is not None:
            self.require("generate")
            for name in sorted(cfg.tasks):
                task, registry = self.effective_task(name), self.toolbox(name).names
                by_key = {s.key: s for s in self.slices(name)}
                for agent_model in cfg.agent_models:
                    gens = self.generations(agent_model, name)
                    preds = self.map(lambda g: classify_tools(by_key[g.key].user_input, g.response_text,
                                                              registry, gw, model, task), gens)
                    add(f"tools:{name}", preds, [g.tools for g in gens], len(registry))

        validations = {}
        for key, (preds, golds, size) in sorted(pools.items()):
            v = validate_classifier(preds, golds).to_json()
            v["random_baseline"] = random_baseline(golds, size, trials=100, seed=cfg.seed)
            validations[key] = v
        out = self.write_json(self.path("validation", "validation.json"), {"validations": validations})
        self.write_manifest("validate-classifiers", [self.manifest_path("ingest")], [out])
        if not validations:
            raise ValidationFailure("no gold annotations found to validate classifiers against")
        low = {k: v["micro_f1"] for k, v in validations.items()
               if cfg.min_classifier_f1 is not None and v["micro_f1"] < cfg.min_classifier_f1}
        if low:
            raise ValidationFailure(f"classifier micro-F1 below {cfg.min_classifier_f1}: {low}")
        return True

    STAGE_METHODS = {"ingest": "ingest", "generate": "generate", "annotate": "annotate", "judge": "judge",
                     "analyze": "analyze", "inject": "inject", "report": "report",
                     "validate-classifiers": "validate_classifiers"}

    def run_stage(self, command: str) -> bool:
        return getattr(self, self.STAGE_METHODS[command])()


def _injection_row(row: dict) -> dict:
    return {"dialog_id": row["dialog_id"], "target_index": row["target_index"],
            "directive": row["directive"], "baseline": row["baseline"].to_json(),
            "injected": row["injected"].to_json(), "baseline_score": row["baseline_score"].to_json(),
            "injected_score": row["injected_score"].to_json()}


def pipeline_commands(cfg: RunConfig) -> list[str]:
    """Commands of a full run, honoring the stage toggles."""
    cmds = ["ingest"]
    if cfg.stages["generate"]:
        cmds.append("generate")
    if cfg.stages["annotate"]:
        cmds.append("annotate")
    if cfg.stages["score"]:
        cmds.append("judge")
    if cfg.stages["analyze"]:
        cmds.append("analyze")
    if cfg.stages["inject"]:
        cmds.append("inject")
    if cfg.stages["analyze"]:
        cmds.append("report")
    return cmds


def run_pipeline(cfg: RunConfig, force: bool = False, provider=None) -> Run:
    run = Run(cfg, force=force, provider=provider)
    for cmd in pipeline_commands(cfg):
        ran = run.run_stage(cmd)
        log.info("%s: %s", cmd, "done" if ran else "already complete, skipped")
    return run


__all__ = ["COMMANDS", "ManifestMismatchError", "PrerequisiteError", "Run", "ValidationFailure",
           "pipeline_commands", "run_pipeline"]
