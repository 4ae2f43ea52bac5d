"""Report assembly and flat CSV tables for plotting."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Mapping

REPORT_VERSION = 1
REQUIRED_SECTIONS = ("metadata", "corpora", "complexity", "gaps")

# Published reference values that need live models and the full corpora.
# Each is reported next to whatever this run measured for the same quantity.
REFERENCE_TARGETS: dict[str, dict] = {
    "act_classifier_f1_woz": {"value": 0.771, "source": "validation", "key": "acts:woz"},
    "act_classifier_f1_iso": {"value": 0.745, "source": "validation", "key": "acts:iso"},
    "tool_classifier_f1_multiwoz": {"value": 0.893, "source": "validation", "key": "tools:multiwoz"},
    "tool_classifier_f1_spokenwoz": {"value": 0.898, "source": "validation", "key": "tools:spokenwoz"},
    "tool_classifier_f1_pcs": {"value": 0.748, "source": "validation", "key": "tools:pcs"},
    "pcs_act_f1": {"value": 0.464, "source": "gap", "task": "pcs", "dimension": "acts"},
    "pcs_tool_f1": {"value": 0.139, "source": "gap", "task": "pcs", "dimension": "tools"},
    "complexity_gap_correlation": {"value": 0.963, "source": "correlation"},
    "pcs_act_injection_gain_pct": {"value": 22.4, "source": "injection", "task": "pcs", "dimension": "acts"},
    "pcs_tool_injection_gain_pct": {"value": 26.3, "source": "injection", "task": "pcs", "dimension": "tools"},
}
DEFAULT_TARGET_MODEL = "gpt-4o"

TABLES: dict[str, tuple[tuple[str, type], ...]] = {
    "fig2a_discrepancy": (("model", str), ("task", str), ("dimension", str), ("discrepancy", float),
                          ("ci_lo", float), ("ci_hi", float), ("mean_labels_agent", float),
                          ("mean_labels_human", float), ("labels_delta_p", float),
                          ("n_turns", int), ("n_dialogs", int)),
    "fig4_knowledge": (("model", str), ("task", str), ("n_turns", int), ("agent_rouge", float),
                       ("human_rouge", float), ("rouge_p", float), ("agent_compression", float),
                       ("human_compression", float), ("compression_p", float)),
    "fig6_alignment": (("model", str), ("task", str), ("dimension", str), ("aspect", str),
                       ("aligned_mean", float), ("misaligned_mean", float), ("p", float),
                       ("n_aligned", int), ("n_misaligned", int)),
    "fig7_injection": (("model", str), ("task", str), ("dimension", str), ("aspect", str),
                       ("baseline_mean", float), ("injected_mean", float), ("improvement_pct", float),
                       ("p_value", float), ("n_pairs", int)),
    "complexity": (("task", str), ("mean_turns", float), ("mean_distinct_acts", float),
                   ("normalized_turn_count", float), ("act_diversity", float), ("composite", float)),
}


class ReportError(ValueError):
    pass


def jsonable(obj: Any) -> Any:
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def resolve_targets(gaps: Mapping, injection: Mapping, correlation: Mapping | None,
                    validations: Mapping | None, model: str = DEFAULT_TARGET_MODEL,
                    overrides: Mapping | None = None) -> dict:
    """Pair each reference target with the value this run measured, if any."""
    out = {}
    for name, spec in REFERENCE_TARGETS.items():
        spec = {**spec, **((overrides or {}).get(name) or {})}
        measured = None
        src = spec["source"]
        if src == "validation" and validations:
            measured = (validations.get(spec["key"]) or {}).get("micro_f1")
        elif src == "gap":
            gap = (gaps.get(model) or {}).get(spec["task"], {}).get(spec["dimension"])
            if gap is not None:
                measured = 1.0 - _get(gap, "discrepancy")
        elif src == "correlation" and correlation:
            measured = correlation.get("average")
        elif src == "injection":
            res = (injection.get(model) or {}).get(spec["task"], {}).get(spec["dimension"])
            if res is not None:
                aspects = _get(res, "aspects")
                measured = sum(v["improvement_pct"] for v in aspects.values()) / len(aspects)
        out[name] = {"target": spec["value"], "measured": measured,
                     "model": model if src in ("gap", "injection") else None}
    return out


def _get(obj, key):
    return obj[key] if isinstance(obj, Mapping) else getattr(obj, key)


def build_tables(report: Mapping) -> dict[str, list[dict]]:
    tables: dict[str, list[dict]] = {k: [] for k in TABLES}
    for model, by_task in sorted(report.get("gaps", {}).items()):
        for task, by_dim in sorted(by_task.items()):
            for dim, g in sorted(by_dim.items()):
                ci = g["ci95"] or [None, None]
                tables["fig2a_discrepancy"].append({
                    "model": model, "task": task, "dimension": dim, "discrepancy": g["discrepancy"],
                    "ci_lo": ci[0], "ci_hi": ci[1], "mean_labels_agent": g["mean_labels_agent"],
                    "mean_labels_human": g["mean_labels_human"], "labels_delta_p": g["labels_delta_p"],
                    "n_turns": g["n_turns"], "n_dialogs": g["n_dialogs"]})
    for model, by_task in sorted((report.get("knowledge") or {}).items()):
        for task, k in sorted(by_task.items()):
            tables["fig4_knowledge"].append({"model": model, "task": task, **k})
    for model, by_task in sorted((report.get("alignment") or {}).items()):
        for task, by_dim in sorted(by_task.items()):
            for dim, split in sorted(by_dim.items()):
                for aspect, v in split["aspects"].items():
                    tables["fig6_alignment"].append({
                        "model": model, "task": task, "dimension": dim, "aspect": aspect, **v,
                        "n_aligned": split["n_aligned"], "n_misaligned": split["n_misaligned"]})
    for model, by_task in sorted((report.get("injection") or {}).items()):
        for task, by_dim in sorted(by_task.items()):
            for dim, res in sorted(by_dim.items()):
                for aspect, v in res["aspects"].items():
                    tables["fig7_injection"].append({
                        "model": model, "task": task, "dimension": dim, "aspect": aspect,
                        "baseline_mean": v["baseline_mean"], "injected_mean": v["injected_mean"],
                        "improvement_pct": v["improvement_pct"], "p_value": v["p_value"],
                        "n_pairs": res["n_pairs"]})
    for task, c in sorted(report.get("complexity", {}).items()):
        tables["complexity"].append({"task": task, **{k: c[k] for k, _ in TABLES["complexity"][1:]}})
    return tables


def build_report(metadata: Mapping, corpora: Mapping, complexity: Mapping, gaps: Mapping,
                 knowledge: Mapping | None = None, judge: Mapping | None = None,
                 alignment: Mapping | None = None, injection: Mapping | None = None,
                 correlation: Mapping | None = None, targets: Mapping | None = None,
                 validations: Mapping | None = None) -> dict:
    """Assemble the structured report; the four leading sections are mandatory."""
    given = {"metadata": metadata, "corpora": corpora, "complexity": complexity, "gaps": gaps}
    missing = [name for name in REQUIRED_SECTIONS if not given[name]]
    if missing:
        raise ReportError(f"report is missing mandatory section(s): {missing}")
    report = jsonable({
        "version": REPORT_VERSION,
        **given,
        "knowledge": knowledge or {},
        "judge": judge or {},
        "alignment": alignment or {},
        "injection": injection or {},
        "correlation": correlation,
        "targets": targets or {},
        "validations": validations or {},
    })
    report["tables"] = build_tables(report)
    return report


def dumps_report(report: Mapping) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


# --- CSV ----------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, kind: type):
    if text == "":
        return None
    if kind is float:
        return float(text)
    if kind is int:
        return int(text)
    return text


def table_to_csv(name: str, rows: list[Mapping], config_hash: str) -> str:
    columns = [c for c, _ in TABLES[name]]
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def csv_to_table(name: str, text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`table_to_csv`: (metadata, typed rows)."""
    lines = text.splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        key, _, value = lines.pop(0)[1:].strip().partition("=")
        meta[key] = value
    types = dict(TABLES[name])
    reader = csv.DictReader(lines)
    return meta, [{k: _parse(v, types[k]) for k, v in row.items()} for row in reader]


def write_report(report: Mapping, out_dir: str | Path) -> list[Path]:
    from ..gateway.cache import atomic_write_text

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = report["metadata"]["config_hash"]
    written = [out_dir / "report.json"]
    atomic_write_text(written[0], dumps_report(report))
    for name in TABLES:
        path = out_dir / f"{name}.csv"
        atomic_write_text(path, table_to_csv(name, report["tables"][name], config_hash))
        written.append(path)
    return written


__all__ = [
    "REFERENCE_TARGETS", "REQUIRED_SECTIONS", "jsonable", "ReportError", "TABLES", "build_report", "build_tables",
    "csv_to_table", "dumps_report", "resolve_targets", "table_to_csv", "write_report",
]
