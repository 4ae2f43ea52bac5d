import json
from pathlib import Path

import pytest
import yaml

from conftest import GOLDEN
from todgap.analysis.report import TABLES, csv_to_table
from todgap.cli import main
from todgap.config import load_config
from todgap.pipeline import PrerequisiteError, Run, pipeline_commands, run_pipeline


def edit_config(path: Path, **changes) -> None:
    raw = yaml.safe_load(path.read_text())
    for dotted, value in changes.items():
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    path.write_text(yaml.safe_dump(raw))


def out_dir(config: Path) -> Path:
    return load_config(config).output_dir


def test_full_run_matches_golden(toy_config, capsys):
    assert main(["run", "-c", str(toy_config)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed == [f"{c}: done" for c in ("ingest", "generate", "annotate", "judge", "analyze",
                                               "inject", "report")]
    out = out_dir(toy_config)
    assert (out / "report" / "report.json").read_text() == (GOLDEN / "toy_report.json").read_text()
    report = json.loads((out / "report" / "report.json").read_text())
    chash = report["metadata"]["config_hash"]
    for name in TABLES:
        meta, rows = csv_to_table(name, (out / "report" / f"{name}.csv").read_text())
        assert meta["config_hash"] == chash and len(rows) == len(report["tables"][name])
    for path in out.rglob("*.jsonl"):
        for line in path.read_text().splitlines():
            assert json.loads(line)["config_hash"] == chash, path
    for path in (out / "manifests").glob("*.json"):
        assert json.loads(path.read_text())["config_hash"] == chash


def test_report_sections(toy_config):
    run = run_pipeline(load_config(toy_config))
    report = json.loads(run.path("report", "report.json").read_text())
    assert set(report["gaps"]["toy-agent"]) == {"multiwoz", "spokenwoz", "pcs"}
    cx = report["complexity"]
    assert cx["pcs"]["composite"] > cx["spokenwoz"]["composite"] > cx["multiwoz"]["composite"]
    assert report["metadata"]["bootstrap_resamples"] == 500 and report["metadata"]["seed"] == 7
    assert all(t["target"] is not None for t in report["targets"].values())
    gen = [json.loads(x) for x in run.path("generations", "toy-agent", "multiwoz.jsonl").read_text().splitlines()]
    assert any(inv.get("error") for g in gen for inv in g["tool_invocations"])


def test_resume_and_mismatch(toy_config, capsys):
    assert main(["run", "-c", str(toy_config)]) == 0
    capsys.readouterr()
    assert main(["generate", "-c", str(toy_config)]) == 0
    assert "already complete, skipped" in capsys.readouterr().out
    # the worker count is not part of the configuration identity
    assert main(["report", "-c", str(toy_config), "--max-parallel", "1"]) == 0
    assert main(["analyze", "-c", str(toy_config), "--seed", "3"]) == 2
    assert "--force" in capsys.readouterr().err
    assert main(["run", "-c", str(toy_config), "--seed", "3", "--force"]) == 0
    report = json.loads((out_dir(toy_config) / "report" / "report.json").read_text())
    assert report["metadata"]["seed"] == 3


def test_missing_prerequisite(toy_config, capsys):
    assert main(["analyze", "-c", str(toy_config)]) == 3
    assert "run `todgap annotate` first" in capsys.readouterr().err
    with pytest.raises(PrerequisiteError):
        Run(load_config(toy_config)).judge()


def test_provider_failure_exits_4(toy_config, capsys):
    (toy_config.parent / "script.json").write_text(json.dumps({"exchanges": []}))
    assert main(["run", "-c", str(toy_config)]) == 4
    assert "no scripted exchange" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    assert main(["ingest", "-c", str(tmp_path / "nope.yaml")]) == 2


def test_validate_classifiers(toy_config):
    assert main(["ingest", "-c", str(toy_config)]) == 0
    assert main(["generate", "-c", str(toy_config)]) == 0
    assert main(["validate-classifiers", "-c", str(toy_config)]) == 0
    v = json.loads((out_dir(toy_config) / "validation" / "validation.json").read_text())["validations"]
    assert {"acts:woz", "tools:multiwoz", "tools:spokenwoz", "tools:pcs"} <= set(v)
    assert all(0.0 <= x["random_baseline"] < x["micro_f1"] for x in v.values())


def test_validation_threshold_exits_5(toy_config, capsys):
    edit_config(toy_config, **{"validation.min_micro_f1": 1.01})
    assert main(["ingest", "-c", str(toy_config)]) == 0
    assert main(["validate-classifiers", "-c", str(toy_config)]) == 5
    assert "below" in capsys.readouterr().err


def test_stage_toggles(toy_config):
    edit_config(toy_config, **{"stages.inject": False})
    cfg = load_config(toy_config)
    assert "inject" not in pipeline_commands(cfg)
    run = run_pipeline(cfg)
    report = json.loads(run.path("report", "report.json").read_text())
    assert report["injection"] == {} and report["tables"]["fig7_injection"] == []
    assert report["targets"]["pcs_act_injection_gain_pct"]["measured"] is None


def test_relative_output_dir_follows_cwd(toy_config, tmp_path, monkeypatch):
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.chdir(work)
    assert main(["ingest", "-c", str(toy_config), "--output-dir", "out"]) == 0
    assert (work / "out" / "manifests" / "ingest.json").exists()
    assert not (toy_config.parent / "out").exists()
