import pytest
import yaml

from conftest import TOY_DIR
from todgap.config import ConfigError, config_hash, load_config, parse_config


def minimal(**over):
    raw = {"tasks": {"pcs": {"corpus": "pcs.jsonl"}},
           "models": {"agents": ["a"], "classifier": "c", "judge": "j"},
           "provider": {"kind": "scripted", "script": "s.json"}}
    raw.update(over)
    return raw


def test_defaults(tmp_path):
    cfg = parse_config(minimal(), tmp_path)
    assert cfg.tasks["pcs"].corpus == tmp_path / "pcs.jsonl"
    assert cfg.C == 1000 and cfg.d_max == 11 and cfg.alignment_threshold == 0.5
    assert cfg.max_react_steps == 6 and cfg.agent_temperature == 0.0
    assert cfg.output_dir == tmp_path / "out" and cfg.cache_dir == tmp_path / "out" / "cache"
    assert all(cfg.stages.values()) and cfg.inject_dimensions == ("acts", "tools")


def test_hash_ignores_location_and_parallelism():
    base = config_hash(minimal())
    assert config_hash(minimal(output_dir="elsewhere", cache_dir="c")) == base
    assert config_hash(minimal(provider={"kind": "scripted", "script": "s.json", "max_parallel": 1})) == base
    assert config_hash(minimal(seed=1)) != base
    assert config_hash(minimal(constants={"C": 500})) != base


@pytest.mark.parametrize("raw, message", [
    (minimal(tasks={}), "no tasks"),
    (minimal(tasks={"x": {"corpus": "c"}}), "unknown task"),
    (minimal(tasks={"custom": {"corpus": "c"}}), "base"),
    (minimal(tasks={"pcs": {}}), "corpus"),
    (minimal(models={"classifier": "c", "judge": "j"}), "agents"),
    (minimal(provider={"kind": "grpc"}), "provider.kind"),
    (minimal(provider={"kind": "scripted"}), "script"),
    (minimal(stages={"dance": True}), "stage"),
    (minimal(inject={"dimensions": ["moods"]}), "dimensions"),
    (minimal(constants={"C": 0}), "constants"),
    (minimal(seed="abc"), "seed"),
])
def test_invalid(tmp_path, raw, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(raw, tmp_path)


def test_load_with_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(minimal()))
    cfg = load_config(path, {"seed": 9, "provider.max_parallel": 2, "output_dir": None})
    assert cfg.seed == 9 and cfg.max_parallel == 2 and cfg.root == tmp_path
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.yaml")
    path.write_text("tasks: [unclosed")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(path)


def test_toy_config_parses():
    cfg = load_config(TOY_DIR / "config.yaml")
    assert set(cfg.tasks) == {"multiwoz", "spokenwoz", "pcs"} and cfg.provider_kind == "scripted"
