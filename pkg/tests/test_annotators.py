import json

import pytest

from conftest import scripted
from todgap.annotators import (ISO_LABELS, WOZ_LABELS, AnnotationError, AnnotationRecord, LabelParseError,
                               Taxonomy, act_classifier_prompt, classify_acts, classify_tools, label_payload,
                               label_schema, load_taxonomy, load_tool_bank, parse_label_output,
                               random_baseline, taxonomy_for_task, tool_classifier_prompt,
                               validate_classifier)
from todgap.labels import LabelSet
from todgap.toolbox import registry_for

ALLOWED = ("inform", "request", "greet")


def payload(*present):
    return json.dumps(label_payload(ALLOWED, present))


def test_taxonomies_load():
    woz, iso = load_taxonomy("woz"), load_taxonomy("iso")
    assert woz.labels == WOZ_LABELS and len(iso.labels) == 11 and set(iso.labels) == set(ISO_LABELS)
    assert taxonomy_for_task("spokenwoz") == "woz" and taxonomy_for_task("pcs") == "iso"
    with pytest.raises(ValueError):
        Taxonomy("woz", ("inform",), {"inform": "x"})
    with pytest.raises(ValueError, match="definition"):
        Taxonomy("mine", ("a", "b"), {"a": "x"})


def test_prompts_render_every_label():
    prompt = act_classifier_prompt(load_taxonomy("woz"))
    assert all(f"- {lab}:" in prompt for lab in WOZ_LABELS)
    assert "{definitions}" not in prompt and "{fewshots}" not in prompt
    names = [t.name for t in registry_for("spokenwoz")]
    tprompt = tool_classifier_prompt("spokenwoz", names)
    assert all(f"**{n}**" in tprompt for n in names)
    bank = load_tool_bank()
    assert all(len(bank["tools"][n]["fewshots"]) == 10 for n in bank["tools"])


def test_schema_shape():
    schema = label_schema(ALLOWED)
    assert schema["required"] == list(ALLOWED) and not schema["additionalProperties"]


def test_parse_label_output():
    out = parse_label_output(payload("inform", "greet"), ALLOWED)
    assert out == LabelSet.of("inform", "greet") and out.rationale["request"] == "absent"
    assert parse_label_output(payload(), ALLOWED) == LabelSet()


@pytest.mark.parametrize("raw, message", [
    ("yes inform", "JSON"),
    ("[1]", "object"),
    (json.dumps({**label_payload(ALLOWED, ()), "book": {"present": True, "reasoning": ""}}), "unknown"),
    (json.dumps({k: v for k, v in label_payload(ALLOWED, ()).items() if k != "greet"}), "missing"),
    (json.dumps({**label_payload(ALLOWED, ()), "greet": {"present": "yes", "reasoning": ""}}), "boolean"),
    (json.dumps({**label_payload(ALLOWED, ()), "greet": {"present": True, "reasoning": 3}}), "string"),
])
def test_parse_label_output_rejects(raw, message):
    with pytest.raises(LabelParseError, match=message):
        parse_label_output(raw, ALLOWED)


def woz_payload(*present):
    return json.dumps(label_payload(WOZ_LABELS, present))


def test_classify_acts_request_shape():
    gw, provider = scripted(({"last_contains": "**Latest agent response**"}, woz_payload("request")))
    out = classify_acts("", "Which area?", load_taxonomy("woz"), gw, "clf")
    assert out == LabelSet.of("request")
    req = provider.requests[0]
    assert req.response_format == "structured" and req.temperature == 0.0
    assert "(none; the agent opens the conversation)" in req.messages[0].content
    with pytest.raises(ValueError):
        classify_acts("hi", "  ", load_taxonomy("woz"), gw, "clf")


def test_classify_reasks_once_then_fails():
    gw, provider = scripted(({"last_role": "user", "last_contains": "Your previous reply"}, woz_payload("greet")),
                            ({}, "garbage"))
    assert classify_acts("hi", "Hello!", load_taxonomy("woz"), gw, "clf") == LabelSet.of("greet")
    assert provider.calls == 2 and provider.requests[1].messages[1].content == "garbage"
    gw, _ = scripted(({}, "garbage"))
    with pytest.raises(AnnotationError) as err:
        classify_acts("hi", "Hello!", load_taxonomy("woz"), gw, "clf")
    assert err.value.raw == "garbage"


def test_classify_tools():
    names = [t.name for t in registry_for("pcs")]
    good = json.dumps(label_payload(names, ["ScreenShare"]))
    gw, provider = scripted(({"system_contains": "ScreenShare"}, good))
    assert classify_tools("help", "Let me share my screen.", registry_for("pcs"), gw, "clf", "pcs") == \
        LabelSet.of("ScreenShare")
    assert "**Agent response**" in provider.requests[0].messages[0].content


def test_annotation_record_round_trip():
    rec = AnnotationRecord("d", 3, "agent", LabelSet.of("inform"), LabelSet(), LabelSet.of("inform", "feedback"))
    assert AnnotationRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec
    assert rec.key == ("d", 3, "agent")


def test_validate_classifier():
    v = validate_classifier([{"a"}, {"a", "b"}], [{"a"}, {"b", "c"}])
    assert v.micro_f1 == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
    assert v.per_label["a"] == {"precision": 0.5, "recall": 1.0, "f1": pytest.approx(2 / 3), "support": 1}
    assert v.per_label["c"]["support"] == 1 and v.per_label["c"]["recall"] == 0.0
    with pytest.raises(ValueError):
        validate_classifier([{"a"}], [])


def test_random_baseline():
    gold = [{"a"}, {"b"}, {"a", "c"}] * 20
    base = random_baseline(gold, 10, trials=200, seed=1)
    assert 0.0 < base < 0.4
    assert base == random_baseline(gold, 10, trials=200, seed=1)
    # a predictor firing every label recovers every positive: F1 = 2tp / (2tp + fp)
    assert random_baseline(gold, 10, rate=1.0) == pytest.approx(2 * 80 / (2 * 80 + 600 - 80))
    assert random_baseline([set(), set()], 10) == 0.0
    with pytest.raises(ValueError):
        random_baseline(gold, 2)
