import json

import pytest

from conftest import dialog, scripted
from todgap.corpus import slice_contexts
from todgap.judge import (ASPECTS, JudgeError, JudgeParseError, ResponseScore, aggregate_dialog_scores,
                          judge_message, parse_judge_output, score_payload, score_response, validate_judge)


def good(*scores):
    return json.dumps(score_payload(scores))


def test_parse_and_round_trip():
    s = parse_judge_output(good(5, 4, 3, 2))
    assert s.as_dict() == dict(zip(ASPECTS, (5, 4, 3, 2)))
    assert ResponseScore.from_json(json.loads(json.dumps(s.to_json()))) == s


@pytest.mark.parametrize("payload, message", [
    ("five", "JSON"),
    ({**score_payload((3, 3, 3, 3)), "fluency": {"score": 3, "reasoning": ""}}, "unknown"),
    ({k: v for k, v in score_payload((3, 3, 3, 3)).items() if k != "coherence"}, "missing"),
    ({**score_payload((3, 3, 3, 3)), "coherence": {"score": 6, "reasoning": ""}}, "outside"),
    ({**score_payload((3, 3, 3, 3)), "coherence": {"score": 3.5, "reasoning": ""}}, "integer"),
    ({**score_payload((3, 3, 3, 3)), "coherence": {"score": True, "reasoning": ""}}, "integer"),
    ({**score_payload((3, 3, 3, 3)), "coherence": 3}, "object"),
])
def test_parse_rejects(payload, message):
    raw = payload if isinstance(payload, str) else json.dumps(payload)
    with pytest.raises(JudgeParseError, match=message):
        parse_judge_output(raw)


def test_score_bounds():
    with pytest.raises(ValueError):
        ResponseScore(0, 3, 3, 3)
    with pytest.raises(ValueError):
        ResponseScore(True, 3, 3, 3)


def test_judge_sees_only_the_prefix():
    d = dialog("d", "uaua")
    s = slice_contexts(d)[1]
    gw, provider = scripted(({}, good(4, 4, 4, 4)))
    score = score_response(s.context, s.user_input, "Candidate reply.", gw, "judge")
    assert score.coherence == 4
    sent = provider.requests[0].messages[0].content
    assert sent == judge_message(s.context, s.user_input, "Candidate reply.")
    assert s.reference_response not in sent
    assert "**Agent Response**:\nCandidate reply." in sent
    assert "(empty; this is the first turn)" in judge_message((), "", "x")


def test_reask_then_error():
    gw, provider = scripted(({"last_contains": "previous reply"}, good(2, 2, 2, 2)), ({}, "{}"))
    assert score_response((), "hi", "hello", gw, "judge").effectiveness == 2
    assert provider.calls == 2
    gw, _ = scripted(({}, "{}"))
    with pytest.raises(JudgeError):
        score_response((), "hi", "hello", gw, "judge")


def test_aggregate():
    agg = aggregate_dialog_scores([ResponseScore(5, 4, 3, 2), ResponseScore(3, 4, 5, 2)])
    assert agg == {"coherence": 4.0, "specificity": 4.0, "satisfaction": 4.0, "effectiveness": 2.0}
    with pytest.raises(ValueError):
        aggregate_dialog_scores([])


def test_validate_judge():
    scores = {f"s{i}": {a: 4.0 + 0.1 * i for a in ASPECTS} for i in range(4)}
    scores.update({f"f{i}": {a: 2.0 + 0.1 * i for a in ASPECTS} for i in range(4)})
    labels = {d: int(d.startswith("s")) for d in scores}
    out = validate_judge(scores, labels)
    c = out["coherence"]
    assert c["mean_success"] == pytest.approx(4.15) and c["mean_failure"] == pytest.approx(2.15)
    assert c["delta_pct"] == pytest.approx(100 * (4.15 / 2.15 - 1))
    assert c["p_value"] < 1e-6 and c["n_success"] == 4
    with pytest.raises(ValueError, match=">= 2"):
        validate_judge({"s0": scores["s0"], "f0": scores["f0"]}, labels)
