import json

import pytest

from conftest import dialog
from todgap.corpus import (CorpusError, Speaker, Task, corpus_statistics, dialog_to_record, load_corpus,
                           load_multiwoz22, map_multiwoz_acts, parse_transcript_record, slice_contexts,
                           write_corpus)


def record(**over):
    rec = {"id": "d1", "task": "multiwoz", "turns": [
        {"index": 0, "speaker": "user", "text": "I need a hotel"},
        {"index": 1, "speaker": "agent", "text": "Which area?", "acts": ["request"], "tools": []},
    ]}
    rec.update(over)
    return rec


def test_transcript_round_trip(tmp_path):
    d = parse_transcript_record(record(success=1), Task.MULTIWOZ)
    assert d.turns[1].speaker is Speaker.HUMAN_EXPERT
    assert d.turns[1].gold_acts.labels == {"request"}
    assert d.turns[0].gold_acts is None
    path = tmp_path / "c.jsonl"
    write_corpus([d], path)
    assert load_corpus(path, "multiwoz") == [d]
    assert dialog_to_record(d) == json.loads(path.read_text())


@pytest.mark.parametrize("mutate, field", [
    (lambda r: r.pop("id"), "id"),
    (lambda r: r["turns"].clear(), "turns"),
    (lambda r: r["turns"][1].update(index=5), "turns[1].index"),
    (lambda r: r["turns"][0].update(speaker="bot"), "turns[0].speaker"),
    (lambda r: r["turns"][0].update(text="  "), "turns[0].text"),
    (lambda r: r["turns"][1].update(acts="request"), "turns[1].acts"),
    (lambda r: r.update(task="pcs"), "task"),
    (lambda r: r.update(success=True), "success"),
])
def test_transcript_errors_name_the_field(tmp_path, mutate, field):
    rec = record()
    mutate(rec)
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record(id="ok")) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(CorpusError) as err:
        load_corpus(path, Task.MULTIWOZ)
    assert err.value.field_name == field
    assert err.value.line == 2 and "bad.jsonl:2" in str(err.value)


def test_invalid_json_and_duplicates(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("{nope\n")
    with pytest.raises(CorpusError, match="invalid JSON"):
        load_corpus(path, Task.MULTIWOZ)
    path.write_text(json.dumps(record()) + "\n" + json.dumps(record()) + "\n")
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path, Task.MULTIWOZ)


def test_multiwoz22_adapter(tmp_path):
    raw = [{"dialogue_id": "MUL0001.json", "turns": [
        {"turn_id": "0", "speaker": "USER", "utterance": "find a cheap hotel"},
        {"turn_id": "1", "speaker": "SYSTEM", "utterance": "The Alpha is cheap. Shall I book?"},
    ]}]
    (tmp_path / "dialogues_001.json").write_text(json.dumps(raw))
    (tmp_path / "dialog_acts.json").write_text(json.dumps(
        {"MUL0001.json": {"1": {"dialog_act": {"Hotel-Inform": [], "Booking-Inform": [],
                                               "Hotel-OfferBook": [], "general-welcome": []}}}}))
    (d,) = load_multiwoz22(tmp_path)
    assert d.turns[1].gold_acts.labels == {"inform", "offerbook", "greet"}
    assert d.turns[0].speaker is Speaker.USER
    assert load_corpus(tmp_path, "multiwoz") == [d]


def test_multiwoz_act_merges():
    acts = map_multiwoz_acts({"general-bye": [], "Booking-Book": [], "Train-OfferBooked": [],
                              "general-thank": [], "Hotel-NoOffer": []})
    assert acts.labels == {"greet", "book", "nooffer"}
    assert map_multiwoz_acts(None) is None


def test_statistics():
    stats = corpus_statistics([dialog("a", "uaua"), dialog("b", "ua")])
    assert stats.chat_count == 2
    assert stats.mean_turns_per_chat == 3.0
    assert stats.mean_words_per_turn == 4.0
    with pytest.raises(ValueError):
        corpus_statistics([])


def test_slices_prefix_property():
    d = dialog("p", "aauaua", Task.PCS)
    slices = slice_contexts(d)
    assert [s.target_index for s in slices] == [0, 1, 3, 5]
    assert slices[0].context == () and slices[0].user_input == ""
    assert slices[1].context == d.turns[:1] and slices[1].user_input == ""
    for s in slices:
        assert s.context == d.turns[: s.target_index]
        assert s.reference_response == d.turns[s.target_index].text
    assert slices[2].user_input == d.turns[2].text

