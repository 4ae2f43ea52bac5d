import pytest

from todgap.annotators import data_path
from todgap.corpus import Task
from todgap.toolbox import (KnowledgeBase, ToolArgumentError, Toolbox, UnknownToolError, WozDatabase,
                            normalize_slot_value, registry_for, render_entity_digest)
from todgap.toolbox.woz import edit_ratio, levenshtein


@pytest.fixture(scope="module")
def db():
    d = WozDatabase()
    d.add("hotel", [
        {"name": "Alpha Lodge", "area": "centre", "pricerange": "cheap", "type": "guesthouse", "parking": "yes"},
        {"name": "Bravo Hotel", "area": "north", "pricerange": "expensive", "type": "hotel", "parking": "yes"},
        {"name": "Charlie House", "area": "centre", "pricerange": "moderate", "type": "guesthouse", "parking": "no"},
    ])
    d.add("train", [
        {"trainid": "TR1", "departure": "cambridge", "destination": "london kings cross", "day": "monday",
         "leaveat": "08:15", "arriveby": "09:05"},
        {"trainid": "TR2", "departure": "cambridge", "destination": "london kings cross", "day": "monday",
         "leaveat": "10:15", "arriveby": "11:05"},
        {"trainid": "TR3", "departure": "ely", "destination": "cambridge", "day": "monday",
         "leaveat": "12:00", "arriveby": "12:20"},
    ])
    return d


@pytest.fixture(scope="module")
def woz(db):
    return Toolbox.for_task(Task.SPOKENWOZ, db=db)


def test_registries():
    assert len(registry_for("multiwoz")) == 8
    assert [t.name for t in registry_for("spokenwoz")][-1] == "BookParking"
    assert {t.name for t in registry_for("pcs")} == {"KnowledgeLookup", "CustomerInfoLookup",
                                                       "EscalateOrTransfer", "ScreenShare"}
    assert registry_for("custom", base="pcs") == registry_for("pcs")
    with pytest.raises(ValueError):
        registry_for("custom")


@pytest.mark.parametrize("raw, expected", [
    ("Centre", "centre"), ("city center", "centre"), ("downtown", "centre"),
    ("centr", "centre"), ("nrth", "north"), ("west", None), ("moderately priced", None),
])
def test_normalize_slot_value(raw, expected):
    assert normalize_slot_value(raw, ["centre", "north", "east"]) == expected


def test_edit_distance():
    assert levenshtein("kitten", "sitting") == 3
    assert edit_ratio("", "") == 0.0
    assert edit_ratio("abcd", "abce") == 0.25
    with pytest.raises(ValueError):
        normalize_slot_value("x", [])


def test_find_filters_and_aliases(woz):
    res = woz.execute("FindHotels", {"area": "city centre", "type": "guest house"})
    assert [e["name"] for e in res.payload["entities"]] == ["alpha lodge", "charlie house"]
    assert res.payload["filters"] == {"area": "centre", "type": "guesthouse"}
    assert "alpha lodge" in res.knowledge_text
    assert woz.execute("FindHotels", {"area": "dontcare"}).payload["count"] == 3
    assert woz.execute("FindHotels", {"area": "west"}).payload["count"] == 0
    with pytest.raises(ToolArgumentError, match="unknown slot"):
        woz.execute("FindHotels", {"colour": "red"})


def test_find_trains_time_comparisons(woz):
    leave = woz.execute("FindTrains", {"departure": "cambridge", "leaveat": "09:00"})
    assert [e["trainid"] for e in leave.payload["entities"]] == ["tr2"]
    arrive = woz.execute("FindTrains", {"destination": "kings cross", "arriveby": "10:00"})
    assert [e["trainid"] for e in arrive.payload["entities"]] == ["tr1"]
    with pytest.raises(ToolArgumentError, match="HH:MM"):
        woz.execute("FindTrains", {"leaveat": "morning"})


def test_bookings_are_deterministic(woz):
    args = {"name": "alpha lodge", "day": "monday", "stay": "2", "people": "3"}
    a, b = woz.execute("BookHotel", args), woz.execute("BookHotel", dict(reversed(list(args.items()))))
    assert a.payload["status"] == "booked" and a.payload["reference"] == b.payload["reference"]
    assert len(a.payload["reference"]) == 8
    assert woz.execute("BookHotel", {**args, "name": "zulu inn"}).payload["status"] == "nobook"
    with pytest.raises(ToolArgumentError, match="people"):
        woz.execute("BookTrain", {"trainid": "TR1"})
    taxi = woz.execute("BookTaxi", {"departure": "alpha lodge", "destination": "ely", "leaveat": "10:00"})
    assert taxi.payload["status"] == "booked" and taxi.payload["car"]
    with pytest.raises(ToolArgumentError, match="leaveat"):
        woz.execute("BookTaxi", {"departure": "a", "destination": "b"})


def test_parking(woz):
    ok = woz.execute("BookParking", {"location": "Bravo Hotel", "day": "friday", "time": "09:00"})
    assert ok.payload["status"] == "booked" and ok.payload["collect_profile"]
    assert "license plate number" in ok.payload["profile_fields"]
    with pytest.raises(ToolArgumentError, match="time"):
        woz.execute("BookParking", {"location": "Bravo Hotel", "day": "friday"})


def test_unknown_tool_and_registry_scope(woz, db):
    with pytest.raises(UnknownToolError):
        woz.execute("KnowledgeLookup", {"query": "x"})
    with pytest.raises(UnknownToolError):
        Toolbox.for_task("multiwoz", db=db).execute("BookParking", {})


def test_knowledge_lookup_and_stubs():
    kb = KnowledgeBase.load(data_path("toy", "kb"))
    box = Toolbox.for_task("pcs", kb=kb, knowledge_k=1)
    res = box.execute("KnowledgeLookup", {"query": "bank feed disconnected"})
    assert res.payload["results"][0]["path"] == "bank-feeds.md"
    assert res.knowledge_text and len(res.payload["results"]) == 1
    assert box.execute("KnowledgeLookup", {"query": "qqqq"}).knowledge_text == ""
    with pytest.raises(ToolArgumentError):
        box.execute("KnowledgeLookup", {"query": " "})
    stub = box.execute("ScreenShare", {})
    assert stub.payload["acknowledged"] and stub.knowledge_text is None


def test_entity_digest(db):
    text = render_entity_digest(db)
    assert "alpha lodge" in text and "london kings cross" in text


def test_db_rejects_unknown_attribute():
    with pytest.raises(ValueError):
        WozDatabase().add("hotel", [{"name": "x", "colour": "red"}])
