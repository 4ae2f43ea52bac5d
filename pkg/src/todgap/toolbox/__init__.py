"""Per-task tool registries and the executor the agent calls into."""

from __future__ import annotations

from typing import Mapping

from ..corpus import Task
from .base import ToolArgumentError, ToolResult, ToolSpec, UnknownToolError
from .knowledge import STUB_TOOLS, KnowledgeBase, knowledge_lookup, stub_invoke
from .woz import (SLOT_INVENTORY, WozDatabase, book_entity, book_parking, find_entities,
                  normalize_slot_value, render_entity_digest)


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


def _str(desc: str) -> dict:
    return {"type": "string", "description": desc}


_SEARCH_SLOTS = {
    "hotel": ("name", "area", "pricerange", "type", "stars", "parking", "internet"),
    "restaurant": ("name", "area", "pricerange", "food"),
    "attraction": ("name", "area", "type"),
    "train": ("trainid", "departure", "destination", "day", "leaveat", "arriveby"),
}
_SLOT_DESC = {
    "leaveat": "earliest departure time, HH:MM",
    "arriveby": "latest arrival time, HH:MM",
}


def _search_spec(name: str, domain: str, desc: str) -> ToolSpec:
    props = {s: _str(_SLOT_DESC.get(s, f"{domain} {s}")) for s in _SEARCH_SLOTS[domain]}
    return ToolSpec(name, desc, _obj(props), "search")


def _booking_spec(name: str, desc: str, fields: dict[str, str], required) -> ToolSpec:
    return ToolSpec(name, desc, _obj({k: _str(v) for k, v in fields.items()}, required), "booking")


WOZ_TOOLS = (
    _search_spec("FindHotels", "hotel", "Search the database for hotels in Cambridge matching the given preferences."),
    _search_spec("FindRestaurants", "restaurant",
                 "Search the database for restaurants in Cambridge matching the given preferences."),
    _search_spec("FindAttractions", "attraction",
                 "Search the database for attractions in Cambridge matching the given preferences."),
    _search_spec("FindTrains", "train", "Search the timetable for trains matching the given constraints."),
    _booking_spec("BookHotel", "Book a hotel stay.",
                  {"name": "hotel name", "day": "check-in day", "stay": "number of nights",
                   "people": "number of guests"}, ("name", "day", "stay", "people")),
    _booking_spec("BookRestaurant", "Reserve a table at a restaurant.",
                  {"name": "restaurant name", "day": "reservation day", "time": "reservation time, HH:MM",
                   "people": "number of guests"}, ("name", "day", "time", "people")),
    _booking_spec("BookTrain", "Book train tickets.",
                  {"trainid": "train id, e.g. TR1234", "people": "number of tickets"}, ("trainid", "people")),
    _booking_spec("BookTaxi", "Book a taxi; give leaveat or arriveby.",
                  {"departure": "pick-up place", "destination": "drop-off place",
                   "leaveat": "pick-up time, HH:MM", "arriveby": "arrival time, HH:MM"},
                  ("departure", "destination")),
)
PARKING_TOOL = _booking_spec(
    "BookParking", "Book a parking space near a venue.",
    {"location": "venue or parking location", "day": "day of parking", "time": "arrival time, HH:MM",
     "hours": "number of hours"}, ("location", "day", "time"))
PCS_TOOLS = (
    ToolSpec("KnowledgeLookup", "Search the product knowledge base for help articles and troubleshooting guides.",
             _obj({"query": _str("search query")}, ("query",)), "knowledge"),
    ToolSpec("CustomerInfoLookup", "Look up the caller's account and customer information.",
             _obj({"customer": _str("customer name or identifier")}), "stub"),
    ToolSpec("EscalateOrTransfer", "Escalate the issue or transfer the caller to another team or department.",
             _obj({"department": _str("target team or department"), "reason": _str("why")}), "stub"),
    ToolSpec("ScreenShare", "Start a screen-sharing session with the caller.", _obj({}), "stub"),
)

REGISTRIES: dict[Task, tuple[ToolSpec, ...]] = {
    Task.MULTIWOZ: WOZ_TOOLS,
    Task.SPOKENWOZ: WOZ_TOOLS + (PARKING_TOOL,),
    Task.PCS: PCS_TOOLS,
}

_FIND_DOMAIN = {"FindHotels": "hotel", "FindRestaurants": "restaurant",
                "FindAttractions": "attraction", "FindTrains": "train"}
_BOOK_DOMAIN = {"BookHotel": "hotel", "BookRestaurant": "restaurant",
                "BookTrain": "train", "BookTaxi": "taxi"}


def registry_for(task: Task | str, base: Task | str | None = None) -> tuple[ToolSpec, ...]:
    """Tool registry of a task; a custom task borrows the registry of ``base``."""
    task = Task(task)
    if task is Task.CUSTOM:
        if base is None:
            raise ValueError("custom tasks need a base registry (multiwoz, spokenwoz or pcs)")
        task = Task(base)
    return REGISTRIES[task]


class Toolbox:
    """Executes registry tools against read-only databases. Thread-safe."""

    def __init__(self, registry: tuple[ToolSpec, ...], db: WozDatabase | None = None,
                 kb: KnowledgeBase | None = None, knowledge_k: int = 3):
        self.registry = {spec.name: spec for spec in registry}
        if len(self.registry) != len(registry):
            raise ValueError("duplicate tool names in registry")
        self.db = db or WozDatabase()
        self.kb = kb or KnowledgeBase([])
        self.knowledge_k = knowledge_k

    @classmethod
    def for_task(cls, task: Task | str, db=None, kb=None, base=None, knowledge_k: int = 3) -> "Toolbox":
        return cls(registry_for(task, base), db, kb, knowledge_k)

    @property
    def names(self) -> list[str]:
        return list(self.registry)

    def spec(self, name: str) -> ToolSpec:
        if name not in self.registry:
            raise UnknownToolError(name)
        return self.registry[name]

    def execute(self, name: str, arguments: Mapping[str, object]) -> ToolResult:
        self.spec(name)
        args = dict(arguments or {})
        if name in _FIND_DOMAIN:
            return find_entities(_FIND_DOMAIN[name], args, self.db, tool=name)
        if name in _BOOK_DOMAIN:
            return book_entity(_BOOK_DOMAIN[name], args, self.db, tool=name)
        if name == "BookParking":
            return book_parking(args, self.db)
        if name == "KnowledgeLookup":
            query = args.get("query")
            if not isinstance(query, str) or not query.strip():
                raise ToolArgumentError("missing required argument(s): ['query']")
            return knowledge_lookup(query, self.kb, self.knowledge_k)
        if name in STUB_TOOLS:
            return stub_invoke(name, args)
        raise UnknownToolError(name)


__all__ = [
    "KnowledgeBase", "PARKING_TOOL", "PCS_TOOLS", "REGISTRIES", "SLOT_INVENTORY",
    "ToolArgumentError", "ToolResult", "ToolSpec", "Toolbox", "UnknownToolError", "WOZ_TOOLS",
    "WozDatabase", "book_entity", "book_parking", "find_entities", "knowledge_lookup",
    "normalize_slot_value", "registry_for", "render_entity_digest", "stub_invoke",
]
