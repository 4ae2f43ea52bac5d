"""MultiWOZ-style entity database, slot normalization and booking simulators."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .base import ToolArgumentError, ToolResult

DOMAINS = ("hotel", "restaurant", "attraction", "train")

SLOT_INVENTORY: dict[str, tuple[str, ...]] = {
    "hotel": ("name", "area", "pricerange", "type", "stars", "parking", "internet",
              "address", "phone", "postcode"),
    "restaurant": ("name", "area", "pricerange", "food", "address", "phone", "postcode"),
    "attraction": ("name", "area", "type", "entrancefee", "address", "phone", "postcode"),
    "train": ("trainid", "departure", "destination", "day", "leaveat", "arriveby",
              "price", "duration"),
    "parking": ("name", "area"),
}

# slots searched with time comparison instead of equality
TIME_SLOTS = ("leaveat", "arriveby")
WILDCARDS = ("", "any", "dontcare", "don't care", "none")

ALIASES = {
    "city center": "centre", "city centre": "centre", "center": "centre",
    "town centre": "centre", "town center": "centre", "downtown": "centre",
    "kings cross": "london kings cross", "king's cross": "london kings cross",
    "liverpool street": "london liverpool street",
    "fitzwilliam": "fitzwilliam museum",
    "moderately priced": "moderate", "mid range": "moderate", "mid-range": "moderate",
    "inexpensive": "cheap", "pricey": "expensive",
    "guest house": "guesthouse",
}
MAX_EDIT_RATIO = 0.25

BOOKING_REQUIRED = {
    "hotel": ("name", "day", "stay", "people"),
    "restaurant": ("name", "day", "time", "people"),
    "train": ("trainid", "people"),
    "taxi": ("departure", "destination"),
}
PARKING_REQUIRED = ("location", "day", "time")
PROFILE_FIELDS = ("name", "id", "email", "license plate number", "phone")
TAXI_CARS = ("black toyota", "white skoda", "red volkswagen", "blue ford", "grey audi", "yellow tesla")


def _norm(value) -> str:
    return " ".join(str(value).split()).casefold()


@dataclass(frozen=True)
class EntityRecord:
    domain: str
    attributes: Mapping[str, str]

    @property
    def name(self) -> str:
        return self.attributes.get("name") or self.attributes.get("trainid", "")


@dataclass
class WozDatabase:
    entities: dict[str, list[EntityRecord]] = field(default_factory=dict)

    @classmethod
    def load(cls, root: str | Path) -> "WozDatabase":
        """Read ``<domain>.json`` files (lists of attribute maps) from ``root``."""
        root = Path(root)
        db = cls()
        for domain in (*DOMAINS, "parking"):
            path = root / f"{domain}.json"
            if path.exists():
                db.add(domain, json.loads(path.read_text(encoding="utf-8")))
        return db

    def add(self, domain: str, rows: Sequence[Mapping]) -> None:
        inventory = SLOT_INVENTORY[domain]
        records = []
        for row in rows:
            attrs = {}
            for k, v in row.items():
                key = k.casefold()
                if key not in inventory:
                    raise ValueError(f"{domain}: attribute {k!r} not in slot inventory")
                attrs[key] = _norm(v)
            records.append(EntityRecord(domain, attrs))
        records.sort(key=lambda r: r.name)
        self.entities.setdefault(domain, []).extend(records)
        self.entities[domain].sort(key=lambda r: r.name)

    def domain(self, domain: str) -> list[EntityRecord]:
        if domain not in SLOT_INVENTORY:
            raise ToolArgumentError(f"unknown domain {domain!r}")
        return self.entities.get(domain, [])

    def options(self, domain: str, slot: str) -> list[str]:
        return sorted({e.attributes[slot] for e in self.domain(domain) if slot in e.attributes})

    def parking_locations(self) -> list[str]:
        if self.entities.get("parking"):
            return self.options("parking", "name")
        names = set()
        for d in ("hotel", "restaurant", "attraction"):
            names.update(self.options(d, "name"))
        return sorted(names)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_ratio(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


def normalize_slot_value(raw: str, valid_options: Sequence[str]) -> str | None:
    """Map a free-form slot value onto a valid option, or ``None`` if unmatched.

    Exact (case/space-insensitive) match first, then the alias table, then
    the closest option by normalized edit distance when within 0.25.
    """
    if not valid_options:
        raise ValueError("valid_options must be non-empty")
    value = _norm(raw)
    by_norm = {_norm(o): o for o in valid_options}
    if value in by_norm:
        return by_norm[value]
    alias = ALIASES.get(value)
    if alias is not None and alias in by_norm:
        return by_norm[alias]
    best = min(sorted(by_norm), key=lambda cand: edit_ratio(value, cand))
    if edit_ratio(value, best) <= MAX_EDIT_RATIO:
        return by_norm[best]
    return None


def _parse_time(value: str) -> tuple[int, int]:
    try:
        hh, mm = str(value).strip().split(":")
        return int(hh), int(mm)
    except ValueError:
        raise ToolArgumentError(f"expected HH:MM time, got {value!r}") from None


def _flatten(entities: Sequence[EntityRecord]) -> str:
    return "\n".join(", ".join(f"{k}: {v}" for k, v in sorted(e.attributes.items())) for e in entities)


def find_entities(domain: str, filters: Mapping[str, object], db: WozDatabase,
                  tool: str | None = None) -> ToolResult:
    records = db.domain(domain)
    inventory = SLOT_INVENTORY[domain]
    unknown = sorted(k for k in filters if k.casefold() not in inventory)
    if unknown:
        raise ToolArgumentError(f"unknown slot(s) for {domain}: {unknown}")

    matches = list(records)
    applied = {}
    for key, raw in sorted(filters.items()):
        slot = key.casefold()
        value = _norm(raw)
        if value in WILDCARDS:
            continue
        if slot in TIME_SLOTS:
            wanted = _parse_time(value)
            if slot == "leaveat":
                keep = lambda e: slot in e.attributes and _parse_time(e.attributes[slot]) >= wanted  # noqa: E731
            else:
                keep = lambda e: slot in e.attributes and _parse_time(e.attributes[slot]) <= wanted  # noqa: E731
            matches = [e for e in matches if keep(e)]
            applied[slot] = value
            continue
        options = db.options(domain, slot)
        target = normalize_slot_value(value, options) if options else None
        target = value if target is None else target
        applied[slot] = target
        matches = [e for e in matches if e.attributes.get(slot) == target]

    payload = {"domain": domain, "filters": applied, "count": len(matches),
               "entities": [dict(sorted(e.attributes.items())) for e in matches]}
    return ToolResult(tool or f"Find{domain.title()}s", payload, _flatten(matches))


def booking_reference(domain: str, args: Mapping[str, str]) -> str:
    body = json.dumps({"domain": domain, "args": sorted(args.items())}, separators=(",", ":"))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:8].upper()


def _require(args: Mapping, required: Sequence[str]) -> dict[str, str]:
    clean = {k.casefold(): _norm(v) for k, v in args.items() if v is not None and _norm(v)}
    missing = [r for r in required if r not in clean]
    if missing:
        raise ToolArgumentError(f"missing required argument(s): {missing}")
    return clean


def book_entity(domain: str, booking_args: Mapping[str, object], db: WozDatabase,
                tool: str | None = None) -> ToolResult:
    if domain not in BOOKING_REQUIRED:
        raise ToolArgumentError(f"unknown booking domain {domain!r}")
    tool = tool or f"Book{domain.title()}"
    args = _require(booking_args, BOOKING_REQUIRED[domain])
    if domain == "taxi":
        if "leaveat" not in args and "arriveby" not in args:
            raise ToolArgumentError("missing required argument(s): ['leaveat' or 'arriveby']")
        ref = booking_reference(domain, args)
        car = TAXI_CARS[int(ref, 16) % len(TAXI_CARS)]
        phone = "07" + str(int(ref, 16))[-9:].rjust(9, "0")
        return ToolResult(tool, {"status": "booked", "reference": ref, "car": car,
                                 "phone": phone, "booking": args})

    key = "trainid" if domain == "train" else "name"
    options = db.options(domain, key)
    found = normalize_slot_value(args[key], options) if options else None
    if found is None:
        return ToolResult(tool, {"status": "nobook", "reason": f"no {domain} named {args[key]!r}",
                                 "booking": args})
    args[key] = found
    return ToolResult(tool, {"status": "booked", "reference": booking_reference(domain, args),
                             "booking": args})


def book_parking(args: Mapping[str, object], db: WozDatabase) -> ToolResult:
    clean = _require(args, PARKING_REQUIRED)
    options = db.parking_locations()
    found = normalize_slot_value(clean["location"], options) if options else None
    if found is None:
        return ToolResult("BookParking", {"status": "nobook",
                                          "reason": f"no parking at {clean['location']!r}",
                                          "booking": clean})
    clean["location"] = found
    return ToolResult("BookParking", {
        "status": "booked",
        "reference": booking_reference("parking", clean),
        "booking": clean,
        "collect_profile": True,
        "profile_fields": list(PROFILE_FIELDS),
    })


def render_entity_digest(db: WozDatabase) -> str:
    """Listing of valid database values embedded in the agent prompt."""
    areas = sorted({a for d in ("hotel", "restaurant", "attraction") for a in db.options(d, "area")})
    lines = ["Available options in the database:"]
    rows = [
        ("Areas in Cambridge", areas),
        ("Train Departure Stations", db.options("train", "departure")),
        ("Train Arrival Stations", db.options("train", "destination")),
        ("Hotels", db.options("hotel", "name")),
        ("Hotel Types", db.options("hotel", "type")),
        ("Attractions", db.options("attraction", "name")),
        ("Attraction Types", db.options("attraction", "type")),
        ("Restaurants", db.options("restaurant", "name")),
        ("Cuisines", db.options("restaurant", "food")),
    ]
    if db.entities.get("parking"):
        rows.append(("Parking Locations", db.options("parking", "name")))
    for label, values in rows:
        if values:
            lines.append(f"{label}: {', '.join(values)}")
    return "\n".join(lines)
