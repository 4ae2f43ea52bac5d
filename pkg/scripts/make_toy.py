"""Regenerate the bundled toy corpora and scripted-provider script.

    python3 scripts/make_toy.py

Writes into src/todgap/data/toy/. Every model call the toy pipeline makes
is answered by an explicit rule; an unanticipated request fails loudly.
"""

from __future__ import annotations

import json
from pathlib import Path

from todgap.annotators import ISO_LABELS, WOZ_LABELS, label_payload
from todgap.judge import score_payload
from todgap.toolbox import REGISTRIES
from todgap.corpus import Task

OUT = Path(__file__).resolve().parents[1] / "src" / "todgap" / "data" / "toy"

A, U = "agent", "user"

# (speaker, text, woz/iso acts of the turn or None, gold tools or None)
DIALOGS = [
    {"id": "mw-001", "task": "multiwoz", "success": 1, "turns": [
        (U, "I need a cheap hotel in the centre.", None, None),
        (A, "The alpha lodge is a cheap guesthouse in the centre. Shall I book it?",
         ["inform", "offerbook"], ["FindHotels"]),
        (U, "Yes, for 2 people for 3 nights from friday.", None, None),
        (A, "Booked! Your reference is 7GAWK763. Anything else?", ["book", "reqmore"], ["BookHotel"]),
        (U, "No, thanks. Bye.", None, None),
        (A, "Thank you for using our service, goodbye.", ["greet"], []),
    ]},
    {"id": "mw-002", "task": "multiwoz", "success": 0, "turns": [
        (U, "Is there a train to london on monday after 10:00?", None, None),
        (A, "TR1001 leaves at 10:15 and arrives at 11:05. How many tickets?", ["inform", "request"], None),
        (U, "Just one.", None, None),
        (A, "Sorry, I could not book that train.", ["nobook"], None),
        (U, "Ok, goodbye.", None, None),
        (A, "Goodbye.", ["greet"], None),
    ]},
    {"id": "sw-001", "task": "spokenwoz", "success": 1, "turns": [
        (U, "hi i need a restaurant that serves italian food", None, None),
        (A, "pizza roma serves italian food in the north. would you like a table?", None, None),
        (U, "yes for two and i need parking there on saturday at seven", None, None),
        (A, "your table and parking are booked. can i have your name and phone number?", None, None),
        (U, "sure it's sam, zero one two three", None, None),
        (A, "thank you sam. have a nice day.", None, None),
    ]},
    {"id": "pcs-001", "task": "pcs", "success": 1, "turns": [
        (A, "Thank you for calling, this is Alex. How can I help?", None, None),
        (U, "my bank feed stopped updating", None, None),
        (A, "Bank feeds stop when the bank needs you to sign in again. Open banking and choose reconnect.",
         None, None),
        (U, "ok that worked thanks", None, None),
        (A, "Glad it works. Anything else?", None, None),
        (U, "no bye", None, None),
    ]},
    {"id": "pcs-002", "task": "pcs", "success": 0, "turns": [
        (A, "Thank you for calling. Who am I speaking with?", None, None),
        (U, "this is jordan, i was charged twice", None, None),
        (A, "I see two charges. I'll transfer you to billing for the refund.", None, None),
        (U, "okay thank you", None, None),
        (A, "One moment please.", None, None),
        (A, "Transferring you now.", None, None),
    ]},
]

# Labels the scripted classifier assigns to each response text:
# text -> (woz acts, iso acts, tools)
HUMAN_LABELS = {
    "The alpha lodge is a cheap guesthouse in the centre. Shall I book it?":
        (["inform", "offerbook"], ["inform", "prop_q"], ["FindHotels"]),
    "Booked! Your reference is 7GAWK763. Anything else?":
        (["book", "reqmore"], ["inform", "prop_q"], ["BookHotel"]),
    "Thank you for using our service, goodbye.": (["greet"], ["thanking", "salutation"], []),
    "TR1001 leaves at 10:15 and arrives at 11:05. How many tickets?":
        (["inform", "request"], ["inform", "set_q"], ["FindTrains"]),
    "Sorry, I could not book that train.": (["nobook"], ["apology", "inform"], ["BookTrain"]),
    "Goodbye.": (["greet"], ["salutation"], []),
    "pizza roma serves italian food in the north. would you like a table?":
        (["inform", "offerbook"], ["inform", "prop_q"], ["FindRestaurants"]),
    "your table and parking are booked. can i have your name and phone number?":
        (["book", "request"], ["inform", "directives"], ["BookRestaurant", "BookParking"]),
    "thank you sam. have a nice day.": (["greet"], ["thanking", "salutation"], []),
    "Thank you for calling, this is Alex. How can I help?":
        (["greet"], ["thanking", "salutation", "other_q"], []),
    "Bank feeds stop when the bank needs you to sign in again. Open banking and choose reconnect.":
        (["inform"], ["inform", "directives"], ["KnowledgeLookup"]),
    "Glad it works. Anything else?": (["reqmore"], ["feedback", "prop_q"], []),
    "Thank you for calling. Who am I speaking with?": (["greet", "request"], ["thanking", "set_q"], []),
    "I see two charges. I'll transfer you to billing for the refund.":
        (["inform"], ["inform", "commissives"], ["CustomerInfoLookup", "EscalateOrTransfer"]),
    "One moment please.": (["request"], ["directives"], []),
    "Transferring you now.": (["inform"], ["commissives"], ["EscalateOrTransfer"]),
}

AGENT_TEXT = {
    "hotel": "I found the alpha lodge, a cheap guesthouse in the centre with free wifi and parking. "
             "Would you like me to book a room?",
    "hotel_book": "Your room at the alpha lodge is booked for 2 people, 3 nights from friday. "
                  "Can I help with anything else?",
    "bye": "You're welcome. Have a great stay in Cambridge, goodbye!",
    "train": "TR1001 departs cambridge at 10:15 and arrives in london kings cross at 11:05. "
             "How many tickets do you need?",
    "train_book": "I booked one ticket on TR1001 for you.",
    "train_bye": "Goodbye and safe travels!",
    "italian": "pizza roma is a moderately priced italian restaurant in the north. "
               "Shall I reserve a table?",
    "parking": "your table for two at pizza roma and parking for saturday at 19:00 are booked. "
               "may i have your name and license plate number?",
    "sam": "thanks sam, your details are saved. enjoy your meal!",
    "open": "Thanks for calling support, my name is Riley. What can I do for you today?",
    "bankfeed": "A bank feed stops updating when the bank needs you to sign in again. Open the banking "
                "page, choose reconnect, and sign in to your bank.",
    "glad": "Great to hear! Is there anything else I can help you with?",
    "charged": "I can see the duplicate charge on your account, Jordan. I'm transferring you to our "
               "billing team, who can refund it.",
    "moment": "Of course. Please hold for a moment while I connect you.",
    "wait": "Is there anything else I can do for you while you wait?",
}

AGENT_LABELS = {
    "hotel": (["inform", "offerbook"], ["inform", "prop_q"], ["FindHotels"]),
    "hotel_book": (["book", "reqmore"], ["inform", "prop_q"], ["BookHotel"]),
    "bye": (["greet"], ["thanking", "salutation"], []),
    "train": (["inform", "request"], ["inform", "set_q"], ["FindTrains"]),
    "train_book": (["book"], ["inform"], ["BookTrain"]),
    "train_bye": (["greet"], ["salutation"], []),
    "italian": (["inform", "offerbook"], ["inform", "prop_q"], ["FindRestaurants"]),
    "parking": (["book", "request"], ["inform", "directives"], ["BookRestaurant", "BookParking"]),
    "sam": (["greet"], ["thanking", "feedback"], []),
    "open": (["greet", "request"], ["thanking", "salutation", "other_q"], []),
    "bankfeed": (["inform"], ["inform", "directives"], ["KnowledgeLookup"]),
    "glad": (["reqmore"], ["feedback", "prop_q"], []),
    "charged": (["inform"], ["inform", "commissives"], ["CustomerInfoLookup", "EscalateOrTransfer"]),
    "moment": (["request"], ["directives"], []),
    "wait": (["reqmore"], ["prop_q"], []),
}

# judge scores (coherence, specificity, satisfaction, effectiveness) per agent response
JUDGE = {
    "hotel": (5, 4, 4, 5), "hotel_book": (4, 4, 4, 4), "bye": (4, 3, 4, 4),
    "train": (4, 5, 4, 4), "train_book": (3, 3, 2, 3), "train_bye": (4, 2, 3, 3),
    "italian": (4, 4, 4, 4), "parking": (4, 4, 3, 4), "sam": (3, 2, 3, 3),
    "open": (4, 3, 3, 3), "bankfeed": (4, 4, 4, 4), "glad": (4, 3, 4, 4),
    "charged": (3, 3, 3, 3), "moment": (3, 2, 2, 2), "wait": (2, 2, 2, 2),
}

TASK_OF = {"hotel": "multiwoz", "hotel_book": "multiwoz", "bye": "multiwoz", "train": "multiwoz",
           "train_book": "multiwoz", "train_bye": "multiwoz", "italian": "spokenwoz",
           "parking": "spokenwoz", "sam": "spokenwoz", "open": "pcs", "bankfeed": "pcs",
           "glad": "pcs", "charged": "pcs", "moment": "pcs", "wait": "pcs"}


def call(tool, **arguments):
    return {"name": tool, "arguments": arguments}


def text(key):
    return {"content": AGENT_TEXT[key]}


def agent_rules() -> list[dict]:
    m = "toy-agent"
    R = []

    def rule(response, **match):
        R.append({"match": {"model_id": m, **match}, "response": response})

    # multiwoz / mw-001
    rule({"tool_calls": [call("FindHotels", area="center", pricerange="cheap")]},
         last_role="user", last_contains="cheap hotel in the centre")
    rule(text("hotel"), last_role="tool", any_contains="cheap hotel in the centre",
         last_contains='"domain": "hotel"')
    rule({"tool_calls": [call("BookHotel", name="alpha lodge", day="friday", stay="3", people="2")]},
         last_role="user", last_contains="3 nights from friday")
    rule(text("hotel_book"), last_role="tool", last_contains='"status": "booked"',
         any_contains="3 nights from friday")
    rule(text("bye"), last_role="user", last_contains="No, thanks. Bye.")
    # mw-002: first booking attempt forgets an argument and gets the error back
    rule({"tool_calls": [call("FindTrains", departure="cambridge", destination="kings cross",
                              day="monday", leaveat="10:00")]},
         last_role="user", last_contains="train to london on monday")
    rule(text("train"), last_role="tool", last_contains='"domain": "train"')
    rule({"tool_calls": [call("BookTrain", trainid="TR1001")]}, last_role="user", last_contains="Just one.")
    rule({"tool_calls": [call("BookTrain", trainid="TR1001", people="1")]},
         last_role="tool", last_contains='"error"', any_contains="Just one.")
    rule(text("train_book"), last_role="tool", last_contains='"status": "booked"', any_contains="Just one.")
    rule(text("train_bye"), last_role="user", last_contains="Ok, goodbye.")
    # spokenwoz
    rule({"tool_calls": [call("FindRestaurants", food="italian")]},
         last_role="user", last_contains="serves italian food")
    rule(text("italian"), last_role="tool", last_contains='"domain": "restaurant"')
    rule({"tool_calls": [call("BookRestaurant", name="pizza roma", day="saturday", time="19:00", people="2"),
                         call("BookParking", location="pizza roma", day="saturday", time="19:00")]},
         last_role="user", last_contains="parking there on saturday")
    rule(text("parking"), last_role="tool", last_contains="collect_profile")
    rule(text("sam"), last_role="user", last_contains="it's sam")
    # pcs
    rule(text("open"), last_role="none")
    rule({"tool_calls": [call("KnowledgeLookup", query="bank feed not updating")]},
         last_role="user", last_contains="bank feed stopped updating")
    rule(text("bankfeed"), last_role="tool", last_contains='"query": "bank feed not updating"')
    rule(text("glad"), last_role="user", last_contains="ok that worked thanks")
    rule({"tool_calls": [call("CustomerInfoLookup", customer="jordan")]},
         last_role="user", last_contains="i was charged twice")
    rule({"tool_calls": [call("EscalateOrTransfer", department="billing", reason="duplicate charge")]},
         last_role="tool", last_contains='"tool": "CustomerInfoLookup"')
    rule(text("charged"), last_role="tool", last_contains='"tool": "EscalateOrTransfer"')
    rule(text("moment"), last_role="user", last_contains="okay thank you")
    rule(text("wait"), last_role="assistant", last_contains="One moment please.")
    return R


def classifier_rules() -> list[dict]:
    rows = [(t, labs, None) for t, labs in HUMAN_LABELS.items()]
    rows += [(AGENT_TEXT[k], labs, TASK_OF[k]) for k, labs in AGENT_LABELS.items()]
    task_of_human = {}
    for d in DIALOGS:
        for spk, t, *_ in d["turns"]:
            task_of_human[t] = d["task"]
    keys = [r[0] for r in rows]
    for a in keys:
        for b in keys:
            if a != b and f":\n{a}" in f":\n{b}":
                raise SystemExit(f"ambiguous classifier key: {a!r} inside {b!r}")
    R = []
    for t, (woz, iso, tools), task in rows:
        task = task or task_of_human[t]
        registry = [s.name for s in REGISTRIES[Task(task)]]
        R.append({"match": {"model_id": "toy-classifier", "system_contains": "- reqmore:",
                            "last_contains": f"**Latest agent response**:\n{t}"},
                  "response": {"content_json": label_payload(WOZ_LABELS, woz)}})
        R.append({"match": {"model_id": "toy-classifier", "system_contains": "- set_q:",
                            "last_contains": f"**Latest agent response**:\n{t}"},
                  "response": {"content_json": label_payload(ISO_LABELS, iso)}})
        R.append({"match": {"model_id": "toy-classifier", "system_contains": "Determine which tools",
                            "last_contains": f"**Agent response**:\n{t}"},
                  "response": {"content_json": label_payload(registry, tools)}})
    return R


def judge_rules() -> list[dict]:
    return [{"match": {"model_id": "toy-judge", "last_contains": f"**Agent Response**:\n{AGENT_TEXT[k]}"},
             "response": {"content_json": score_payload(s, f"toy rating for {k}")}}
            for k, s in JUDGE.items()]


def write_corpora() -> None:
    by_task: dict[str, list[str]] = {}
    for d in DIALOGS:
        turns = []
        for i, (spk, t, acts, tools) in enumerate(d["turns"]):
            turn = {"index": i, "speaker": spk, "text": t}
            if acts is not None:
                turn["acts"] = acts
            if tools is not None:
                turn["tools"] = tools
            turns.append(turn)
        rec = {"id": d["id"], "task": d["task"], "success": d["success"], "turns": turns}
        by_task.setdefault(d["task"], []).append(json.dumps(rec, sort_keys=True))
    for task, lines in by_task.items():
        (OUT / f"{task}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


CONFIG = """\
# Toy run: 5 dialogs, every model answered by the scripted provider.
output_dir: toy-run
seed: 7
bootstrap_resamples: 500
tasks:
  multiwoz: {corpus: multiwoz.jsonl, db: db}
  spokenwoz: {corpus: spokenwoz.jsonl, db: db}
  pcs: {corpus: pcs.jsonl, kb: kb}
models:
  agents: [toy-agent]
  classifier: toy-classifier
  judge: toy-judge
provider:
  kind: scripted
  script: script.json
  max_retries: 2
  backoff: 0.0
  max_parallel: 4
agent:
  max_react_steps: 6
  temperature: 0.0
constants: {C: 1000, d_max: 11, alignment_threshold: 0.5}
stages: {generate: true, annotate: true, score: true, analyze: true, inject: true}
inject:
  dimensions: [acts, tools]
targets:
  model: toy-agent
"""


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    write_corpora()
    script = {"exchanges": agent_rules() + classifier_rules() + judge_rules()}
    (OUT / "script.json").write_text(json.dumps(script, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (OUT / "config.yaml").write_text(CONFIG, encoding="utf-8")
    print(f"wrote toy bundle to {OUT} ({len(script['exchanges'])} scripted exchanges)")


if __name__ == "__main__":
    main()
