import json

import pytest

from conftest import dialog, scripted
from todgap.agent import (INJECTION_HEADER, AgentConfig, AgentError, GenerationRecord, InjectionDirective,
                          build_system_prompt, context_messages, injection_block, run_react_turn, run_turns)
from todgap.corpus import Task, slice_contexts
from todgap.gateway import ChatResponse, ToolCall
from todgap.labels import LabelSet
from todgap.toolbox import Toolbox, WozDatabase


@pytest.fixture
def db():
    d = WozDatabase()
    d.add("hotel", [{"name": "alpha lodge", "area": "centre"}, {"name": "bravo hotel", "area": "north"}])
    d.add("train", [{"trainid": "TR1", "departure": "cambridge", "destination": "ely", "day": "monday",
                     "leaveat": "09:00", "arriveby": "09:20"}])
    return d


@pytest.fixture
def setup(db):
    cfg = AgentConfig.for_task("multiwoz", "agent-m", db=db, max_react_steps=3)
    return cfg, Toolbox.for_task("multiwoz", db=db), slice_contexts(dialog("d1", "uaua"))


def tool_response(name, **args):
    return ChatResponse(None, (ToolCall(name, args),))


def test_system_prompt_and_injection(setup):
    cfg, _, _ = setup
    plain = build_system_prompt(cfg)
    assert "alpha lodge" in plain and INJECTION_HEADER not in plain
    directive = InjectionDirective(LabelSet.of("request", "inform"), LabelSet.of("FindHotels"))
    injected = build_system_prompt(cfg, directive)
    block = injection_block(cfg, directive)
    assert injected.endswith(block) or block in injected
    assert block == (f"\n\n{INJECTION_HEADER}\nFor this turn, respond using dialog acts: inform, request.\n"
                     "For this turn, use exactly these tools: FindHotels.")
    assert "use no tools." in injection_block(cfg, InjectionDirective(target_tools=LabelSet()))
    assert "dialog acts: none." in injection_block(cfg, InjectionDirective(target_acts=LabelSet()))
    with pytest.raises(ValueError, match="dialog act"):
        injection_block(cfg, InjectionDirective(LabelSet.of("set_q")))
    with pytest.raises(ValueError, match="tool"):
        injection_block(cfg, InjectionDirective(target_tools=LabelSet.of("KnowledgeLookup")))
    with pytest.raises(ValueError):
        InjectionDirective()


def test_injection_only_adds_the_block(setup):
    cfg, _, _ = setup
    plain = build_system_prompt(cfg)
    directive = InjectionDirective(LabelSet.of("greet"))
    injected = build_system_prompt(cfg, directive)
    assert injected.replace(injection_block(cfg, directive), "") == plain


def test_config_validation(db):
    with pytest.raises(ValueError, match="registry"):
        AgentConfig("pcs", "m", AgentConfig.for_task("multiwoz", "m").registry)
    with pytest.raises(ValueError):
        AgentConfig.for_task("custom", "m")
    custom = AgentConfig.for_task("custom", "m", base_task="pcs")
    assert custom.template_task is Task.PCS and "set_q" in custom.act_labels
    assert AgentConfig.for_task("pcs", "m", db=db).entity_digest == ""


def test_context_roles():
    d = dialog("x", "aua", Task.PCS)
    assert [m.role for m in context_messages(d.turns)] == ["assistant", "user", "assistant"]


def test_plain_answer(setup):
    cfg, box, slices = setup
    gw, provider = scripted(({"model_id": "agent-m"}, "Which area would you like?"))
    rec = run_react_turn(slices[0], cfg, gw, box)
    assert rec.response_text == "Which area would you like?"
    assert rec.steps_used == 1 and not rec.forced_final and rec.tool_invocations == ()
    req = provider.requests[0]
    assert [m.role for m in req.messages] == ["user"]
    assert req.messages[0].content == slices[0].context[0].text
    assert {s.name for s in req.tool_schemas} == set(box.names)


def test_tool_loop_collects_knowledge(setup):
    cfg, box, slices = setup
    gw, provider = scripted(({"last_role": "user"}, tool_response("FindHotels", area="north")),
                            ({"last_role": "tool"}, "Bravo Hotel is in the north."))
    rec = run_react_turn(slices[1], cfg, gw, box)
    assert rec.steps_used == 2 and rec.tools == LabelSet.of("FindHotels")
    assert "bravo hotel" in rec.knowledge_text and "alpha lodge" not in rec.knowledge_text
    tool_msg = provider.requests[1].messages[-1]
    assert tool_msg.role == "tool" and json.loads(tool_msg.content)["count"] == 1
    assert GenerationRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec


def test_step_budget_forces_final(setup):
    cfg, box, slices = setup
    gw, provider = scripted(({"tool_choice": "none"}, "Here is what I found."),
                            ({"tool_choice": "auto"}, tool_response("FindHotels")))
    rec = run_react_turn(slices[0], cfg, gw, box)
    assert rec.forced_final and rec.steps_used == 3 and provider.calls == 4
    assert len(rec.tool_invocations) == 3
    assert provider.requests[-1].tool_choice == "none"


def test_tool_argument_error_fed_back_once(setup):
    cfg, box, slices = setup
    fixed = tool_response("BookTrain", trainid="TR1", people="2")
    gw, provider = scripted(({"last_role": "user"}, tool_response("BookTrain", trainid="TR1"), 1),
                            ({"last_contains": "missing required"}, fixed),
                            ({"last_role": "tool"}, "Booked."))
    rec = run_react_turn(slices[0], cfg, gw, box)
    assert rec.tool_invocations[0].error and rec.tool_invocations[1].result.payload["status"] == "booked"
    gw, _ = scripted(({"last_role": "user"}, tool_response("BookTrain", trainid="TR1")),
                     ({"last_role": "tool"}, tool_response("BookTrain", trainid="TR1")))
    with pytest.raises(AgentError, match="repeated") as err:
        run_react_turn(slices[0], cfg, gw, box)
    assert err.value.slice_key == slices[0].key


def test_gateway_failure_becomes_agent_error(setup):
    cfg, box, slices = setup
    gw, _ = scripted(({"last_contains": "nothing matches this"}, "x"))
    with pytest.raises(AgentError) as err:
        run_react_turn(slices[1], cfg, gw, box)
    assert err.value.slice_key == ("d1", 3)


def test_run_turns_keeps_order_and_directives(setup):
    cfg, box, slices = setup
    gw, provider = scripted(({}, lambda r: ChatResponse(f"reply to {r.messages[-1].content}")))
    directive = InjectionDirective(LabelSet.of("greet"))
    recs = run_turns(slices * 3, cfg, gw, box, directive_for=lambda s: directive, max_workers=4)
    assert [r.key for r in recs] == [s.key for s in slices * 3]
    assert all(r.injected == directive for r in recs)
    assert all(INJECTION_HEADER in req.system_prompt for req in provider.requests)
