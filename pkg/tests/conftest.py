from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from todgap.annotators import data_path
from todgap.corpus import Dialog, Speaker, Task, Turn
from todgap.gateway import ChatResponse, Gateway, MatchSpec, RetryPolicy, ScriptedExchange, ScriptedProvider

TOY_DIR = data_path("toy")
GOLDEN = Path(__file__).parent / "golden"


def dialog(dialog_id: str, speakers: str, task: Task = Task.MULTIWOZ, success=None) -> Dialog:
    """Build a dialog from a speaker string such as ``"uaua"`` (a = expert)."""
    turns = [Turn(i, Speaker.HUMAN_EXPERT if s == "a" else Speaker.USER, f"{dialog_id} turn {i} {s}")
             for i, s in enumerate(speakers)]
    return Dialog(dialog_id, task, tuple(turns), success)


def scripted(*rules, cache=None, **policy) -> tuple[Gateway, ScriptedProvider]:
    """Gateway over a scripted provider; rules are (MatchSpec kwargs | callable, response)."""
    exchanges = []
    for match, response, *times in rules:
        pred = MatchSpec(**match) if isinstance(match, dict) else match
        if isinstance(response, str):
            response = ChatResponse(response)
        exchanges.append(ScriptedExchange(pred, response, times[0] if times else None))
    provider = ScriptedProvider(exchanges)
    return Gateway(provider, cache, RetryPolicy(**{"backoff": 0.0, **policy})), provider


@pytest.fixture
def toy_config(tmp_path) -> Path:
    """Copy of the bundled toy config whose outputs land in ``tmp_path``."""
    dst = tmp_path / "toy"
    shutil.copytree(TOY_DIR, dst)
    return dst / "config.yaml"


# --- acceptance reporting -----------------------------------------------------

CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
