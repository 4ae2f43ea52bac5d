import json
import math

import pytest

from todgap.analysis.report import (REFERENCE_TARGETS, TABLES, ReportError, build_report, csv_to_table,
                                    dumps_report, jsonable, resolve_targets, table_to_csv)

GAP = {"discrepancy": 0.25, "ci95": [0.1, 0.4], "mean_labels_agent": 1.5, "mean_labels_human": 2.0,
       "labels_delta_p": 0.03, "n_turns": 10, "n_dialogs": 4}


def report(**extra):
    return build_report({"config_hash": "abc"}, {"pcs": {"chat_count": 4}},
                        {"pcs": {"mean_turns": 10.0, "mean_distinct_acts": 3.0, "normalized_turn_count": 0.3,
                                 "act_diversity": 0.27, "composite": 0.285}},
                        {"gpt-4o": {"pcs": {"acts": GAP, "tools": {**GAP, "ci95": None}}}}, **extra)


def test_required_sections():
    with pytest.raises(ReportError, match="gaps"):
        build_report({"config_hash": "x"}, {"a": 1}, {"a": 1}, {})


def test_tables_and_csv_round_trip():
    rep = report()
    rows = rep["tables"]["fig2a_discrepancy"]
    assert [r["dimension"] for r in rows] == ["acts", "tools"] and rows[1]["ci_lo"] is None
    for name in TABLES:
        text = table_to_csv(name, rep["tables"][name], "abc")
        meta, back = csv_to_table(name, text)
        assert meta == {"config_hash": "abc"}
        assert back == [{c: r.get(c) for c, _ in TABLES[name]} for r in rep["tables"][name]]


def test_float_repr_round_trips_exactly():
    row = {**GAP, "model": "m", "task": "t", "dimension": "acts", "discrepancy": 0.1 + 0.2,
           "ci_lo": None, "ci_hi": None}
    _, (back,) = csv_to_table("fig2a_discrepancy", table_to_csv("fig2a_discrepancy", [row], "h"))
    assert back["discrepancy"] == 0.1 + 0.2


def test_non_finite_values_serialize():
    assert jsonable({"t": math.inf, "xs": (1.0, -math.inf)}) == {"t": "inf", "xs": [1.0, "-inf"]}
    text = dumps_report(report(judge={"pcs": {"t": math.inf}}))
    assert json.loads(text)["judge"]["pcs"]["t"] == "inf"


def test_resolve_targets():
    injection = {"gpt-4o": {"pcs": {"acts": {"aspects": {"a": {"improvement_pct": 10.0},
                                                         "b": {"improvement_pct": 30.0}}}}}}
    out = resolve_targets(report()["gaps"], injection, {"average": 0.5},
                          {"acts:iso": {"micro_f1": 0.7}})
    assert set(out) == set(REFERENCE_TARGETS)
    assert out["pcs_act_f1"] == {"target": 0.464, "measured": 0.75, "model": "gpt-4o"}
    assert out["pcs_act_injection_gain_pct"]["measured"] == 20.0
    assert out["pcs_tool_injection_gain_pct"]["measured"] is None
    assert out["act_classifier_f1_iso"]["measured"] == 0.7
    assert out["complexity_gap_correlation"]["measured"] == 0.5
    over = resolve_targets({}, {}, None, None, overrides={"pcs_act_f1": {"value": 0.5}})
    assert over["pcs_act_f1"]["target"] == 0.5 and over["pcs_act_f1"]["measured"] is None


def test_dumps_is_stable():
    assert dumps_report(report()) == dumps_report(json.loads(dumps_report(report())))
