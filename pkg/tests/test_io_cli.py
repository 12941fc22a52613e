import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_expansion.cli import main
from robust_expansion.io import (
    CaseFileError,
    Report,
    bundled_cases,
    case_from_dict,
    case_to_dict,
    dumps_case,
    load_case,
    plan_from_dict,
    plan_to_dict,
    report_from_trace,
    resolve_case_path,
    save_case,
    write_report,
)
from robust_expansion.ccg import ccg_solve
from robust_expansion.model import InvestmentPlan

from _instances import random_case


def test_bundled_cases_load():
    assert set(bundled_cases()) >= {"garver6.json", "ieee118-lite.json", "tiny3.json"}
    for name in bundled_cases():
        load_case(name)
    garver = load_case("garver6.json")
    assert len(garver.buses) == 6
    assert len(garver.candidate_generators) >= 6
    (members,) = garver.groups.values()
    assert {g.bus for g in members} == {"1"}
    assert garver.planning.gen_budget == 350 and garver.planning.gamma_d == 2


def test_negative_capacity_names_the_field(tmp_path):
    data = json.loads(resolve_case_path("tiny3.json").read_text())
    data["lines"][0]["capacity_mw"] = -5
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(CaseFileError, match=r"lines\[0\]"):
        load_case(path)


def test_unknown_and_missing_fields_rejected():
    data = json.loads(resolve_case_path("tiny3.json").read_text())
    data["buses"][0]["voltage"] = 1.0
    with pytest.raises(CaseFileError, match="voltage"):
        case_from_dict(data)
    data = json.loads(resolve_case_path("tiny3.json").read_text())
    del data["planning"]["discount_rate"]
    with pytest.raises(CaseFileError, match="discount_rate"):
        case_from_dict(data)


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x",\n  "buses": [}\n')
    with pytest.raises(CaseFileError, match="line 2"):
        load_case(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_case_round_trip(seed):
    case = random_case(seed)
    assert case_from_dict(json.loads(dumps_case(case))) == case
    assert case_to_dict(case_from_dict(case_to_dict(case))) == case_to_dict(case)


def test_save_and_load(tmp_path):
    case = random_case(4)
    save_case(case, tmp_path / "c.json")
    assert load_case(tmp_path / "c.json") == case


def test_plan_round_trip_and_errors():
    case = load_case("tiny3.json")
    plan = InvestmentPlan.from_periods(case, lines={"C1": 2}, gens={"N1": 1})
    assert plan_from_dict(case, plan_to_dict(plan)) == plan
    with pytest.raises(CaseFileError, match="not a candidate"):
        plan_from_dict(case, {"lines": {"nope": 1}})
    with pytest.raises(CaseFileError, match="outside"):
        plan_from_dict(case, {"lines": {"C1": 9}})


def _read_csv(path):
    with path.open(newline="") as fh:
        return list(csv.reader(fh))


def test_csv_report_header_only_when_nothing_built(tmp_path):
    report = Report("x", True, 1, 0.0, 0.0, 0.0, (), 0.0, 0.0, ())
    sched, trace = write_report(report, tmp_path / "r.csv", "csv")
    assert sched.name == "r_schedule.csv" and trace.name == "r_trace.csv"
    assert len(_read_csv(sched)) == 1
    assert len(_read_csv(trace)) == 1


def test_csv_report_totals_and_trace(tmp_path):
    case = load_case("tiny3.json")
    trace = ccg_solve(case)
    report = report_from_trace(case, trace)
    sched, tr = write_report(report, tmp_path / "r", "csv")
    rows = _read_csv(sched)
    assert len(rows) == len(report.schedule) + 2
    assert rows[-1][0] == "total"
    assert float(rows[-1][5]) == pytest.approx(report.investment_npc)
    assert len(_read_csv(tr)) == trace.n_iterations + 1
    (out,) = write_report(report, tmp_path / "r.json")
    data = json.loads(out.read_text())
    assert data["objective"] == pytest.approx(trace.objective, rel=1e-12)


def test_cli_validate(capsys):
    assert main(["validate", "tiny3.json"]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_invalid_case(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{}")
    assert main(["validate", str(path)]) == 2


def test_cli_usage_errors():
    assert main([]) == 1
    assert main(["solve"]) == 1
    assert main(["solve", "tiny3.json", "--epsilon", "0"]) == 1


def test_cli_solve(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["solve", "tiny3.json", "--epsilon", "1e-6", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["converged"] and data["bounds"]["gap"] <= 1e-6
    assert "objective" in capsys.readouterr().out


def test_cli_iteration_cap_exit_code():
    assert main(["solve", "tiny3.json", "--max-iter", "1"]) == 3


def test_cli_dump_models(tmp_path):
    assert main(["solve", "tiny3.json", "--dump-models", str(tmp_path / "m")]) == 0
    names = {p.name for p in (tmp_path / "m").iterdir()}
    assert "master_001.lp" in names and "subproblem_001_t01.lp" in names


def test_cli_evaluate(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"lines": {"C1": 1}}))
    assert main(["evaluate", "tiny3.json", str(plan)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["plan"]["lines"] == {"C1": 1}
    assert data["total"] > 0


def test_cli_oracle_compare(capsys):
    assert main(["oracle", "tiny3.json", "--compare"]) == 0
    text = capsys.readouterr().out
    assert "oracle:" in text and "relative difference" in text


def test_cli_backend_option():
    assert main(["--backend", "highs", "solve", "tiny3.json"]) == 0


def test_cli_is_deterministic(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        assert main(["solve", "tiny3.json", "--out", str(tmp_path / name)]) == 0
        data = json.loads((tmp_path / name).read_text())
        for row in data["trace"]:
            row.pop("seconds")
        outs.append(data)
    assert outs[0] == outs[1]
