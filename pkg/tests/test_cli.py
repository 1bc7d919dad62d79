import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from vcburgers.cli import main
from vcburgers.grammar import parse, to_text

SCHEMA = Path(__file__).resolve().parents[1] / "docs" / "report.schema.json"
EXPR_KEYS = {"witness", "value", "invariant", "X"}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, _ = run(*argv, "--format", "json")
    return code, json.loads(out)


def _expressions(node, key=None):
    if isinstance(node, dict):
        for k, v in node.items():
            if k == "elements" and isinstance(v, dict):
                yield from (s for s in v.values() if isinstance(s, str))
            else:
                yield from _expressions(v, k)
    elif isinstance(node, list):
        for v in node:
            yield from _expressions(v, key)
    elif isinstance(node, str) and key in EXPR_KEYS and node != "nonzero":
        yield node


def _check_schema(doc):
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(doc, json.loads(SCHEMA.read_text()))


def test_classify_burgers():
    code, out, _ = run("classify", "--class", "L", "--A2", "1", "--C", "1")
    assert code == 0
    assert "reducible" in out and "L0" in out


def test_classify_hat_case_six():
    code, doc = run_json("classify", "--class", "Lhat", "--A2", "exp(x)", "--A1", "3*exp(x)")
    assert code == 0
    assert doc["data"]["classification"]["case"] == 6
    assert doc["data"]["classification"]["parameters"] == {"c1": "3"}


def test_verify_hat_regular_cases():
    code, doc = run_json("verify-tables", "--table", "2")
    assert code == 0
    rows = {i["id"].split(".")[0] for i in doc["items"]} - {"derivation"}
    assert rows == {f"row{k}" for k in range(1, 8)}
    assert doc["summary"]["fail"] == 0
    _check_schema(doc)


def test_effective_group_exponents():
    code, doc = run_json("check-group", "--family", "effective-G0")
    assert code == 0
    assert doc["data"]["ansatz_exponents"] == [{"alpha": "-1/2", "beta": "1"}]


def test_failing_item_exits_one_with_witness():
    code, doc = run_json("check-group", "--family", "Gbar0")
    assert code == 1
    fails = [i for i in doc["items"] if i["status"] == "fail"]
    assert fails and all(i["witness"] for i in fails)
    _check_schema(doc)


def test_check_reduce_reports_violation():
    code, doc = run_json("check-reduce", "--A2", "x", "--C", "1")
    assert code == 1
    (bad,) = [i for i in doc["items"] if i["status"] == "fail"]
    assert bad["witness"] == "-x^(-2)"


def test_check_reduce_free_function_is_indeterminate():
    code, doc = run_json("check-reduce", "--A2", "g(t)", "--C", "1")
    assert code == 0
    assert [i["status"] for i in doc["items"]] == ["pass", "indeterminate"]
    assert doc["data"]["reducibility"]["reducible"] is False


@pytest.mark.parametrize("argv", [
    (),
    ("frobnicate",),
    ("verify-tables", "--table", "4"),
    ("classify", "--class", "L", "--A2", "1"),
    ("classify", "--class", "Lhat", "--A2", "1", "--C", "1"),
])
def test_usage_errors(argv):
    code, out, err = run(*argv)
    assert code == 2 and out == ""
    assert "expression grammar" in err


def test_bad_chart_in_environment(monkeypatch):
    monkeypatch.setenv("VCBURGERS_CHART", "sideways")
    code, _, err = run("proof-steps")
    assert code == 2 and "VCBURGERS_CHART" in err


def test_chart_from_environment(monkeypatch):
    monkeypatch.setenv("VCBURGERS_CHART", "xpos")
    _, doc = run_json("classify", "--class", "L", "--A2", "1", "--C", "1")
    assert doc["assumptions"]["chart"] == "xpos"


def test_parse_error_reports_position():
    code, _, err = run("classify", "--class", "L", "--A2", "1 +* x", "--C", "1")
    assert code == 3
    assert "--A2" in err and "position" in err


def test_missing_x_outside_library_is_usage_error():
    code, _, err = run("map", "--A2", "1", "--C", "1 + x^2")
    assert code == 2 and "X" in err


def test_json_is_byte_identical_and_out_file(tmp_path):
    argv = ("check-group", "--family", "Ghat", "--format", "json")
    _, first, _ = run(*argv)
    _, second, _ = run(*argv, "--out", str(tmp_path / "r.json"))
    assert first == second == (tmp_path / "r.json").read_text()


def test_timing_is_opt_in():
    _, doc = run_json("check-group", "--family", "L-equiv")
    assert "timing" not in doc
    _, doc = run_json("check-group", "--family", "L-equiv", "--timing")
    assert doc["timing"]["seconds"] >= 0


@pytest.mark.parametrize("argv", [
    ("classify", "--class", "L", "--A2", "abs(x)^(1/3)", "--C", "x", "--chart", "xpos"),
    ("classify", "--class", "Lhat", "--A2", "x*abs(x)^(1/3)", "--A1", "2*abs(x)^(1/3)"),
    ("check-reduce", "--A2", "a(t)", "--C", "a(t)"),
    ("map", "--A2", "A(t,x)", "--C", "exp(x)"),
    ("check-group", "--family", "Gbar0"),
])
def test_printed_expressions_round_trip(argv):
    _, doc = run_json(*argv)
    texts = list(_expressions(doc))
    assert texts
    for s in texts:
        assert to_text(parse(s, auto=True)) == s, s
    _check_schema(doc)


def test_module_entry_point():
    env = dict(os.environ, VCBURGERS_CHART="both")
    p = subprocess.run([sys.executable, "-m", "vcburgers", "classify", "--class", "L",
                        "--A2", "1", "--C", "1", "--format", "json"],
                       capture_output=True, text=True, env=env, check=False)
    assert p.returncode == 0
    assert json.loads(p.stdout)["suite"].startswith("classify")
    p = subprocess.run([sys.executable, "-m", "vcburgers", "classify", "--A2", "(("],
                       capture_output=True, text=True, env=env, check=False)
    assert p.returncode == 3
