import json
from pathlib import Path

import pytest

from massey_flow.cli import EXIT_INVALID, EXIT_OBSTRUCTED, EXIT_OK, EXIT_UNSTABLE, REPORT_SCHEMA, main

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*map(str, argv), "--out", str(out)])
    return code, json.loads(out.read_text()), out.read_bytes()


def fx(name):
    return FIXTURES / f"{name}.json"


def test_validate_exit_codes(tmp_path, capsys):
    code, doc, _ = run(tmp_path, "validate", fx("torus"))
    assert code == EXIT_OK and doc["valid"] and doc["schema"] == REPORT_SCHEMA
    code, doc, _ = run(tmp_path, "validate", fx("corrupted-bracket"))
    assert code == EXIT_INVALID
    bad = [v for v in doc["verdicts"] if not v["passed"]]
    assert bad[0]["invariant"] == "dgla_axioms" and "jacobi" in bad[0]["detail"]
    code, doc, _ = run(tmp_path, "validate", fx("non-flat"))
    assert code == EXIT_INVALID and "NotFlat" in json.dumps(doc)
    assert "jacobi" in capsys.readouterr().out


def test_unreadable_input(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{")
    assert main(["validate", str(p)]) == EXIT_INVALID
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_INVALID


def test_spectral_flow_reports(tmp_path):
    code, doc, _ = run(tmp_path, "spectral-flow", fx("constant"))
    assert code == EXIT_OK and doc["spectral_flow"]["spectral_flow"] == 0
    assert all(r["sig_Q"] == 0 for r in doc["spectral_flow"]["rows"])
    code, doc, _ = run(tmp_path, "spectral-flow", fx("torus"))
    row = doc["spectral_flow"]["rows"][0]
    assert (row["count"], row["sig_Q"]) == (4, 0)
    assert all(v["passed"] for v in doc["verdicts"])
    code, doc, _ = run(tmp_path, "spectral-flow", fx("order2-shift"), "--max-order", 2, "--branches")
    row = doc["spectral_flow"]["rows"][1]
    assert doc["spectral_flow"]["mode"] == "T" and (row["count"], row["sig_Q"]) == (2, 0)
    assert sorted(b["derivatives"][2] for b in doc["branches"]) == [-2.0, 2.0]


def test_unresolved_flow_exit(tmp_path):
    code, doc, _ = run(tmp_path, "spectral-flow", fx("torus-sl2"), "--strict")
    assert code == EXIT_OBSTRUCTED and "Unresolved" in doc["error"]
    assert len(doc["spectral_flow"]["rows"]) == 3


def test_oracle_reports(tmp_path):
    code, doc, _ = run(tmp_path, "oracle", fx("shift"), "--compare")
    assert code == EXIT_OK
    assert sorted(b["derivatives"][1] for b in doc["branches"]) == [-1.0, 1.0]
    code, doc, _ = run(tmp_path, "oracle", fx("torus"), "--compare")
    assert code == EXIT_OK and len(doc["branches"]) == 8
    assert sum(1 for b in doc["branches"] if b["derivatives"][1] > 0) == 4
    assert all(c["passed"] for c in doc["comparisons"])
    code, doc, _ = run(tmp_path, "oracle", fx("conjugation"))
    assert all(abs(d) < 1e-8 for b in doc["branches"] for d in b["derivatives"][1:])


def test_oracle_stability_gate_exit(tmp_path):
    # the truncated conjugation jet is only isospectral near t = 0; a large
    # radius makes the half-radius refit disagree
    code, doc, _ = run(tmp_path, "oracle", fx("conjugation"), "--compare", "--radius", 0.5)
    assert code == EXIT_UNSTABLE
    gate = [v for v in doc["verdicts"] if v["invariant"].startswith("stability gate")]
    assert gate and not gate[0]["passed"]
    code, _, _ = run(tmp_path, "oracle", fx("conjugation"), "--compare", "--radius", 0.05)
    assert code == EXIT_OK


def test_massey_reports(tmp_path):
    code, doc, _ = run(tmp_path, "massey", fx("abelian"), "--order", 2)
    assert code == EXIT_OK
    assert all(c["difference"] == 0 for c in doc["classes"])
    code, doc, _ = run(tmp_path, "massey", fx("sl2"), "--order", 1)
    assert code == EXIT_OK
    assert all(c["bracket_difference"] <= 1e-8 for c in doc["classes"])
    code, doc, _ = run(tmp_path, "massey", fx("obstructed"))
    assert code == EXIT_OBSTRUCTED and doc["obstruction"]["representative"]
    code, doc, _ = run(tmp_path, "massey", fx("random-dgla"), "--order", 3, "--input-class", "rep:1")
    assert code == EXIT_OK and len(doc["classes"]) == 1


def test_reports_are_byte_identical(tmp_path):
    for argv in (["spectral-flow", fx("torus-sl2"), "--branches"], ["oracle", fx("torus"), "--compare"],
                 ["massey", fx("random-dgla"), "--order", 2]):
        _, _, a = run(tmp_path, *argv)
        _, _, b = run(tmp_path, *argv)
        assert a == b


def test_fixture_command(tmp_path):
    out = tmp_path / "shift.json"
    assert main(["fixture", "shift", "--out", str(out)]) == EXIT_OK
    assert out.read_text() == fx("shift").read_text()


def test_json_format_to_stdout(capsys):
    assert main(["validate", "fixture:shift", "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["input"]["name"] == "shift"
