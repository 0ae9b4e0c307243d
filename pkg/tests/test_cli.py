from __future__ import annotations

import json

import pytest

from k2design.catalog import load_builtin_catalog, loads
from k2design.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def report_text(tmp_path_factory):
    path = tmp_path_factory.mktemp("r") / "report.json"
    assert main(["verify-all", "--qmax", "0", "--out", str(path)]) == 0
    return path.read_text()


def test_verify_all_json(report_text):
    doc = json.loads(report_text)
    assert doc["ok"] is True and doc["schema_version"] == "1"
    assert doc["summary"]["total"] == 71 and doc["summary"]["excluded"] == 71
    assert doc["summary"]["audit_mismatches"] == 1
    assert doc["catalog_checksum"] == load_builtin_catalog().checksum()
    assert all(c["verdict"] == "Excluded" for c in doc["cases"])


def test_verify_all_text_for_one_family(capsys):
    code, out, _ = run(capsys, "verify-all", "--format", "text", "--family", "G2", "--qmax", "100")
    assert code == 0
    assert "G2.A2eps" in out and "theorem holds" in out
    assert "F4." not in out


def test_jobs_do_not_change_the_report(report_text, tmp_path):
    path = tmp_path / "r4.json"
    assert main(["verify-all", "--qmax", "0", "--jobs", "4", "--out", str(path)]) == 0
    assert path.read_text() == report_text


def test_explain_shows_the_congruence(capsys):
    code, out, _ = run(capsys, "explain", "3D4.G2q")
    assert code == 0
    assert "congruence:" in out and "(mod q^2 - 1)" in out
    assert "crossover:" in out and out.rstrip().endswith("verdict: Excluded (InequalityCrossover)")


def test_explain_json(capsys):
    code, out, _ = run(capsys, "explain", "G2.J2", "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["verdict"] == "Excluded" and d["trace"]


def test_explain_unknown_case(capsys):
    code, _, err = run(capsys, "explain", "E9.nothing")
    assert code == 2 and "unknown case" in err


def test_catalog_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "catalog", "validate")
    assert code == 0 and out.strip().endswith("0 violations")
    code, out, _ = run(capsys, "catalog", "list", "--family", "2B2")
    assert code == 0 and all(line.split("\t")[1] == "2B2" for line in out.splitlines())
    code, out, _ = run(capsys, "catalog", "dump")
    assert code == 0 and loads(out) == load_builtin_catalog()


def test_extra_catalog_with_missing_data_fails(capsys, tmp_path):
    extra = tmp_path / "extra.cat"
    extra.write_text("case id=X.P family=G2 stab=P order=q^6*(q^2-1)*(q-1) route=PARABOLIC_PPOWER\n")
    code, out, _ = run(capsys, "verify-all", "--catalog", str(extra), "--family", "G2", "--qmax", "0")
    doc = json.loads(out)
    assert code == 1 and doc["ok"] is False and doc["summary"]["missing_data"] == 1


def test_bad_catalogs_exit_2(capsys, tmp_path):
    broken = tmp_path / "broken.cat"
    broken.write_text("group name=X order=q^2+ out=1 fcap_sq=q\n")
    code, _, err = run(capsys, "catalog", "validate", "--catalog", str(broken))
    assert code == 2 and "broken.cat:1:" in err
    wrong = tmp_path / "wrong.cat"
    wrong.write_text("numeric id=G2(4).J2 family=G2 q=4 stab=J2 order=604800 v=417\n")
    code, _, err = run(capsys, "verify-all", "--catalog", str(wrong))
    assert code == 2 and "order*v" in err
    code, _, _ = run(capsys, "verify-all", "--catalog", str(tmp_path / "absent.cat"))
    assert code == 2


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "verify-all", "--format", "xml")[0] == 2
