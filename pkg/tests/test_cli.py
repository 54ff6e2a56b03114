import json
import subprocess
import sys

import jsonschema
import pytest

from glc import report
from glc.cli import main

from conftest import DATA, REPO

EXAMPLE1 = DATA / "examples" / "example1.gkb"
EXAMPLE2 = DATA / "examples" / "example2.gkb"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_annual_vs_biennial_file(capsys):
    code, out, _ = run(capsys, "check", str(EXAMPLE1), "--json")
    assert code == report.EXIT_CONTRADICTION
    payload = json.loads(out)
    (f,) = payload["findings"]
    assert (f["kind"], f["conflict_sorts"], f["refined_sorts"]) == ("Contradiction", ["frequency"], ["modality"])
    assert f["provenances"] == ["O1", "O2"]
    assert f["condition_overlap"] == {"age": "[50,74]"}


def test_check_duration_range_file(capsys):
    code, out, _ = run(capsys, "check", str(EXAMPLE2), "--json")
    assert code == report.EXIT_OK
    (f,) = json.loads(out)["findings"]
    assert (f["kind"], f["derived_params"]) == ("Disagreement", {"duration": "[150,300]"})


def test_check_empty_kb(tmp_path, capsys):
    path = tmp_path / "empty.gkb"
    path.write_text("")
    code, out, _ = run(capsys, "check", str(path), "--json")
    payload = json.loads(out)
    assert code == 0
    assert payload["findings"] == [] and payload["stats"]["compared_pairs"] == 0


def test_check_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.gkb"
    path.write_text("recommend x { f: [2,1] } @ A;\nsource ;\n")
    code, out, err = run(capsys, "check", str(path))
    assert code == report.EXIT_ERROR
    assert out == ""
    assert err.count("error:") >= 2


def test_check_inconsistent_source(tmp_path, capsys):
    path = tmp_path / "self.gkb"
    path.write_text(
        "sort f: interval(months) role action; source A; source B;"
        "recommend p { f: [12,12] } @ A; recommend p { f: [24,24] } @ A;"
    )
    code, out, _ = run(capsys, "check", str(path), "--json")
    assert code == report.EXIT_INCONSISTENT
    assert list(json.loads(out)["inconsistent_sources"]) == ["A"]


def test_check_text_output(capsys):
    code, out, _ = run(capsys, "check", str(EXAMPLE1))
    assert code == 2 and "CONTRADICTION" in out


def test_condition_scope_flag(tmp_path, capsys):
    path = tmp_path / "scope.gkb"
    path.write_text(
        "sort age: interval(years) role condition; sort f: interval(months) role action; source A; source B;"
        "recommend p { age: [40,74], f: [24,24] } @ A; recommend p { age: [50,74], f: [24,24] } @ B;"
    )
    _, out, _ = run(capsys, "check", str(path), "--json")
    (f,) = json.loads(out)["findings"]
    assert f["condition_scope"] is True and f["conflict_sorts"] == ["age"]


def test_missing_file(capsys):
    code, _, err = run(capsys, "check", "/nonexistent/kb.gkb")
    assert code == 1 and "error" in err


def test_pipeline_finds_annual_vs_biennial(capsys):
    code, out, _ = run(capsys, "pipeline", "--json")
    payload = json.loads(out)
    assert code == report.EXIT_CONTRADICTION
    hits = [
        f for f in payload["findings"]
        if f["kind"] == "Contradiction" and "frequency" in f["conflict_sorts"]
        and set(f["provenances"]) == {"ACOG", "USPSTF"}
    ]
    assert hits
    for ev in hits[0]["evidence"]:
        for s, e in ev["spans"]:
            assert 0 <= s < e <= len(ev["text"])


def test_pipeline_partitions_pairs(capsys):
    _, out, _ = run(capsys, "pipeline", "--json")
    p = json.loads(out)
    stats = p["stats"]
    assert stats["compared_pairs"] == (
        len(p["agreements"]) + len(p["conflicts"]) + len(p["not_comparable"]) + len(p["extraction_failures"])
    )
    assert len(p["findings"]) == len(p["conflicts"])
    assert stats["compared_pairs"] == sum(v for k, v in stats.items() if k != "compared_pairs")


def test_pipeline_json_matches_schema(capsys):
    _, out, _ = run(capsys, "pipeline", "--json")
    schema = json.loads((REPO / "docs" / "report.schema.json").read_text())
    jsonschema.validate(json.loads(out), schema)


def test_pipeline_single_document(tmp_path, capsys):
    (tmp_path / "ACS.txt").write_text((DATA / "corpus" / "ACS.txt").read_text())
    code, out, _ = run(capsys, "pipeline", "--corpus", str(tmp_path), "--json")
    payload = json.loads(out)
    assert code == 0 and payload["findings"] == [] and payload["stats"]["compared_pairs"] == 0


def test_pipeline_full_threshold(capsys):
    _, out, _ = run(capsys, "pipeline", "--threshold", "1.0", "--json")
    for group in ("agreements", "conflicts", "not_comparable", "extraction_failures"):
        for rec in json.loads(out)[group]:
            assert rec["score"] == 1.0


def test_pipeline_rejects_undeclared_documents(tmp_path, capsys):
    (tmp_path / "WHO.txt").write_text("Annual screening mammography is recommended.\n")
    code, _, err = run(capsys, "pipeline", "--corpus", str(tmp_path))
    assert code == 1 and "WHO" in err


def test_threshold_flag_range(capsys):
    with pytest.raises(SystemExit):
        main(["pipeline", "--threshold", "2"])


def test_eval_reports_metrics(capsys):
    code, out, _ = run(capsys, "eval", "--json")
    m = json.loads(out)
    assert code == 0
    assert m["total"] == 84
    assert sum(sum(row.values()) for row in m["confusion"].values()) == 84
    assert set(m["binary"]) == {"false_positives", "false_negatives", "accuracy"}


def test_eval_self_consistency(tmp_path, capsys):
    _, out, _ = run(capsys, "eval", "--json")
    gold = tmp_path / "own.json"
    gold.write_text(json.dumps(report.gold_from_cells(json.loads(out)["cells"])))
    _, out, _ = run(capsys, "eval", "--gold", str(gold), "--json")
    assert json.loads(out)["accuracy"] == 1.0


def test_eval_unrelated_document_micro_case(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "ACP.txt").write_text("Patients should discuss diet with their physician.\n")
    queries = tmp_path / "q.tsv"
    queries.write_text("q1\tMammography is recommended for women age 40-49.\n")
    gold = tmp_path / "gold.json"
    gold.write_text(json.dumps({"labels": [{"query_id": "q1", "doc": "ACP", "label": "NoRecommendation"}]}))
    code, out, _ = run(capsys, "eval", "--corpus", str(corpus), "--queries", str(queries), "--gold", str(gold), "--json")
    assert code == 0 and json.loads(out)["accuracy"] == 1.0


def test_eval_unknown_gold_ids(tmp_path, capsys):
    gold = json.loads((DATA / "gold.json").read_text())
    gold["labels"].append({"query_id": "q99", "doc": "ACS", "label": "Agreement"})
    path = tmp_path / "gold.json"
    path.write_text(json.dumps(gold))
    code, _, err = run(capsys, "eval", "--gold", str(path))
    assert code == 1 and "q99" in err


def test_eval_gold_schema_violation(tmp_path, capsys):
    path = tmp_path / "gold.json"
    path.write_text(json.dumps({"labels": [{"query_id": "q01", "doc": "ACS", "label": "Maybe"}]}))
    code, _, _ = run(capsys, "eval", "--gold", str(path))
    assert code == 1


def test_eval_text_rendering(capsys):
    code, out, _ = run(capsys, "eval")
    assert code == 0 and out.startswith("accuracy:")


def test_extract_command(capsys):
    code, out, _ = run(capsys, "extract", "Biennial screening mammography is recommended for women aged 50 to 74.")
    assert code == 0
    assert out.strip() == (
        "recommend screening { age: [50,74], frequency: [24,24], modality: {mammography}, stance: recommend } @ QUERY;"
    )


def test_extract_from_stdin(monkeypatch, capsys):
    import io

    monkeypatch.setattr(sys, "stdin", io.StringIO("Eat well.\nScreening annually or biennial.\n"))
    code, out, _ = run(capsys, "extract", "-")
    assert code == 1
    assert out.splitlines()[0].startswith("# no recommendation")
    assert out.splitlines()[1].startswith("# ambiguous")


def test_shipped_schemas_match_docs():
    for name in ("report.schema.json", "gold.schema.json", "metrics.schema.json"):
        packaged = (REPO / "src" / "glc" / "schemas" / name).read_text()
        assert (REPO / "docs" / name).read_text() == packaged


def test_bundled_gold_matches_schema():
    schema = json.loads((REPO / "docs" / "gold.schema.json").read_text())
    jsonschema.validate(json.loads((DATA / "gold.json").read_text()), schema)


def test_console_script_and_logging():
    proc = subprocess.run(
        [sys.executable, "-m", "glc.cli", "-v", "check", str(EXAMPLE2)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "DISAGREEMENT" in proc.stdout
    assert "finished check" in proc.stderr
