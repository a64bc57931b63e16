import json


from trialinfer.cli import main
from trialinfer.trial_report.bundled import fixture_text, golden_text


def test_adjust_matches_golden(capsysbinary):
    assert main(["adjust", "--fixture", "A"]) == 0
    assert capsysbinary.readouterr().out == golden_text("A")


def test_report_from_file_to_out(tmp_path):
    spec = tmp_path / "c.json"
    spec.write_text(fixture_text("C_full"), encoding="utf-8")
    out = tmp_path / "c.out.json"
    assert main(["report", "--spec", str(spec), "--format", "json", "--out", str(out)]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["schema"] == "trialinfer.report"


def test_design_lists_every_look(capsys):
    assert main(["design", "--fixture", "B", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 + 2 + 3
    assert lines[1].startswith("PFS,1,0.6600,")


def test_gsd_infer_single_endpoint_with_seed(capsys, monkeypatch):
    monkeypatch.setenv("TRIALINFER_SEED", "99")
    assert main(["gsd-infer", "--fixture", "B", "--endpoint", "PFS", "--reps", "20000"]) == 0
    out = capsys.readouterr().out
    assert "seed 99, 20000 replications" in out
    assert "OS" not in out.split("Note:")[0]
    assert main(["gsd-infer", "--fixture", "B", "--endpoint", "PFS", "--reps", "20000", "--seed", "7"]) == 0
    assert "seed 7," in capsys.readouterr().out


def test_digits_override(capsys):
    assert main(["adjust", "--fixture", "A", "--digits", "3"]) == 0
    assert "[−0.700, 0.000)" in capsys.readouterr().out


def test_invalid_spec_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    doc = json.loads(fixture_text("A"))
    doc["mcp"]["benefit_graph"]["weights"] = [0.7, 0.5, 0.0]
    bad.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["adjust", "--spec", str(bad)]) == 2
    assert "Σw > 1" in capsys.readouterr().err


def test_verify_passes(capsys):
    assert main(["verify", "--fixture", "A"]) == 0
    assert "PASS A" in capsys.readouterr().out
