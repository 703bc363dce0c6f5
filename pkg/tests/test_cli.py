from __future__ import annotations

import json

import pytest

from test_pipeline import tiny_config
from rai_scoring.cli import main
from rai_scoring.replay import reference_fixture


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_run_writes_reports_and_prints_scores(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", tiny_config(models=[{"architecture": "mlp", "hidden_dims": [4]}],
                                                   output_dir="out"))
    assert main(["run", "--config", str(cfg), "--seed-offset", "5"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("tiny\tMLP\tRS=")
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["metadata"]["seeds"] == [5]
    assert (tmp_path / "out" / "report.md").exists() and (tmp_path / "out" / "radar_tiny.svg").exists()

    assert main(["report", "--input", str(tmp_path / "out" / "report.json"),
                 "--format", "markdown", "--output-dir", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "report.md").read_text() == (tmp_path / "out" / "report.md").read_text()


def test_run_with_failed_cell_exits_one(tmp_path, capsys):
    doc = tiny_config(models=[{"architecture": "mlp", "hidden_dims": [4], "dropout_rates": [0.1, 0.1]}],
                      formats=["json"])
    cfg = write(tmp_path / "cfg.json", doc)
    assert main(["run", "--config", str(cfg), "--output-dir", str(tmp_path / "o")]) == 1
    assert "FAILED tiny/MLP" in capsys.readouterr().err
    assert json.loads((tmp_path / "o" / "report.json").read_text())["failed_cells"] == 1


def test_run_config_errors_exit_two(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", tiny_config(models=[]))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "no models" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2


def test_score_table(tmp_path, capsys):
    src = write(tmp_path / "replay.json", reference_fixture())
    assert main(["score", "--input", str(src), "--markdown", str(tmp_path / "t.md")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t") == ["dataset", "model", "f1", "explainability", "fairness",
                                    "sustainability", "robustness", "RS"]
    assert len(lines) == 10
    assert lines[1].split("\t")[:2] == ["German Credit", "MLP"] and lines[1].endswith("\t0.8352")
    assert "Responsibility Score" in (tmp_path / "t.md").read_text()


def test_score_with_weights_and_supplements(tmp_path, capsys):
    src = write(tmp_path / "replay.json", reference_fixture())
    assert main(["score", "--input", str(src), "--weights", "0,1,0,0", "--include-supplements"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split("\t")
    assert row[-1] == row[4]


def test_score_empty_and_invalid(tmp_path, capsys):
    assert main(["score", "--input", str(write(tmp_path / "e.json", {"cells": []}))]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1
    bad = {"cells": [{"dataset": "d", "model": "m", "metrics": [{"name": "x", "dimension": "fairness",
                                                                 "normalized": 2}]}]}
    assert main(["score", "--input", str(write(tmp_path / "b.json", bad))]) == 2
    assert "/cells/0/metrics/0/normalized" in capsys.readouterr().err
    assert main(["score", "--input", str(tmp_path / "e.json"), "--weights", "1,0,0"]) == 2


def test_bad_weights_syntax_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["score", "--input", "x.json", "--weights", "a,b"])
    assert exc.value.code == 2


def test_fairness_audit(tmp_path, capsys):
    csv = tmp_path / "p.csv"
    csv.write_text("y_true,y_pred,group\n1,1,1\n0,1,1\n1,0,0\n0,0,0\n")
    assert main(["fairness-audit", "--predictions", str(csv)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["tpr_diff"] == 1.0 and rep["fpr_diff"] == 1.0 and rep["accuracy_diff"] == 0.0
    csv.write_text("y_true,group\n1,1\n")
    assert main(["fairness-audit", "--predictions", str(csv)]) == 2


def test_report_rejects_non_report(tmp_path):
    assert main(["report", "--input", str(write(tmp_path / "x.json", [1, 2]))]) == 2
