from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from rai_scoring.replay import score_replay, reference_fixture
from rai_scoring.reports import (CellView, emit_reports, markdown_table, parse_path, radar_svg,
                                 radar_vertices, write_attribution_csv)

SVG = "{http://www.w3.org/2000/svg}"
EXPECTED = json.loads((Path(__file__).parent / "data" / "reference_expected.json").read_text())


def view(model, ds, dataset="d"):
    return CellView(dataset, model, 0.8, sum(ds) / 4,
                    dict(zip(("explainability", "fairness", "sustainability", "robustness"), ds)))


def profile_points(svg_text, model):
    root = ET.fromstring(svg_text)
    for p in root.iter(f"{SVG}path"):
        if p.get("data-model") == model:
            return parse_path(p.get("d"))
    raise KeyError(model)


def test_half_profile_vertices_at_half_radius():
    pts = profile_points(radar_svg("d", [view("m", (0.5, 0.5, 0.5, 0.5))], size=400), "m")
    assert len(pts) == 4
    for x, y in pts:
        assert math.hypot(x - 200, y - 200) == pytest.approx(0.5 * 150, abs=1e-3)


def test_axis_order_and_low_sustainability_vertex():
    e, f, s, r = profile_points(radar_svg("d", [view("m", (1.0, 1.0, 0.0071, 1.0))]), "m")
    assert e[1] < 200 and f[0] > 200 and r[0] < 200
    assert math.hypot(s[0] - 200, s[1] - 200) <= 0.01 * 150
    assert s[1] >= 200 and abs(s[0] - 200) < 1e-6


def test_svg_is_self_contained_xml():
    text = radar_svg("d", [view("a", (0.2, 0.4, 0.6, 0.8)), view("b", (0.9, 0.1, 0.5, 0.5))])
    root = ET.fromstring(text)
    labels = [t.text for t in root.iter(f"{SVG}text")]
    for axis in ("Explainability", "Fairness", "Sustainability", "Robustness"):
        assert axis in labels
    levels = [p.get("data-level") for p in root.iter(f"{SVG}path") if p.get("data-level")]
    assert levels == ["0.25", "0.50", "0.75", "1.00"]
    assert "href" not in text and "<image" not in text


def test_radar_vertices_symmetry():
    pts = radar_vertices([1, 1, 1, 1], 0, 0, 1)
    assert pts[0] == pytest.approx((0, -1)) and pts[1] == pytest.approx((1, 0))
    assert pts[2] == pytest.approx((0, 1)) and pts[3] == pytest.approx((-1, 0))


def test_markdown_on_replay_fixture_matches_printed_values():
    rows = score_replay(reference_fixture())
    cells = [CellView.from_profile(r.dataset, r.model, r.profile) for r in rows]
    md = markdown_table(cells)
    grid = {line.split("|")[1].strip().strip("*"): [c.strip().strip("*") for c in line.split("|")[2:-1]]
            for line in md.splitlines() if line.startswith("| ")}
    doc = reference_fixture()
    leaf_labels = {"Accuracy Diff": "accuracy_diff", "FPR Diff": "fpr_diff", "EOd Diff": "equalized_odds_diff",
                   "FLOPs": "flops", "CLEVER-u": "clever_u", "Loss Sensitivity": "loss_sensitivity"}
    for label, name in leaf_labels.items():
        printed = [f"{next(m['normalized'] for m in c['metrics'] if m['name'] == name):.4f}" for c in doc["cells"]]
        assert grid[label] == printed
    for label, cat in (("Complexity", "complexity"), ("Randomisation", "randomization")):
        assert grid[label] == [f"{e['category_scores'][cat]:.4f}" for e in EXPECTED]
    assert grid["F1-Score"] == [f"{c['f1']:.4f}" for c in doc["cells"]]
    # score rows are recomputed from the leaves: equal to the printed value within rounding
    for label, key in (("Responsibility Score", None), ("Fairness Score", "fairness")):
        printed = [e["responsibility_score"] if key is None else e["dimension_scores"][key] for e in EXPECTED]
        assert all(abs(float(g) - p) <= 5e-4 for g, p in zip(grid[label], printed))


def test_markdown_marks_failures_and_missing():
    md = markdown_table([CellView("d", "m", failed="boom"), CellView("d", "n", f1=0.5)])
    assert "failed" in md and "–" in md


def test_emit_reports_writes_requested_files(tmp_path):
    report = {"cells": [
        {"dataset": "Syn data", "model": "MLP", "error": None,
         "profile": {"f1": 0.9, "responsibility_score": 0.5, "category_scores": {},
                     "dimension_scores": {"explainability": 0.5, "fairness": 0.5,
                                          "sustainability": 0.5, "robustness": 0.5},
                     "per_metric": [{"name": "flops", "normalized": 0.25}]},
         "attributions": {"feature_names": ["a", "b"], "values": [[0.1, -0.2], [0.0, 1.5]]}}]}
    written = emit_reports(report, tmp_path / "out", ("json", "markdown", "radar_svg", "attribution_csv"))
    names = sorted(p.name for p in written)
    assert names == ["attributions_Syn_data_MLP.csv", "radar_Syn_data.svg", "report.json", "report.md"]
    assert json.loads((tmp_path / "out" / "report.json").read_text()) == report
    csv_lines = (tmp_path / "out" / "attributions_Syn_data_MLP.csv").read_text().splitlines()
    assert csv_lines[0] == "a,b" and csv_lines[2] == "0.0,1.5"


def test_emit_reports_rejects_unknown_format(tmp_path):
    from rai_scoring.errors import InputError
    with pytest.raises(InputError):
        emit_reports({"cells": []}, tmp_path, ("pdf",))


def test_emit_reports_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_reports({"cells": []}, blocker / "sub", ("json",))


def test_attribution_csv_round_trip(tmp_path):
    p = tmp_path / "a.csv"
    write_attribution_csv(p, ["x", "y"], [[1 / 3, 2.0]])
    assert float(p.read_text().splitlines()[1].split(",")[0]) == 1 / 3
