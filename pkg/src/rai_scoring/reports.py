"""Report emitters: JSON, grid markdown, radar SVG, attribution CSV."""

from __future__ import annotations

import csv
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError
from .scoring import DIMENSIONS

# (label, kind, key): kind is "f1", "rs", "ds" (dimension), "cat" (explainability category) or "metric"
TABLE_ROWS = [
    ("F1-Score", "f1", None),
    ("Responsibility Score", "rs", None),
    ("Explainability Score", "ds", "explainability"),
    ("Complexity", "cat", "complexity"),
    ("Faithfulness", "cat", "faithfulness"),
    ("Robustness", "cat", "robustness"),
    ("Randomisation", "cat", "randomization"),
    ("Fairness Score", "ds", "fairness"),
    ("Accuracy Diff*", "metric", "accuracy_diff"),
    ("Precision Diff*", "metric", "precision_diff"),
    ("TPR Diff*", "metric", "tpr_diff"),
    ("FPR Diff*", "metric", "fpr_diff"),
    ("DemP Diff*", "metric", "demographic_parity_diff"),
    ("EOd Diff*", "metric", "equalized_odds_diff"),
    ("Sustainability Score", "ds", "sustainability"),
    ("Parameters Count*", "metric", "parameter_count"),
    ("FLOPs*", "metric", "flops"),
    ("MACs*", "metric", "macs"),
    ("Normalized kgCO2e*", "metric", "kg_co2e"),
    ("Robustness Score", "ds", "robustness"),
    ("Accuracy Gap*", "metric", "fgsm_accuracy_gap"),
    ("CLEVER-u", "metric", "clever_u"),
    ("Loss Sensitivity*", "metric", "loss_sensitivity"),
]

AXES = ("Explainability", "Fairness", "Sustainability", "Robustness")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass
class CellView:
    """Flattened scores of one (dataset, model) cell, as consumed by emitters."""

    dataset: str
    model: str
    f1: float | None = None
    responsibility_score: float | None = None
    dimension_scores: dict[str, float] = field(default_factory=dict)
    category_scores: dict[str, float] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    failed: str | None = None

    @classmethod
    def from_profile(cls, dataset: str, model: str, profile, failed: str | None = None) -> "CellView":
        if profile is None:
            return cls(dataset, model, failed=failed)
        return cls(dataset, model, profile.f1, profile.responsibility_score,
                   dict(profile.dimension_scores or {}), dict(profile.category_scores or {}),
                   {r.name: r.normalized for r in profile.per_metric if r.normalized is not None},
                   failed)

    @classmethod
    def from_report_cell(cls, cell: dict) -> "CellView":
        prof = cell.get("profile")
        if not prof:
            return cls(cell["dataset"], cell["model"], failed=cell.get("error"))
        return cls(cell["dataset"], cell["model"], prof.get("f1"), prof.get("responsibility_score"),
                   dict(prof.get("dimension_scores") or {}), dict(prof.get("category_scores") or {}),
                   {m["name"]: m["normalized"] for m in prof["per_metric"] if m.get("normalized") is not None},
                   cell.get("error"))


def _fmt(v) -> str:
    return "–" if v is None else f"{v:.4f}"


def _value(cell: CellView, kind: str, key):
    if kind == "f1":
        return cell.f1
    if kind == "rs":
        return cell.responsibility_score
    if kind == "ds":
        return cell.dimension_scores.get(key)
    if kind == "cat":
        return cell.category_scores.get(key)
    return cell.metrics.get(key)


def markdown_table(cells: list[CellView]) -> str:
    """Grid with one column per cell; scores bold, inverted metrics starred."""
    header = "| Dataset | " + " | ".join(c.dataset for c in cells) + " |"
    models = "| Model | " + " | ".join(c.model for c in cells) + " |"
    sep = "|---|" + "---|" * len(cells)
    lines = [header, sep, models]
    for label, kind, key in TABLE_ROWS:
        bold = kind in ("f1", "rs", "ds")
        vals = []
        for c in cells:
            s = "failed" if c.failed else _fmt(_value(c, kind, key))
            vals.append(f"**{s}**" if bold and s not in ("–", "failed") else s)
        name = f"**{label}**" if bold else label
        lines.append(f"| {name} | " + " | ".join(vals) + " |")
    lines.append("")
    lines.append("Metrics marked * are lower-is-better; their scores are inverted so 1 is ideal.")
    return "\n".join(lines) + "\n"


def radar_vertices(scores, cx: float = 200.0, cy: float = 200.0, radius: float = 150.0):
    """Axis order Explainability (up), Fairness (right), Sustainability (down), Robustness (left)."""
    pts = []
    for k, s in enumerate(scores):
        angle = -math.pi / 2 + k * math.pi / 2
        pts.append((cx + radius * s * math.cos(angle), cy + radius * s * math.sin(angle)))
    return pts


def radar_svg(dataset: str, cells: list[CellView], size: int = 400) -> str:
    cx = cy = size / 2
    radius = size * 0.375
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(size), height=str(size + 40),
                     viewBox=f"0 0 {size} {size + 40}")
    ET.SubElement(svg, "title").text = f"Responsibility profile: {dataset}"
    grid = ET.SubElement(svg, "g", {"class": "grid", "fill": "none", "stroke": "#bbbbbb"})
    for level in (0.25, 0.5, 0.75, 1.0):
        pts = radar_vertices([level] * 4, cx, cy, radius)
        ET.SubElement(grid, "path", {"d": _path(pts), "data-level": f"{level:.2f}"})
    for (x, y), label in zip(radar_vertices([1.0] * 4, cx, cy, radius), AXES):
        ET.SubElement(grid, "line", x1=f"{cx:.3f}", y1=f"{cy:.3f}", x2=f"{x:.3f}", y2=f"{y:.3f}")
        tx = x + (x - cx) * 0.08
        ty = y + (y - cy) * 0.08 + 4
        anchor = "middle" if abs(x - cx) < 1 else ("start" if x > cx else "end")
        ET.SubElement(svg, "text", {"x": f"{tx:.3f}", "y": f"{ty:.3f}", "text-anchor": anchor,
                                    "font-size": "12", "font-family": "sans-serif"}).text = label
    drawn = [c for c in cells if not c.failed and all(d in c.dimension_scores for d in DIMENSIONS)]
    for i, cell in enumerate(drawn):
        color = PALETTE[i % len(PALETTE)]
        pts = radar_vertices([cell.dimension_scores[d] for d in DIMENSIONS], cx, cy, radius)
        ET.SubElement(svg, "path", {"d": _path(pts), "class": "profile", "data-model": cell.model,
                                    "fill": color, "fill-opacity": "0.15", "stroke": color,
                                    "stroke-width": "2"})
        ET.SubElement(svg, "text", {"x": str(10 + 110 * i), "y": str(size + 25), "fill": color,
                                    "font-size": "12", "font-family": "sans-serif"}).text = cell.model
    return ET.tostring(svg, encoding="unicode", xml_declaration=False)


def _path(pts) -> str:
    return "M " + " L ".join(f"{x:.3f},{y:.3f}" for x, y in pts) + " Z"


def parse_path(d: str) -> list[tuple[float, float]]:
    body = d.replace("M", "").replace("Z", "").split("L")
    return [tuple(float(v) for v in p.strip().split(",")) for p in body]


def write_attribution_csv(path, feature_names, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(feature_names))
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in text).strip("_") or "x"


def emit_reports(report: dict, output_dir, formats=("json", "markdown", "radar_svg")) -> list[Path]:
    """Writes the requested artifacts for a run-report document; returns written paths."""
    unknown = set(formats) - {"json", "markdown", "radar_svg", "attribution_csv"}
    if unknown:
        raise InputError(f"unknown report formats {sorted(unknown)}")
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    cells = [CellView.from_report_cell(c) for c in report["cells"]]
    written = []
    if "json" in formats:
        p = out / "report.json"
        p.write_text(dumps_report(report))
        written.append(p)
    if "markdown" in formats:
        p = out / "report.md"
        p.write_text(markdown_table(cells))
        written.append(p)
    if "radar_svg" in formats:
        for dataset in dict.fromkeys(c.dataset for c in cells):
            p = out / f"radar_{_slug(dataset)}.svg"
            p.write_text(radar_svg(dataset, [c for c in cells if c.dataset == dataset]))
            written.append(p)
    if "attribution_csv" in formats:
        for cell in report["cells"]:
            attr = cell.get("attributions")
            if attr:
                p = out / f"attributions_{_slug(cell['dataset'])}_{_slug(cell['model'])}.csv"
                write_attribution_csv(p, attr["feature_names"], attr["values"])
                written.append(p)
    return written


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=False, allow_nan=False)
