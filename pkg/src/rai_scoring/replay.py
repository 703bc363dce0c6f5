"""Aggregation replay over pre-normalized metric values."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import InputError
from .scoring import (CATALOG, CATEGORIES, DIMENSIONS, SUPPLEMENTARY_FAIRNESS, MetricRecord,
                      ResponsibilityProfile, score_profile)

REPLAY_SCHEMA = {
    "type": "object",
    "required": ["cells"],
    "properties": {
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["dataset", "model", "metrics"],
                "properties": {
                    "dataset": {"type": "string"},
                    "model": {"type": "string"},
                    "f1": {"type": ["number", "null"]},
                    "metrics": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "dimension", "normalized"],
                            "properties": {
                                "name": {"type": "string"},
                                "dimension": {"enum": list(DIMENSIONS)},
                                "normalized": {"type": "number", "minimum": 0, "maximum": 1},
                                "category": {"enum": [*CATEGORIES, None]},
                                "in_dimension_mean": {"type": "boolean"},
                            },
                        },
                    },
                },
            },
        },
        "weights": {"type": ["array", "null"], "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
        "include_supplements": {"type": "boolean"},
    },
}


@dataclass
class ReplayRow:
    dataset: str
    model: str
    f1: float | None
    profile: ResponsibilityProfile

    @property
    def dimension_scores(self) -> dict[str, float]:
        return self.profile.dimension_scores or {}

    @property
    def responsibility_score(self) -> float:
        return self.profile.responsibility_score


def validate_replay(doc) -> None:
    try:
        jsonschema.validate(doc, REPLAY_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise InputError(f"replay input invalid at {pointer}: {exc.message}") from None


def _record(entry: dict, include_supplements: bool) -> MetricRecord:
    name = entry["name"]
    info = CATALOG.get(name)
    category = entry.get("category") or (info.category if info else None)
    if "in_dimension_mean" in entry:
        in_mean = entry["in_dimension_mean"]
    elif name in SUPPLEMENTARY_FAIRNESS:
        in_mean = include_supplements
    else:
        in_mean = True
    value = float(entry["normalized"])
    # values arrive already normalized: carry them through unchanged
    return MetricRecord(name, entry["dimension"], value, "identity_clamp", "higher_better",
                        category, in_mean)


def score_replay(doc: dict, weights=None, include_supplements: bool | None = None) -> list[ReplayRow]:
    """Dimension and responsibility scores for each cell of a replay document."""
    validate_replay(doc)
    if weights is None:
        weights = doc.get("weights")
    if include_supplements is None:
        include_supplements = doc.get("include_supplements", False)
    rows = []
    for cell in doc["cells"]:
        records = [_record(m, include_supplements) for m in cell["metrics"]]
        profile = score_profile(ResponsibilityProfile(records, f1=cell.get("f1")), weights=weights)
        rows.append(ReplayRow(cell["dataset"], cell["model"], cell.get("f1"), profile))
    return rows


def load_replay(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None


def reference_fixture() -> dict:
    """The transcribed nine-cell leaf-metric fixture shipped with the package."""
    text = resources.files("rai_scoring").joinpath("fixtures/reference_cells.json").read_text()
    return json.loads(text)
