"""Group-disparity metrics for a binary sensitive attribute."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GroupingError, InputError

DIFF_METRICS = (
    "accuracy_diff",
    "precision_diff",
    "tpr_diff",
    "fpr_diff",
    "demographic_parity_diff",
    "equalized_odds_diff",
)


@dataclass(frozen=True)
class GroupedPredictions:
    y_true: np.ndarray
    y_pred: np.ndarray
    group: np.ndarray  # 1 = privileged

    def __post_init__(self):
        arrays = []
        for name in ("y_true", "y_pred", "group"):
            a = np.asarray(getattr(self, name)).astype(int).ravel()
            if np.any((a != 0) & (a != 1)):
                raise InputError(f"{name} must be binary")
            arrays.append(a)
            object.__setattr__(self, name, a)
        if len({len(a) for a in arrays}) != 1:
            raise InputError("y_true, y_pred and group must have equal lengths")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def size(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class GroupRates:
    size: int
    accuracy: float
    precision: float
    tpr: float
    fpr: float
    positive_rate: float
    undefined: list[str] = field(default_factory=list)


@dataclass
class FairnessReport:
    accuracy_diff: float
    precision_diff: float
    tpr_diff: float
    fpr_diff: float
    demographic_parity_diff: float
    equalized_odds_diff: float
    per_group: dict[str, GroupRates]

    def diffs(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in DIFF_METRICS}

    def to_dict(self) -> dict:
        return {**self.diffs(), "per_group": {k: asdict(v) for k, v in self.per_group.items()}}


def group_confusion(gp: GroupedPredictions) -> dict[str, Confusion]:
    """Confusion counts keyed ``privileged`` / ``unprivileged``."""
    out = {}
    for key, g in (("privileged", 1), ("unprivileged", 0)):
        m = gp.group == g
        if not m.any():
            raise GroupingError(f"no samples in the {key} group")
        t, p = gp.y_true[m], gp.y_pred[m]
        out[key] = Confusion(
            tp=int(np.sum((t == 1) & (p == 1))),
            fp=int(np.sum((t == 0) & (p == 1))),
            tn=int(np.sum((t == 0) & (p == 0))),
            fn=int(np.sum((t == 1) & (p == 0))),
        )
    return out


def _ratio(num: int, den: int, name: str, undefined: list[str]) -> float:
    # empty denominators define the rate as 0 and are recorded
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def group_rates(c: Confusion) -> GroupRates:
    undefined: list[str] = []
    return GroupRates(
        size=c.size,
        accuracy=_ratio(c.tp + c.tn, c.size, "accuracy", undefined),
        precision=_ratio(c.tp, c.tp + c.fp, "precision", undefined),
        tpr=_ratio(c.tp, c.tp + c.fn, "tpr", undefined),
        fpr=_ratio(c.fp, c.fp + c.tn, "fpr", undefined),
        positive_rate=_ratio(c.tp + c.fp, c.size, "positive_rate", undefined),
        undefined=undefined,
    )


def fairness_report(gp: GroupedPredictions) -> FairnessReport:
    conf = group_confusion(gp)
    rates = {k: group_rates(v) for k, v in conf.items()}
    a, b = rates["privileged"], rates["unprivileged"]
    tpr_diff = abs(a.tpr - b.tpr)
    fpr_diff = abs(a.fpr - b.fpr)
    return FairnessReport(
        accuracy_diff=abs(a.accuracy - b.accuracy),
        precision_diff=abs(a.precision - b.precision),
        tpr_diff=tpr_diff,
        fpr_diff=fpr_diff,
        demographic_parity_diff=abs(a.positive_rate - b.positive_rate),
        equalized_odds_diff=max(tpr_diff, fpr_diff),
        per_group=rates,
    )


def read_predictions_csv(path) -> GroupedPredictions:
    """Reads an audit file with columns ``y_true, y_pred, group``."""
    cols: dict[str, list[int]] = {"y_true": [], "y_pred": [], "group": []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in cols if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"predictions CSV is missing columns {missing}")
        for row_no, row in enumerate(reader, start=1):
            for c in cols:
                try:
                    cols[c].append(int(float(row[c])))
                except (TypeError, ValueError):
                    raise InputError(f"row {row_no}, column {c!r}: expected 0/1, got {row[c]!r}") from None
    return GroupedPredictions(*(np.asarray(cols[c]) for c in ("y_true", "y_pred", "group")))
