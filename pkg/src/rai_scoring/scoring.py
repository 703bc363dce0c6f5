"""Metric normalization, dimension scores and the responsibility score."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AggregationError, ConfigurationError, NormalizationError
from .sustainability import max_norm_invert

DIMENSIONS = ("explainability", "fairness", "sustainability", "robustness")
CATEGORIES = ("complexity", "faithfulness", "robustness", "randomization")
NORM_RULES = ("identity_clamp", "one_minus_raw", "max_norm_invert", "ratio_of_radius",
              "rescale_correlation", "rescale_entropy")
INVERTING_RULES = ("one_minus_raw", "max_norm_invert", "rescale_entropy")
POOLED_RULES = ("max_norm_invert",)
SUPPLEMENTARY_FAIRNESS = ("demographic_parity_diff", "equalized_odds_diff")

# slack for floating-point noise at rule-domain edges
_DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class MetricInfo:
    dimension: str
    category: str | None
    direction: str
    norm_rule: str
    in_dimension_mean: bool = True


CATALOG: dict[str, MetricInfo] = {
    "local_lipschitz_estimate": MetricInfo("explainability", "robustness", "lower_better", "max_norm_invert"),
    "consistency": MetricInfo("explainability", "robustness", "higher_better", "identity_clamp"),
    "faithfulness_correlation": MetricInfo("explainability", "faithfulness", "higher_better", "rescale_correlation"),
    "faithfulness_estimate": MetricInfo("explainability", "faithfulness", "higher_better", "rescale_correlation"),
    "model_parameter_randomization": MetricInfo("explainability", "randomization", "higher_better", "identity_clamp"),
    "random_logit": MetricInfo("explainability", "randomization", "higher_better", "identity_clamp"),
    "sparseness": MetricInfo("explainability", "complexity", "higher_better", "identity_clamp"),
    "complexity": MetricInfo("explainability", "complexity", "lower_better", "rescale_entropy"),
    "accuracy_diff": MetricInfo("fairness", None, "lower_better", "one_minus_raw"),
    "precision_diff": MetricInfo("fairness", None, "lower_better", "one_minus_raw"),
    "tpr_diff": MetricInfo("fairness", None, "lower_better", "one_minus_raw"),
    "fpr_diff": MetricInfo("fairness", None, "lower_better", "one_minus_raw"),
    "demographic_parity_diff": MetricInfo("fairness", None, "lower_better", "one_minus_raw", False),
    "equalized_odds_diff": MetricInfo("fairness", None, "lower_better", "one_minus_raw", False),
    "parameter_count": MetricInfo("sustainability", None, "lower_better", "max_norm_invert"),
    "flops": MetricInfo("sustainability", None, "lower_better", "max_norm_invert"),
    "macs": MetricInfo("sustainability", None, "lower_better", "max_norm_invert"),
    "kg_co2e": MetricInfo("sustainability", None, "lower_better", "max_norm_invert"),
    "fgsm_accuracy_gap": MetricInfo("robustness", None, "lower_better", "one_minus_raw"),
    "clever_u": MetricInfo("robustness", None, "higher_better", "ratio_of_radius"),
    "loss_sensitivity": MetricInfo("robustness", None, "lower_better", "max_norm_invert"),
}


@dataclass
class MetricRecord:
    name: str
    dimension: str
    raw: float
    norm_rule: str
    direction: str = "higher_better"
    category: str | None = None
    in_dimension_mean: bool = True
    rule_param: float | None = None  # radius for ratio_of_radius, d for rescale_entropy
    normalized: float | None = None
    std: float = 0.0
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ConfigurationError(f"metric {self.name!r}: unknown dimension {self.dimension!r}")
        if self.norm_rule not in NORM_RULES:
            raise ConfigurationError(f"metric {self.name!r}: unknown norm rule {self.norm_rule!r}")
        if self.direction not in ("higher_better", "lower_better"):
            raise ConfigurationError(f"metric {self.name!r}: unknown direction {self.direction!r}")
        if self.direction == "lower_better" and self.norm_rule not in INVERTING_RULES:
            raise ConfigurationError(f"metric {self.name!r} is lower-is-better but {self.norm_rule} does not invert")
        if self.dimension == "explainability" and self.category not in CATEGORIES:
            raise ConfigurationError(f"explainability metric {self.name!r} needs a category in {CATEGORIES}")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "dimension": self.dimension, "category": self.category,
            "raw": self.raw, "std": self.std, "direction": self.direction,
            "norm_rule": self.norm_rule, "rule_param": self.rule_param,
            "normalized": self.normalized, "in_dimension_mean": self.in_dimension_mean,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricRecord":
        return cls(**{k: d[k] for k in ("name", "dimension", "raw", "norm_rule", "direction", "category",
                                         "in_dimension_mean", "rule_param", "normalized", "std", "flags")
                      if k in d})


def record(name: str, raw: float, rule_param: float | None = None,
           include_supplements: bool = False) -> MetricRecord:
    """Builds a record for a catalogued metric."""
    info = CATALOG[name]
    in_mean = info.in_dimension_mean or (include_supplements and name in SUPPLEMENTARY_FAIRNESS)
    return MetricRecord(name, info.dimension, float(raw), info.norm_rule, info.direction,
                        info.category, in_mean, rule_param)


def _check_domain(rec: MetricRecord, lo: float, hi: float) -> float:
    raw = rec.raw
    if not math.isfinite(raw) or raw < lo - _DOMAIN_TOL or raw > hi + _DOMAIN_TOL:
        raise NormalizationError(
            f"metric {rec.name!r}: raw value {raw!r} outside [{lo}, {hi}] for rule {rec.norm_rule}")
    return min(max(raw, lo), hi)


def normalize(rec: MetricRecord, pool: Sequence[float] | None = None) -> float:
    """Maps a raw value to [0, 1] with 1 as the ideal."""
    rule = rec.norm_rule
    if rule == "identity_clamp":
        return _check_domain(rec, 0.0, 1.0)
    if rule == "one_minus_raw":
        return 1.0 - _check_domain(rec, 0.0, 1.0)
    if rule == "rescale_correlation":
        return (_check_domain(rec, -1.0, 1.0) + 1.0) / 2.0
    if rule == "ratio_of_radius":
        if not rec.rule_param or rec.rule_param <= 0:
            raise NormalizationError(f"metric {rec.name!r}: ratio_of_radius needs a positive radius")
        return _check_domain(rec, 0.0, rec.rule_param) / rec.rule_param
    if rule == "rescale_entropy":
        d = rec.rule_param
        if d is None or d < 1:
            raise NormalizationError(f"metric {rec.name!r}: rescale_entropy needs the feature count")
        if d == 1:
            return 1.0
        h_max = math.log(d)
        return 1.0 - _check_domain(rec, 0.0, h_max) / h_max
    if rule == "max_norm_invert":
        values = [rec.raw] if pool is None else list(pool)
        if rec.raw not in values:
            values.append(rec.raw)
        try:
            scores, _ = max_norm_invert(values)
        except NormalizationError as exc:
            raise NormalizationError(f"metric {rec.name!r}: {exc}") from None
        return float(scores[values.index(rec.raw)])
    raise NormalizationError(f"unknown rule {rule!r}")


def normalize_records(records: Iterable[MetricRecord],
                      pools: Mapping[str, Sequence[float]] | None = None) -> list[MetricRecord]:
    pools = pools or {}
    out = []
    for rec in records:
        if rec.norm_rule in POOLED_RULES and rec.name not in pools:
            raise NormalizationError(f"metric {rec.name!r} needs a comparison pool")
        out.append(replace(rec, normalized=normalize(rec, pools.get(rec.name)), flags=list(rec.flags)))
    return out


def category_scores(records: Iterable[MetricRecord]) -> dict[str, float]:
    groups: dict[str, list[float]] = {}
    for rec in records:
        if rec.dimension == "explainability" and rec.in_dimension_mean:
            groups.setdefault(rec.category, []).append(_normalized(rec))
    return {c: float(np.mean(groups[c])) for c in CATEGORIES if c in groups}


def _normalized(rec: MetricRecord) -> float:
    if rec.normalized is None:
        raise AggregationError(f"metric {rec.name!r} has not been normalized")
    return rec.normalized


def dimension_score(records: Iterable[MetricRecord]) -> float:
    """Unweighted mean of the in-mean records; explainability averages category means."""
    records = [r for r in records if r.in_dimension_mean]
    if not records:
        raise AggregationError("dimension has no records that enter the mean")
    dims = {r.dimension for r in records}
    if len(dims) != 1:
        raise AggregationError(f"records span several dimensions: {sorted(dims)}")
    if dims == {"explainability"}:
        return float(np.mean(list(category_scores(records).values())))
    return float(np.mean([_normalized(r) for r in records]))


def check_weights(weights: Sequence[float] | None) -> np.ndarray:
    if weights is None:
        return np.full(len(DIMENSIONS), 1.0 / len(DIMENSIONS))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(DIMENSIONS),) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigurationError(f"weights must be 4 nonnegative numbers, got {weights!r}")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"weights must sum to 1, got {w.sum()!r}")
    return w


def responsibility_score(ds: Mapping[str, float] | Sequence[float],
                         weights: Sequence[float] | None = None) -> float:
    """Weighted mean of the dimension scores (uniform by default).

    Dimensions carrying zero weight may be absent from a mapping.
    """
    w = check_weights(weights)
    if not isinstance(ds, Mapping):
        ds = dict(zip(DIMENSIONS, ds))
        if len(ds) != len(DIMENSIONS):
            raise AggregationError("need four dimension scores")
    total = 0.0
    for dim, wi in zip(DIMENSIONS, w):
        if dim not in ds:
            if wi > 0:
                raise AggregationError(f"missing dimension score {dim!r}")
            continue
        total += wi * ds[dim]
    return float(total)


@dataclass
class ResponsibilityProfile:
    per_metric: list[MetricRecord]
    f1: float | None = None
    f1_std: float = 0.0
    repeats: int = 1
    aggregation: str = "mean_over_repeats"
    dimension_scores: dict[str, float] | None = None
    category_scores: dict[str, float] | None = None
    responsibility_score: float | None = None

    def metric(self, name: str) -> MetricRecord:
        for r in self.per_metric:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "dimension_scores": self.dimension_scores,
            "category_scores": self.category_scores,
            "responsibility_score": self.responsibility_score,
            "f1": self.f1, "f1_std": self.f1_std,
            "repeats": self.repeats, "aggregation": self.aggregation,
            "per_metric": [r.to_dict() for r in self.per_metric],
        }


def score_profile(profile: ResponsibilityProfile, pools: Mapping[str, Sequence[float]] | None = None,
                  weights: Sequence[float] | None = None) -> ResponsibilityProfile:
    """Normalizes every record and fills dimension, category and responsibility scores."""
    records = normalize_records(profile.per_metric, pools)
    ds = {}
    for dim in DIMENSIONS:
        members = [r for r in records if r.dimension == dim]
        if members:
            ds[dim] = dimension_score(members)
    return replace(profile, per_metric=records, dimension_scores=ds,
                   category_scores=category_scores(records),
                   responsibility_score=responsibility_score(ds, weights))


def aggregate_repeats(profiles: Sequence[ResponsibilityProfile]) -> ResponsibilityProfile:
    """Averages raw metric values over repeats (population stddev kept per metric).

    The result is unnormalized: pooling and scoring happen after aggregation.
    """
    if not profiles:
        raise AggregationError("aggregate_repeats needs at least one profile")
    names = [r.name for r in profiles[0].per_metric]
    for p in profiles[1:]:
        if sorted(r.name for r in p.per_metric) != sorted(names):
            raise AggregationError("profiles have mismatched metric sets")
    merged = []
    for name in names:
        recs = [p.metric(name) for p in profiles]
        raws = np.asarray([r.raw for r in recs], dtype=np.float64)
        flags = [f for r in recs for f in r.flags]
        merged.append(replace(recs[0], raw=float(raws.mean()), std=float(raws.std()),
                              normalized=None, flags=flags))
    f1s = [p.f1 for p in profiles if p.f1 is not None]
    return ResponsibilityProfile(
        per_metric=merged,
        f1=float(np.mean(f1s)) if f1s else None,
        f1_std=float(np.std(f1s)) if f1s else 0.0,
        repeats=sum(p.repeats for p in profiles),
    )


def build_pools(cells: Mapping[tuple[str, str], ResponsibilityProfile],
                scope: str = "global") -> dict[tuple[str, str], dict[str, list[float]]]:
    """Comparison pools for pooled rules: all cells, or cells sharing a dataset."""
    if scope not in ("global", "per_dataset"):
        raise ConfigurationError(f"unknown pool scope {scope!r}")
    pools = {}
    for key in cells:
        peers = [k for k in cells if scope == "global" or k[0] == key[0]]
        pools[key] = {
            rec.name: [cells[k].metric(rec.name).raw for k in peers]
            for rec in cells[key].per_metric if rec.norm_rule in POOLED_RULES
        }
    return pools
