"""End-to-end evaluation: split, encode, train, measure, aggregate, score."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from ._stats import classification_f1
from .data import DatasetSchema, TabularDataset, encode_and_standardize, generate_synthetic, load_csv, split
from .errors import ConfigurationError, RaiError
from .explainability import ExplainConfig, explainability_report
from .fairness import GroupedPredictions, fairness_report
from .model import ModelSpec, TrainConfig, cost_profile, train
from .robustness import AttackConfig, robustness_report
from .scoring import (ResponsibilityProfile, aggregate_repeats, build_pools, check_weights, record,
                      score_profile)
from .sustainability import EmissionContext, SustainabilityReport, estimate_co2e, training_seconds

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
MODEL_LABELS = {"mlp": "MLP", "tab_resnet": "TabResNet"}


@dataclass(frozen=True)
class DatasetSource:
    schema: str | None = None
    csv: str | None = None
    synthetic: dict | None = None

    def load(self) -> TabularDataset:
        if self.synthetic is not None:
            return generate_synthetic(**self.synthetic)
        if not (self.schema and self.csv):
            raise ConfigurationError("dataset entries need 'schema' and 'csv', or 'synthetic'")
        return load_csv(self.csv, DatasetSchema.from_json(self.schema))


@dataclass(frozen=True)
class ModelEntry:
    architecture: str
    name: str | None = None
    hidden_dims: tuple[int, ...] | None = None
    dropout_rates: tuple[float, ...] | None = None
    block_hidden_dim: int | None = None

    @property
    def label(self) -> str:
        return self.name or MODEL_LABELS.get(self.architecture, self.architecture)

    def spec(self, input_dim: int, n_classes: int = 2) -> ModelSpec:
        base = ModelSpec.default(self.architecture, input_dim, n_classes)
        return ModelSpec(
            self.architecture, input_dim,
            tuple(self.hidden_dims) if self.hidden_dims is not None else base.hidden_dims,
            n_classes,
            dropout_rates=tuple(self.dropout_rates) if self.dropout_rates is not None else base.dropout_rates,
            block_hidden_dim=self.block_hidden_dim,
        )


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[DatasetSource, ...]
    models: tuple[ModelEntry, ...]
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    test_fraction: float = 0.2
    train: TrainConfig = TrainConfig()
    attack: AttackConfig = AttackConfig()
    emission: EmissionContext = EmissionContext()
    shap: ExplainConfig = ExplainConfig()
    weights: tuple[float, ...] | None = None
    fairness_include_supplements: bool = False
    include_sensitive_feature: bool = True
    pool_scope: str = "global"
    clock: str = "modeled"
    output_dir: str = "rai_output"
    workers: int = 1
    formats: tuple[str, ...] = ("json", "markdown", "radar_svg")
    store_attributions: bool = True
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.datasets:
            raise ConfigurationError("config lists no datasets")
        if not self.models:
            raise ConfigurationError("config lists no models")
        if not self.seeds:
            raise ConfigurationError("config lists no seeds")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError("split.test_fraction must lie in (0, 1)")
        if self.pool_scope not in ("global", "per_dataset"):
            raise ConfigurationError(f"unknown pool_scope {self.pool_scope!r}")
        if self.clock not in ("modeled", "measured"):
            raise ConfigurationError(f"unknown clock {self.clock!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        check_weights(self.weights)
        labels = [m.label for m in self.models]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"model labels must be unique, got {labels}")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None, env=None) -> "RunConfig":
        env = os.environ if env is None else env
        base = Path(base_dir) if base_dir else Path(".")

        def resolve(p):
            return None if p is None else str(p if Path(p).is_absolute() else base / p)

        def sub(klass, key):
            raw = doc.get(key) or {}
            names = {f.name for f in fields(klass)}
            bad = set(raw) - names
            if bad:
                raise ConfigurationError(f"unknown keys in {key!r}: {sorted(bad)}")
            return klass(**raw)

        try:
            datasets = tuple(
                DatasetSource(resolve(d.get("schema")), resolve(d.get("csv")), d.get("synthetic"))
                for d in doc.get("datasets", [])
            )
            models = tuple(ModelEntry(**m) for m in doc.get("models", []))
            output_dir = env.get("RAI_OUTPUT_DIR") or resolve(doc.get("output_dir", "rai_output"))
            workers = int(env.get("RAI_WORKERS") or doc.get("workers", 1))
            return cls(
                datasets=datasets, models=models,
                seeds=tuple(int(s) for s in doc.get("seeds", (0, 1, 2, 3, 4))),
                test_fraction=float((doc.get("split") or {}).get("test_fraction", 0.2)),
                train=sub(TrainConfig, "train"), attack=sub(AttackConfig, "attack"),
                emission=sub(EmissionContext, "emission"), shap=sub(ExplainConfig, "shap"),
                weights=tuple(doc["weights"]) if doc.get("weights") is not None else None,
                fairness_include_supplements=bool(doc.get("fairness_include_supplements", False)),
                include_sensitive_feature=bool(doc.get("include_sensitive_feature", True)),
                pool_scope=doc.get("pool_scope", "global"),
                clock=doc.get("clock", "modeled"),
                output_dir=output_dir, workers=workers,
                formats=tuple(doc.get("formats", ("json", "markdown", "radar_svg"))),
                store_attributions=bool(doc.get("store_attributions", True)),
                source=doc,
            )
        except TypeError as exc:
            raise ConfigurationError(f"invalid config: {exc}") from None

    @classmethod
    def from_json(cls, path, env=None) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent, env=env)

    def with_seed_offset(self, offset: int) -> "RunConfig":
        from dataclasses import replace
        return replace(self, seeds=tuple(s + offset for s in self.seeds))

    def fingerprint(self) -> str:
        canon = {
            "datasets": [asdict(d) for d in self.datasets],
            "models": [asdict(m) for m in self.models],
            "seeds": list(self.seeds), "test_fraction": self.test_fraction,
            "train": asdict(self.train), "attack": asdict(self.attack),
            "emission": asdict(self.emission), "shap": asdict(self.shap),
            "weights": self.weights, "supplements": self.fairness_include_supplements,
            "include_sensitive_feature": self.include_sensitive_feature,
            "pool_scope": self.pool_scope, "clock": self.clock,
        }
        return hashlib.sha256(json.dumps(canon, sort_keys=True, default=str).encode()).hexdigest()


@dataclass
class JobResult:
    dataset: str
    model: str
    seed: int
    profile: ResponsibilityProfile | None = None
    details: dict | None = None
    attributions: dict | None = None
    error: str | None = None


def evaluate_seed(dataset: TabularDataset, entry: ModelEntry, seed: int, cfg: RunConfig) -> JobResult:
    """All 21 raw metrics for one (dataset, model, seed) job."""
    train_idx, test_idx = split(dataset, cfg.test_fraction, seed)
    enc = encode_and_standardize(dataset, train_idx, test_idx, cfg.include_sensitive_feature)
    spec = entry.spec(enc.X_train.shape[1])
    model = train(spec, enc.X_train, enc.y_train, cfg.train, seed)
    y_pred = model.predict(enc.X_test)
    f1 = classification_f1(enc.y_test, y_pred, spec.n_classes)

    fair = fairness_report(GroupedPredictions(enc.y_test, y_pred, enc.group_test))
    cost = cost_profile(spec)
    seconds = training_seconds(model.training_stats, cost, cfg.emission, cfg.clock)
    sust = SustainabilityReport(estimate_co2e(seconds, cfg.emission), seconds, cfg.clock, cost)
    attack = AttackConfig(**{**asdict(cfg.attack), "seed": cfg.attack.seed + seed})
    rob = robustness_report(model, enc.X_test, enc.y_test, attack)
    expl, attr, rows = explainability_report(model, enc.X_train, enc.X_test, cfg.shap, seed)

    supp = cfg.fairness_include_supplements
    recs = [record(name, value) for name, value in expl.raw_metrics().items() if name != "complexity"]
    recs.append(record("complexity", expl.complexity_entropy, rule_param=expl.n_features))
    recs += [record(name, value, include_supplements=supp) for name, value in fair.diffs().items()]
    recs += [
        record("parameter_count", cost.parameter_count),
        record("flops", cost.flops_per_forward),
        record("macs", cost.macs_per_forward),
        record("kg_co2e", sust.kg_co2e),
    ]
    gap = record("fgsm_accuracy_gap", max(rob.accuracy_gap, 0.0))
    if rob.accuracy_gap < 0:
        gap.flags.append(f"negative accuracy gap {rob.accuracy_gap!r} scored as 0")
    recs += [gap, record("clever_u", rob.clever_u_mean, rule_param=attack.clever_radius),
             record("loss_sensitivity", rob.loss_sensitivity)]

    details = {
        "seed": seed,
        "f1": f1,
        "training": {"epochs_run": model.training_stats.epochs_run,
                     "validation_f1": model.training_stats.final_f1,
                     "train_rows": model.training_stats.train_rows},
        "fairness": fair.to_dict(),
        "sustainability": {"kg_co2e": sust.kg_co2e, "training_seconds": sust.training_seconds,
                           "clock": sust.clock, "cost": asdict(cost)},
        "robustness": asdict(rob),
        "explainability": asdict(expl),
        "encoder_warnings": list(enc.encoder_state.warnings),
    }
    attributions = {
        "seed": seed, "feature_names": list(enc.feature_names),
        "test_rows": [int(i) for i in enc.test_indices[rows]],
        "base_value": attr.base_value, "target_class": attr.target_class,
        "values": attr.values.tolist(),
    }
    return JobResult(dataset.name, entry.label, seed, ResponsibilityProfile(recs, f1=f1), details, attributions)


def _job(args) -> JobResult:
    dataset, entry, seed, cfg = args
    with threadpool_limits(limits=1):
        try:
            return evaluate_seed(dataset, entry, seed, cfg)
        except RaiError as exc:
            return JobResult(dataset.name, entry.label, seed, error=f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # isolate unexpected failures to their cell
            logger.debug("job failed", exc_info=True)
            return JobResult(dataset.name, entry.label, seed,
                             error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def run(cfg: RunConfig, now: datetime | None = None) -> dict:
    """Runs every (dataset, model, seed) job and returns the report document."""
    datasets = []
    load_errors = {}
    for i, src in enumerate(cfg.datasets):
        try:
            datasets.append(src.load())
        except RaiError as exc:
            name = (src.synthetic or {}).get("name") or src.csv or f"dataset_{i}"
            load_errors[name] = f"{type(exc).__name__}: {exc}"
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"dataset names must be unique, got {names}")

    jobs = [(d, m, s, cfg) for d in datasets for m in cfg.models for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    keys = [(d.name, m.label) for d in datasets for m in cfg.models]
    by_cell: dict[tuple[str, str], list[JobResult]] = {k: [] for k in keys}
    for r in results:
        by_cell[(r.dataset, r.model)].append(r)

    aggregated = {}
    errors = {}
    for key, rs in by_cell.items():
        failed = [r for r in rs if r.error]
        if failed:
            errors[key] = "; ".join(f"seed {r.seed}: {r.error}" for r in failed)
            continue
        aggregated[key] = aggregate_repeats([r.profile for r in rs])

    pools = build_pools(aggregated, cfg.pool_scope)
    scored = {}
    for key, prof in aggregated.items():
        try:
            scored[key] = score_profile(prof, pools[key], cfg.weights)
        except RaiError as exc:
            errors[key] = f"{type(exc).__name__}: {exc}"

    cells = []
    for key in keys:
        rs = by_cell[key]
        prof = scored.get(key)
        cell = {
            "dataset": key[0], "model": key[1],
            "status": "ok" if prof is not None else "failed",
            "error": errors.get(key),
            "profile": prof.to_dict() if prof is not None else None,
            "repeats": [
                {**(r.details or {"seed": r.seed}),
                 "raw_metrics": {x.name: x.raw for x in r.profile.per_metric} if r.profile else None,
                 "error": r.error}
                for r in rs
            ],
        }
        if prof is not None:
            cell["explainability_category_scores"] = prof.category_scores
        if cfg.store_attributions and rs and rs[0].attributions is not None:
            cell["attributions"] = rs[0].attributions
        cells.append(cell)
    for name, err in load_errors.items():
        cells.append({"dataset": name, "model": None, "status": "failed", "error": err,
                      "profile": None, "repeats": []})

    now = now or datetime.now(timezone.utc)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "metadata": {
            "engine_version": __version__,
            "config_hash": cfg.fingerprint(),
            "timestamp": now.isoformat(),
            "clock": cfg.clock,
            "pool_scope": cfg.pool_scope,
            "seeds": list(cfg.seeds),
            "weights": list(check_weights(cfg.weights)),
            "fairness_include_supplements": cfg.fairness_include_supplements,
        },
        "cells": cells,
        "failed_cells": sum(1 for c in cells if c["status"] != "ok"),
    }


def rescore(report: dict, weights=None, pool_scope: str | None = None) -> dict[tuple[str, str], ResponsibilityProfile]:
    """Recomputes every cell's profile from the raw values stored in a report."""
    from .scoring import MetricRecord

    profiles = {}
    for cell in report["cells"]:
        prof = cell.get("profile")
        if not prof:
            continue
        recs = [MetricRecord.from_dict({**m, "normalized": None}) for m in prof["per_metric"]]
        profiles[(cell["dataset"], cell["model"])] = ResponsibilityProfile(recs, f1=prof.get("f1"))
    scope = pool_scope or report["metadata"].get("pool_scope", "global")
    pools = build_pools(profiles, scope)
    if weights is None:
        weights = report["metadata"].get("weights")
    return {k: score_profile(p, pools[k], weights) for k, p in profiles.items()}


def as_array(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)
