"""Tabular dataset ingestion, encoding, splitting and synthetic fixtures."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, SchemaError, StratificationError

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "nan", "NaN"})


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # "numeric" | "categorical"
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.categories is not None:
            object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))


@dataclass(frozen=True)
class DatasetSchema:
    name: str
    columns: tuple[ColumnSpec, ...]
    label_column: str
    positive_label: str
    sensitive_column: str
    privileged_value: str

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        for role in ("label_column", "sensitive_column"):
            col = getattr(self, role)
            if col not in names:
                raise SchemaError(f"{role} {col!r} is not a schema column")
            if self.column(col).kind != "categorical":
                raise SchemaError(f"{role} {col!r} must be categorical")

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column {name!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            cols = tuple(ColumnSpec(c["name"], c["kind"], c.get("categories")) for c in d["columns"])
            return cls(d["name"], cols, d["label_column"], str(d["positive_label"]),
                       d["sensitive_column"], str(d["privileged_value"]))
        except KeyError as exc:
            raise SchemaError(f"schema descriptor missing key {exc}") from None

    @classmethod
    def from_json(cls, path) -> "DatasetSchema":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read schema {path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "columns": [
                {"name": c.name, "kind": c.kind, **({"categories": list(c.categories)} if c.categories else {})}
                for c in self.columns
            ],
            "label_column": self.label_column,
            "positive_label": self.positive_label,
            "sensitive_column": self.sensitive_column,
            "privileged_value": self.privileged_value,
        }


@dataclass
class LoadReport:
    rows_read: int = 0
    rows_kept: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    ignored_columns: list[str] = field(default_factory=list)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1


@dataclass(frozen=True)
class TabularDataset:
    """Column-oriented table: numeric columns are float arrays, categoricals str arrays."""

    name: str
    schema: DatasetSchema
    columns: dict[str, np.ndarray]
    load_report: LoadReport | None = None

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise SchemaError("columns have unequal lengths")
        if self.n_rows and np.unique(self.columns[self.schema.sensitive_column]).size < 2:
            raise SchemaError(f"sensitive column {self.schema.sensitive_column!r} needs >= 2 observed values")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def labels(self) -> np.ndarray:
        return (self.columns[self.schema.label_column] == self.schema.positive_label).astype(int)

    @property
    def groups(self) -> np.ndarray:
        return (self.columns[self.schema.sensitive_column] == self.schema.privileged_value).astype(int)

    def rows(self) -> list[dict]:
        names = list(self.columns)
        return [dict(zip(names, vals)) for vals in zip(*(self.columns[n].tolist() for n in names))]


@dataclass(frozen=True)
class EncoderState:
    feature_names: tuple[str, ...]
    numeric: dict[str, tuple[float, float]]  # name -> (mean, scale); scale 0 marks a constant column
    categories: dict[str, tuple[str, ...]]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class EncodedSplit:
    X_train: np.ndarray
    X_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray
    group_train: np.ndarray
    group_test: np.ndarray
    feature_names: tuple[str, ...]
    encoder_state: EncoderState
    train_indices: np.ndarray
    test_indices: np.ndarray


def load_csv(path, schema: DatasetSchema) -> TabularDataset:
    """Reads a UTF-8 CSV with a header row into a typed dataset.

    Rows missing any value, or holding a category the schema does not
    declare, are dropped and counted in ``load_report.rejected``. A numeric
    cell that cannot be parsed raises :class:`ParseError` (rows numbered from
    1, header excluded).
    """
    report = LoadReport()
    values: dict[str, list] = {c.name: [] for c in schema.columns}
    declared = {c.name: set(c.categories) for c in schema.columns if c.categories}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read CSV {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c.name for c in schema.columns if c.name not in header]
        if missing:
            raise SchemaError(f"CSV {path} is missing schema columns {missing}")
        report.ignored_columns = [h for h in header if h not in values]
        for row_no, row in enumerate(reader, start=1):
            report.rows_read += 1
            parsed = {}
            reason = None
            for col in schema.columns:
                cell = (row.get(col.name) or "").strip()
                if cell in MISSING_TOKENS:
                    if col.name == schema.label_column:
                        reason = "missing_label"
                    elif col.name == schema.sensitive_column:
                        reason = "missing_sensitive"
                    else:
                        reason = reason or "missing_value"
                    continue
                if col.kind == "numeric":
                    try:
                        parsed[col.name] = float(cell)
                    except ValueError:
                        raise ParseError(f"row {row_no}, column {col.name!r}: cannot parse {cell!r} as a number",
                                         row=row_no, column=col.name) from None
                else:
                    if col.name in declared and cell not in declared[col.name]:
                        reason = reason or "unknown_category"
                    parsed[col.name] = cell
            if reason is not None:
                report.reject(reason)
                continue
            for name, v in parsed.items():
                values[name].append(v)
            report.rows_kept += 1
    if report.rejected:
        logger.warning("%s: rejected rows %s", schema.name, report.rejected)

    columns = {}
    cols = []
    for col in schema.columns:
        if col.kind == "numeric":
            columns[col.name] = np.asarray(values[col.name], dtype=np.float64)
            cols.append(col)
        else:
            columns[col.name] = np.asarray(values[col.name], dtype=str)
            cats = col.categories or tuple(sorted(set(values[col.name])))
            cols.append(ColumnSpec(col.name, col.kind, cats))
    schema = DatasetSchema(schema.name, tuple(cols), schema.label_column, schema.positive_label,
                           schema.sensitive_column, schema.privileged_value)
    return TabularDataset(schema.name, schema, columns, report)


def feature_columns(schema: DatasetSchema, include_sensitive: bool = True) -> list[ColumnSpec]:
    return [
        c for c in schema.columns
        if c.name != schema.label_column and (include_sensitive or c.name != schema.sensitive_column)
    ]


def fit_encoder(dataset: TabularDataset, train_indices, include_sensitive: bool = True) -> EncoderState:
    names: list[str] = []
    numeric = {}
    categories = {}
    warnings = []
    for col in feature_columns(dataset.schema, include_sensitive):
        if col.kind == "numeric":
            v = dataset.columns[col.name][train_indices]
            mean = float(v.mean()) if v.size else 0.0
            std = float(v.std()) if v.size else 0.0
            if std <= 1e-12 * max(1.0, abs(mean)):
                warnings.append(f"column {col.name!r} is constant on the training split; encoded as zeros")
                std = 0.0
            numeric[col.name] = (mean, std)
            names.append(col.name)
        else:
            cats = col.categories or tuple(sorted(set(dataset.columns[col.name].tolist())))
            categories[col.name] = cats
            names.extend(f"{col.name}={c}" for c in cats)
    return EncoderState(tuple(names), numeric, categories, tuple(warnings))


def apply_encoder(state: EncoderState, dataset: TabularDataset, indices) -> np.ndarray:
    indices = np.asarray(indices, dtype=int)
    blocks = []
    for col in dataset.schema.columns:
        if col.name in state.numeric:
            mean, std = state.numeric[col.name]
            v = dataset.columns[col.name][indices]
            blocks.append(((v - mean) / std if std > 0 else np.zeros(len(v)))[:, None])
        elif col.name in state.categories:
            cats = state.categories[col.name]
            v = dataset.columns[col.name][indices]
            onehot = (v[:, None] == np.asarray(cats, dtype=str)[None, :]).astype(np.float64)
            if np.any(onehot.sum(axis=1) != 1.0):
                raise InputError(f"column {col.name!r} holds a category outside {cats}")
            blocks.append(onehot)
    if not blocks:
        return np.zeros((len(indices), 0))
    return np.hstack(blocks)


def encode_and_standardize(dataset: TabularDataset, train_indices, test_indices,
                           include_sensitive: bool = True) -> EncodedSplit:
    """Standardises numerics with train-split statistics and one-hot encodes categoricals."""
    train_indices = np.asarray(train_indices, dtype=int)
    test_indices = np.asarray(test_indices, dtype=int)
    n = dataset.n_rows
    for idx in (train_indices, test_indices):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise InputError("split indices out of range")
    if np.intersect1d(train_indices, test_indices).size:
        raise InputError("train and test indices overlap")
    state = fit_encoder(dataset, train_indices, include_sensitive)
    for w in state.warnings:
        logger.warning(w)
    y, g = dataset.labels, dataset.groups
    return EncodedSplit(
        X_train=apply_encoder(state, dataset, train_indices),
        X_test=apply_encoder(state, dataset, test_indices),
        y_train=y[train_indices], y_test=y[test_indices],
        group_train=g[train_indices], group_test=g[test_indices],
        feature_names=state.feature_names, encoder_state=state,
        train_indices=train_indices, test_indices=test_indices,
    )


def split(dataset: TabularDataset | np.ndarray, test_fraction: float = 0.2, seed: int = 0):
    """Label-stratified split; ``|test| = round(test_fraction * n)``.

    Per-class test quotas use largest-remainder apportionment so the total is
    exact. Accepts a dataset or a plain label vector.
    """
    labels = dataset.labels if isinstance(dataset, TabularDataset) else np.asarray(dataset)
    n = len(labels)
    if n < 5:
        raise StratificationError(f"need at least 5 rows to split, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise InputError("test_fraction must lie in (0, 1)")
    classes, counts = np.unique(labels, return_counts=True)
    small = [str(c) for c, k in zip(classes, counts) if k < 2]
    if small:
        raise StratificationError(f"label classes {small} have fewer than 2 rows")
    n_test = int(np.floor(test_fraction * n + 0.5))
    exact = counts * n_test / n
    quota = np.floor(exact).astype(int)
    order = np.argsort(-(exact - quota), kind="stable")
    quota[order[: n_test - quota.sum()]] += 1

    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5B1]))
    test = []
    for c, q in zip(classes, quota):
        members = np.flatnonzero(labels == c)
        test.append(rng.permutation(members)[:q])
    test_idx = np.sort(np.concatenate(test))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def generate_synthetic(n_rows: int = 1000, n_numeric: int = 4, n_categorical: int = 2,
                       bias_strength: float = 0.2, seed: int = 0, name: str = "synthetic") -> TabularDataset:
    """Binary-label table with a binary sensitive attribute.

    Group membership is a fair coin; ``P(y=1 | group)`` is ``0.5 +/- bias_strength/2``
    so the expected base-rate gap equals ``bias_strength``. Features are drawn
    conditionally on the label, with decreasing signal per numeric column.
    """
    if n_rows < 10:
        raise InputError("generate_synthetic needs n_rows >= 10")
    if not -1.0 <= bias_strength <= 1.0:
        raise InputError("bias_strength must lie in [-1, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5E7]))
    priv = rng.random(n_rows) < 0.5
    p_pos = np.where(priv, 0.5 + bias_strength / 2, 0.5 - bias_strength / 2)
    y = rng.random(n_rows) < p_pos
    sign = np.where(y, 1.0, -1.0)

    columns: dict[str, np.ndarray] = {}
    specs = []
    for k in range(n_numeric):
        columns[f"x{k}"] = sign * 0.8 * 0.7 ** k + rng.normal(size=n_rows)
        specs.append(ColumnSpec(f"x{k}", "numeric"))
    cats = ("a", "b", "c")
    for k in range(n_categorical):
        u = rng.random(n_rows)
        p_a = np.where(y, 0.5, 0.2)
        p_b = 0.3
        columns[f"c{k}"] = np.where(u < p_a, "a", np.where(u < p_a + p_b, "b", "c")).astype(str)
        specs.append(ColumnSpec(f"c{k}", "categorical", cats))
    columns["group"] = np.where(priv, "priv", "unpriv").astype(str)
    specs.append(ColumnSpec("group", "categorical", ("priv", "unpriv")))
    columns["label"] = np.where(y, "1", "0").astype(str)
    specs.append(ColumnSpec("label", "categorical", ("0", "1")))
    schema = DatasetSchema(name, tuple(specs), "label", "1", "group", "priv")
    return TabularDataset(name, schema, columns)


def write_csv(dataset: TabularDataset, path) -> None:
    names = [c.name for c in dataset.schema.columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for vals in zip(*(dataset.columns[n].tolist() for n in names)):
            w.writerow([repr(v) if isinstance(v, float) else v for v in vals])
