from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rai_scoring.data import (DatasetSchema, TabularDataset, encode_and_standardize, generate_synthetic,
                              load_csv, split, write_csv)
from rai_scoring.errors import ParseError, SchemaError, StratificationError

SCHEMA = {
    "name": "toy",
    "columns": [
        {"name": "age", "kind": "numeric"},
        {"name": "sex", "kind": "categorical", "categories": ["M", "F"]},
        {"name": "y", "kind": "categorical", "categories": ["good", "bad"]},
    ],
    "label_column": "y", "positive_label": "good",
    "sensitive_column": "sex", "privileged_value": "M",
}


@pytest.fixture
def schema():
    return DatasetSchema.from_dict(SCHEMA)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path, schema):
    ds = load_csv(write(tmp_path, "age,sex,y\n30,M,good\n41,F,bad\n25,F,good\n"), schema)
    assert ds.n_rows == 3
    assert ds.columns["age"].tolist() == [30.0, 41.0, 25.0]
    assert ds.labels.tolist() == [1, 0, 1]
    assert ds.groups.tolist() == [1, 0, 0]
    assert ds.load_report.rows_kept == 3 and not ds.load_report.rejected


def test_load_header_only_is_empty_and_split_fails(tmp_path, schema):
    ds = load_csv(write(tmp_path, "age,sex,y\n"), schema)
    assert ds.n_rows == 0
    with pytest.raises(StratificationError):
        split(ds)


def test_unparseable_numeric_names_row_and_column(tmp_path, schema):
    with pytest.raises(ParseError) as exc:
        load_csv(write(tmp_path, "age,sex,y\n30,M,good\nabc,F,bad\n"), schema)
    assert exc.value.row == 2 and exc.value.column == "age"
    assert "row 2" in str(exc.value) and "'age'" in str(exc.value)


def test_missing_column_is_schema_error(tmp_path, schema):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "age,y\n30,good\n"), schema)


def test_rows_with_missing_or_unknown_values_rejected_and_counted(tmp_path, schema):
    text = "age,sex,y,extra\n30,M,good,1\n31,,bad,1\n32,F,,1\n?,F,bad,1\n33,X,good,1\n34,F,bad,1\n"
    ds = load_csv(write(tmp_path, text), schema)
    rep = ds.load_report
    assert ds.n_rows == 2 and rep.rows_read == 6
    assert rep.rejected == {"missing_sensitive": 1, "missing_label": 1, "missing_value": 1,
                            "unknown_category": 1}
    assert rep.ignored_columns == ["extra"]


def test_quoted_csv_cells(tmp_path):
    doc = dict(SCHEMA, columns=[*SCHEMA["columns"], {"name": "city", "kind": "categorical"}])
    ds = load_csv(write(tmp_path, 'age,sex,y,city\n1,M,good,"Erlangen, DE"\n2,F,bad,"x ""y"""\n'),
                  DatasetSchema.from_dict(doc))
    assert ds.columns["city"].tolist() == ["Erlangen, DE", 'x "y"']


def test_schema_requires_categorical_label(schema):
    doc = json.loads(json.dumps(SCHEMA))
    doc["columns"][2]["kind"] = "numeric"
    with pytest.raises(SchemaError):
        DatasetSchema.from_dict(doc)
    assert DatasetSchema.from_dict(schema.to_dict()) == schema


def test_sensitive_column_needs_two_values(tmp_path, schema):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "age,sex,y\n30,M,good\n41,M,bad\n"), schema)


def test_encoding_standardizes_with_population_std(tmp_path, schema):
    ds = load_csv(write(tmp_path, "age,sex,y\n0,M,good\n2,F,bad\n7,F,good\n"), schema)
    enc = encode_and_standardize(ds, [0, 1], [2])
    assert enc.feature_names == ("age", "sex=M", "sex=F")
    np.testing.assert_allclose(enc.X_train[:, 0], [-1.0, 1.0])
    np.testing.assert_allclose(enc.X_train[:, 1:], [[1, 0], [0, 1]])
    np.testing.assert_allclose(enc.X_test[0], [6.0, 0.0, 1.0])
    assert enc.group_test.tolist() == [0]


def test_constant_column_becomes_zeros_with_warning(tmp_path, schema):
    ds = load_csv(write(tmp_path, "age,sex,y\n5,M,good\n5,F,bad\n9,F,good\n"), schema)
    enc = encode_and_standardize(ds, [0, 1], [2])
    assert np.all(enc.X_train[:, 0] == 0) and np.all(enc.X_test[:, 0] == 0)
    assert any("constant" in w for w in enc.encoder_state.warnings)


def test_sensitive_feature_can_be_dropped():
    ds = generate_synthetic(100, seed=0)
    enc = encode_and_standardize(ds, *split(ds, seed=0), include_sensitive=False)
    assert not any(n.startswith("group=") for n in enc.feature_names)
    assert enc.group_test.size == len(enc.y_test)


def test_encoded_invariants_on_synthetic():
    ds = generate_synthetic(500, n_numeric=3, n_categorical=2, seed=4)
    enc = encode_and_standardize(ds, *split(ds, seed=1))
    num = [i for i, n in enumerate(enc.feature_names) if "=" not in n]
    np.testing.assert_allclose(enc.X_train[:, num].mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(enc.X_train[:, num].std(axis=0), 1, atol=1e-6)
    for col in ("c0", "c1", "group"):
        block = [i for i, n in enumerate(enc.feature_names) if n.startswith(col + "=")]
        assert np.all(enc.X_train[:, block].sum(axis=1) == 1.0)
        assert np.all(enc.X_test[:, block].sum(axis=1) == 1.0)


def test_encoder_uses_only_train_statistics():
    ds = generate_synthetic(200, seed=2)
    tr, te = split(ds, seed=0)
    a = encode_and_standardize(ds, tr, te)
    cols = dict(ds.columns)
    cols["x0"] = cols["x0"].copy()
    cols["x0"][te] += 1000.0
    b = encode_and_standardize(TabularDataset(ds.name, ds.schema, cols), tr, te)
    assert a.encoder_state == b.encoder_state
    assert np.array_equal(a.X_train, b.X_train)


def test_stratified_split_ten_rows():
    labels = np.array([1] * 5 + [0] * 5)
    tr, te = split(labels, 0.2, seed=0)
    assert len(te) == 2 and labels[te].sum() == 1


def test_split_deterministic_and_seed_sensitive():
    ds = generate_synthetic(1000, seed=0)
    a, b = split(ds, seed=3), split(ds, seed=3)
    assert np.array_equal(a[1], b[1])
    assert not np.array_equal(a[1], split(ds, seed=4)[1])


def test_split_rejects_tiny_classes():
    with pytest.raises(StratificationError):
        split(np.array([0, 0, 0, 0, 0, 1]))
    with pytest.raises(StratificationError):
        split(np.array([0, 1, 0, 1]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=5, max_size=80), st.floats(0.05, 0.95), st.integers(0, 99))
def test_split_is_a_partition(labels, frac, seed):
    labels = np.array(labels)
    if np.min(np.unique(labels, return_counts=True)[1]) < 2:
        return
    tr, te = split(labels, frac, seed)
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(len(labels)))
    assert len(te) == int(np.floor(frac * len(labels) + 0.5))


def test_synthetic_zero_bias_gap_small():
    ds = generate_synthetic(10_000, bias_strength=0.0, seed=11)
    y, g = ds.labels, ds.groups
    assert abs(y[g == 1].mean() - y[g == 0].mean()) < 0.05


def test_synthetic_bias_gap_matches_binomial():
    ds = generate_synthetic(10_000, bias_strength=0.3, seed=12)
    y, g = ds.labels, ds.groups
    assert abs((y[g == 1].mean() - y[g == 0].mean()) - 0.3) < 0.03


def test_synthetic_same_seed_identical(tmp_path):
    a, b = generate_synthetic(300, seed=5), generate_synthetic(300, seed=5)
    for k in a.columns:
        assert np.array_equal(a.columns[k], b.columns[k])
    write_csv(a, tmp_path / "s.csv")
    back = load_csv(tmp_path / "s.csv", a.schema)
    assert np.array_equal(back.columns["x1"], a.columns["x1"])
    assert np.array_equal(back.labels, a.labels)


@pytest.mark.parametrize("name", ["german_credit", "adult", "diabetes130"])
def test_shipped_schemas_parse(name):
    from importlib import resources
    doc = json.loads(resources.files("rai_scoring").joinpath(f"schemas/{name}.json").read_text())
    schema = DatasetSchema.from_dict(doc)
    assert schema.column(schema.label_column).categories
    assert schema.privileged_value in schema.column(schema.sensitive_column).categories
