"""Schema loading, ingestion, stats and split behavior."""


import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thyrolens import (ClassLabel, IngestError, LabeledDataset, RecordError,
                       SchemaError, compute_stats, ingest_csv, kfold_indices,
                       load_schema, make_record, stratified_split,
                       thyroid_schema, write_csv)
from thyrolens.schema import FEATURE_NAMES, THYROID_FEATURES

from conftest import record_with


def test_packaged_schema_shape(schema):
    assert len(schema.features) == 20
    assert schema.classes == ("Negative", "Hyperthyroid", "Hypothyroid")
    names_in_display_order = [schema.feature_names[i] for i in schema.display_order()]
    assert names_in_display_order[:3] == ["age", "sex", "TSH"]


def test_schema_defaults_without_priorities():
    doc = {"features": [{"name": n, "kind": k.value}
                        for n, k, _ in THYROID_FEATURES]}
    schema = load_schema(doc)
    order = [schema.feature_names[i] for i in schema.display_order()]
    assert order[:3] == ["age", "sex", "TSH"]
    assert all(f.mutable for f in schema.features)


def test_schema_missing_feature():
    doc = thyroid_schema().to_document()
    doc["features"] = [f for f in doc["features"] if f["name"] != "TSH"]
    with pytest.raises(SchemaError, match="missing feature: TSH"):
        load_schema(doc)


def test_schema_duplicate_feature():
    doc = thyroid_schema().to_document()
    dup = dict(doc["features"][0])
    dup["display_priority"] = 99
    doc["features"].append(dup)
    with pytest.raises(SchemaError, match="duplicate feature: age"):
        load_schema(doc)


def test_schema_unknown_kind():
    doc = thyroid_schema().to_document()
    doc["features"][0]["kind"] = "complex"
    with pytest.raises(SchemaError, match="unknown kind"):
        load_schema(doc)


def test_class_label_parse():
    assert ClassLabel.parse("negative") is ClassLabel.NEGATIVE
    assert ClassLabel.parse("Hypothyroid") is ClassLabel.HYPOTHYROID
    assert ClassLabel.parse(1) is ClassLabel.HYPERTHYROID
    with pytest.raises(ValueError):
        ClassLabel.parse("euthyroidish")


def test_ingest_packaged_dataset(thyroid_data):
    report = thyroid_data.ingest_report
    assert len(thyroid_data) == 7142
    assert report.class_counts == (6385, 582, 175)
    assert report.rows_dropped == 430


def _write_rows(path, rows):
    header = ",".join(list(FEATURE_NAMES) + ["diagnosis"])
    path.write_text("\n".join([header] + rows) + "\n")


def _row(label="negative", **overrides):
    values = {"age": "50", "sex": "1", "on_thyroxine": "0",
              "on_antithyroid_meds": "0", "sick": "0", "pregnant": "0",
              "thyroid_surgery": "0", "I131_treatment": "0",
              "query_hypothyroid": "0", "query_hyperthyroid": "0",
              "lithium": "0", "goitre": "0", "tumor": "0",
              "hypopituitary": "0.0", "psych": "0", "TSH": "2.0", "T3": "2.0",
              "TT4": "100.0", "T4U": "1.0", "FTI": "100.0"}
    values.update(overrides)
    return ",".join([values[n] for n in FEATURE_NAMES] + [label])


def test_ingest_drops_missing_rows(tmp_path, schema):
    rows = [_row() for _ in range(7)]
    rows += [_row(TSH="?"), _row(age=""), _row(T3="?")]
    path = tmp_path / "fixture.csv"
    _write_rows(path, rows)
    data = ingest_csv(path, schema)
    assert len(data) == 7
    assert data.ingest_report.rows_read == 10
    assert data.ingest_report.rows_dropped == 3


def test_ingest_empty_file(tmp_path, schema):
    path = tmp_path / "empty.csv"
    _write_rows(path, [])
    data = ingest_csv(path, schema)
    assert len(data) == 0
    assert data.ingest_report.rows_read == 0


def test_ingest_header_mismatch(tmp_path, schema):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(IngestError, match="header mismatch"):
        ingest_csv(path, schema)


def test_ingest_unparseable_value_names_row_and_column(tmp_path, schema):
    path = tmp_path / "bad.csv"
    _write_rows(path, [_row(), _row(TSH="high")])
    with pytest.raises(IngestError, match=r"row 1, column 'TSH'"):
        ingest_csv(path, schema)


def test_ingest_unknown_target(tmp_path, schema):
    path = tmp_path / "bad.csv"
    _write_rows(path, [_row(label="cured")])
    with pytest.raises(IngestError, match="unknown target label"):
        ingest_csv(path, schema)


def test_ingest_unreadable_file(schema):
    with pytest.raises(IngestError, match="cannot read"):
        ingest_csv("/nonexistent/nope.csv", schema)


def test_integer_target_labels(tmp_path, schema):
    path = tmp_path / "ints.csv"
    _write_rows(path, [_row(label="0"), _row(label="1"), _row(label="2")])
    data = ingest_csv(path, schema)
    assert [int(l) for l in data.labels] == [0, 1, 2]


def test_roundtrip_write_then_ingest(tmp_path, tiny_data, schema):
    path = tmp_path / "roundtrip.csv"
    write_csv(tiny_data, path)
    again = ingest_csv(path, schema)
    assert [r.id for r in again.records] == [r.id for r in tiny_data.records]
    assert [r.values for r in again.records] == [r.values for r in tiny_data.records]
    assert again.labels == tiny_data.labels


def test_record_validation(schema):
    with pytest.raises(RecordError, match="boolean"):
        record_with(schema, sex=2)
    with pytest.raises(RecordError, match="non-negative"):
        record_with(schema, age=-4)
    with pytest.raises(RecordError, match="lab value"):
        record_with(schema, TSH=-0.2)
    with pytest.raises(RecordError, match="expected 20 values"):
        make_record(schema, "x", [1, 2, 3])


def test_compute_stats_fixture(schema):
    records = [record_with(schema, f"r{i}", TSH=v, goitre=1)
               for i, v in enumerate((0.1, 1.3, 8.0))]
    data = LabeledDataset(schema=schema, records=records,
                          labels=[ClassLabel.NEGATIVE] * 3)
    stats = compute_stats(data)
    tsh = stats.for_feature("TSH")
    assert tsh["min"] == pytest.approx(0.1)
    assert tsh["max"] == pytest.approx(8.0)
    assert tsh["median"] == pytest.approx(1.3)
    # constant column
    t3 = stats.for_feature("T3")
    assert t3["std"] == 0.0 and t3["min"] == t3["max"]
    # all-ones boolean
    assert stats.for_feature("goitre")["frequency"] == 1.0
    assert np.all(stats.mins <= stats.medians) and np.all(stats.medians <= stats.maxs)


def test_compute_stats_empty(schema):
    empty = LabeledDataset(schema=schema, records=[], labels=[])
    with pytest.raises(RecordError):
        compute_stats(empty)


def test_stratified_split_thyroid(thyroid_data):
    train_set, test_set = stratified_split(thyroid_data, 0.2, seed=3)
    assert len(train_set) + len(test_set) == len(thyroid_data)
    assert abs(len(test_set) - 1428) <= 2
    hypo_test = int((test_set.label_array() == 2).sum())
    assert abs(hypo_test - 35) <= 1
    train_ids = {r.id for r in train_set.records}
    test_ids = {r.id for r in test_set.records}
    assert not train_ids & test_ids
    assert len(train_ids | test_ids) == len(thyroid_data)


def test_stratified_split_deterministic(tiny_data):
    a = stratified_split(tiny_data, 0.2, seed=5)
    b = stratified_split(tiny_data, 0.2, seed=5)
    assert [r.id for r in a[1].records] == [r.id for r in b[1].records]


def test_stratified_split_single_record_class(schema):
    records = [record_with(schema, "a"), record_with(schema, "b"),
               record_with(schema, "c")]
    data = LabeledDataset(schema=schema, records=records,
                          labels=[ClassLabel.NEGATIVE, ClassLabel.NEGATIVE,
                                  ClassLabel.HYPOTHYROID])
    with pytest.raises(ValueError, match="at least 2"):
        stratified_split(data, 0.2, seed=0)


def test_kfold_thyroid_partition(thyroid_data):
    folds = kfold_indices(thyroid_data, 10, seed=2)
    sizes = sorted(len(val) for _, val in folds)
    assert set(sizes) <= {714, 715}
    all_val = np.concatenate([val for _, val in folds])
    assert len(all_val) == len(thyroid_data)
    assert len(np.unique(all_val)) == len(thyroid_data)
    for train_idx, val_idx in folds:
        assert not set(train_idx.tolist()) & set(val_idx.tolist())


def test_kfold_minimal(schema):
    records = [record_with(schema, f"r{i}") for i in range(6)]
    labels = [ClassLabel(i % 3) for i in range(6)]
    data = LabeledDataset(schema=schema, records=records, labels=labels)
    folds = kfold_indices(data, 2, seed=0)
    assert len(folds) == 2
    assert sorted(np.concatenate([v for _, v in folds]).tolist()) == list(range(6))


def test_kfold_class_too_small(tiny_data):
    with pytest.raises(ValueError, match="fewer than k"):
        kfold_indices(tiny_data, 50, seed=0)


def test_kfold_deterministic(tiny_data):
    a = kfold_indices(tiny_data, 4, seed=9)
    b = kfold_indices(tiny_data, 4, seed=9)
    for (ta, va), (tb, vb) in zip(a, b):
        assert np.array_equal(va, vb) and np.array_equal(ta, tb)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 94), st.integers(0, 2),
                          st.floats(0.01, 50, allow_nan=False)),
                min_size=1, max_size=12))
def test_roundtrip_property(tmp_path_factory, values):
    schema = thyroid_schema()
    records, labels = [], []
    for i, (age, label, tsh) in enumerate(values):
        records.append(record_with(schema, f"r{i}", age=age, TSH=round(tsh, 4)))
        labels.append(ClassLabel(label))
    data = LabeledDataset(schema=schema, records=records, labels=labels)
    path = tmp_path_factory.mktemp("rt") / "data.csv"
    write_csv(data, path)
    again = ingest_csv(path, schema)
    assert [r.values for r in again.records] == [r.values for r in data.records]
    assert again.labels == data.labels
