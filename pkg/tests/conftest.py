"""Shared fixtures: the packaged dataset, trained models, small synthetic sets."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from thyrolens import (ClassLabel, LabeledDataset, Record, TrainConfig,
                       compute_stats, ingest_csv, make_record, thyroid_schema,
                       train, write_csv)

DATA_CSV = Path(__file__).resolve().parents[1] / "data" / "thyroid.csv"

BASE_VALUES = {
    "age": 50, "sex": 1, "on_thyroxine": 0, "on_antithyroid_meds": 0,
    "sick": 0, "pregnant": 0, "thyroid_surgery": 0, "I131_treatment": 0,
    "query_hypothyroid": 0, "query_hyperthyroid": 0, "lithium": 0,
    "goitre": 0, "tumor": 0, "hypopituitary": 0.0, "psych": 0,
    "TSH": 2.0, "T3": 2.0, "TT4": 100.0, "T4U": 1.0, "FTI": 100.0,
}


def record_with(schema, record_id="q", **overrides) -> Record:
    values = dict(BASE_VALUES, **overrides)
    return make_record(schema, record_id, [values[n] for n in schema.feature_names])


@pytest.fixture(scope="session")
def schema():
    return thyroid_schema()


@pytest.fixture(scope="session")
def thyroid_data(schema):
    return ingest_csv(DATA_CSV, schema)


@pytest.fixture(scope="session")
def thyroid_stats(thyroid_data):
    return compute_stats(thyroid_data)


@pytest.fixture(scope="session")
def thyroid_model(thyroid_data):
    return train(thyroid_data, TrainConfig(seed=7))


def separable_dataset(schema, n_per_class=40, seed=0) -> LabeledDataset:
    """Three cleanly separated clusters along TSH/T3/TT4."""
    rng = np.random.default_rng(seed)
    records, labels = [], []
    specs = {
        ClassLabel.NEGATIVE: {"TSH": (1.0, 3.0), "T3": (1.5, 2.5), "TT4": (90, 120)},
        ClassLabel.HYPERTHYROID: {"TSH": (0.01, 0.1), "T3": (5.0, 8.0), "TT4": (170, 240)},
        ClassLabel.HYPOTHYROID: {"TSH": (20.0, 60.0), "T3": (0.3, 1.0), "TT4": (20, 50)},
    }
    i = 0
    for label, ranges in specs.items():
        for _ in range(n_per_class):
            overrides = {k: round(float(rng.uniform(*v)), 3) for k, v in ranges.items()}
            overrides["age"] = int(rng.integers(20, 80))
            overrides["sex"] = int(rng.integers(0, 2))
            records.append(record_with(schema, f"s{i}", **overrides))
            labels.append(label)
            i += 1
    return LabeledDataset(schema=schema, records=records, labels=labels)


@pytest.fixture(scope="session")
def separable(schema):
    return separable_dataset(schema)


@pytest.fixture(scope="session")
def separable_model(separable):
    return train(separable, TrainConfig(n_rounds=20, max_depth=3,
                                        min_samples_leaf=2, seed=1))


@pytest.fixture(scope="session")
def tiny_csv(tmp_path_factory, thyroid_data):
    """Small but class-complete slice of the packaged dataset, as a file."""
    y = thyroid_data.label_array()
    idx = []
    for cls, want in ((0, 150), (1, 60), (2, 40)):
        idx.extend(np.flatnonzero(y == cls)[:want].tolist())
    subset = thyroid_data.subset(sorted(idx))
    path = tmp_path_factory.mktemp("data") / "tiny.csv"
    write_csv(subset, path)
    return path


@pytest.fixture(scope="session")
def tiny_data(tiny_csv, schema):
    return ingest_csv(tiny_csv, schema)
