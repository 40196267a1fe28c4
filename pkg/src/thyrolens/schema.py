"""Thyroid feature system: schema, records, ingestion, stats and splits.

The feature system is fixed: 20 typed features (booleans, age, five lab
values) and a 3-class diagnosis label. Everything downstream (training,
perturbation, counterfactual search, the service) works against the
immutable objects defined here.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IngestError, RecordError, SchemaError
from .util import canonical_json


class FeatureKind(Enum):
    BOOLEAN = "boolean"
    INTEGER = "integer"
    REAL = "real"

    @classmethod
    def parse(cls, text: str) -> "FeatureKind":
        key = text.strip().lower()
        aliases = {"boolean": cls.BOOLEAN, "bool": cls.BOOLEAN,
                   "integer": cls.INTEGER, "int": cls.INTEGER,
                   "real": cls.REAL, "float": cls.REAL}
        if key not in aliases:
            raise SchemaError(f"unknown kind: {text}")
        return aliases[key]

    @property
    def is_continuous(self) -> bool:
        """Integers and reals perturb/measure on a continuous scale."""
        return self is not FeatureKind.BOOLEAN


class ClassLabel(IntEnum):
    """The three diagnosis classes, in fixed index order."""

    NEGATIVE = 0
    HYPERTHYROID = 1
    HYPOTHYROID = 2

    @property
    def display_name(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value: "int | str | ClassLabel") -> "ClassLabel":
        if isinstance(value, ClassLabel):
            return value
        if isinstance(value, bool):
            raise ValueError(f"invalid class label: {value!r}")
        if isinstance(value, int):
            return cls(value)
        key = str(value).strip().lower()
        for member in cls:
            if key in (member.name.lower(), str(member.value)):
                return member
        raise ValueError(f"invalid class label: {value!r}")


CLASS_NAMES = tuple(c.display_name for c in ClassLabel)

# Canonical feature table: (name, kind, description). Order matters; it is
# the column order of every dataset file and record vector.
THYROID_FEATURES: tuple[tuple[str, FeatureKind, str], ...] = (
    ("age", FeatureKind.INTEGER, "Age of the patient"),
    ("sex", FeatureKind.BOOLEAN, "Sex of the patient (1 = female, 0 = male)"),
    ("on_thyroxine", FeatureKind.BOOLEAN, "Whether patient is on thyroxine"),
    ("on_antithyroid_meds", FeatureKind.BOOLEAN, "Whether patient is on antithyroid meds"),
    ("sick", FeatureKind.BOOLEAN, "Whether patient is sick"),
    ("pregnant", FeatureKind.BOOLEAN, "Whether patient is pregnant"),
    ("thyroid_surgery", FeatureKind.BOOLEAN, "Whether patient has undergone thyroid surgery"),
    ("I131_treatment", FeatureKind.BOOLEAN, "Whether patient is undergoing I131 treatment"),
    ("query_hypothyroid", FeatureKind.BOOLEAN, "Patient believes they have hypothyroid"),
    ("query_hyperthyroid", FeatureKind.BOOLEAN, "Patient believes they have hyperthyroid"),
    ("lithium", FeatureKind.BOOLEAN, "Whether patient takes lithium"),
    ("goitre", FeatureKind.BOOLEAN, "Whether patient has goitre"),
    ("tumor", FeatureKind.BOOLEAN, "Whether patient has a tumor"),
    ("hypopituitary", FeatureKind.REAL, "Hypopituitary gland status"),
    ("psych", FeatureKind.BOOLEAN, "Whether patient has psych"),
    ("TSH", FeatureKind.REAL, "TSH level in blood from lab work"),
    ("T3", FeatureKind.REAL, "T3 level in blood from lab work"),
    ("TT4", FeatureKind.REAL, "TT4 level in blood from lab work"),
    ("T4U", FeatureKind.REAL, "T4U level in blood from lab work"),
    ("FTI", FeatureKind.REAL, "FTI level in blood from lab work"),
)

FEATURE_NAMES = tuple(name for name, _, _ in THYROID_FEATURES)
LAB_FEATURES = frozenset({"TSH", "T3", "TT4", "T4U", "FTI"})

# Clinicians read age and sex first, then TSH, then the rest in table order.
_PRIORITY_HEAD = ("age", "sex", "TSH")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: FeatureKind
    description: str = ""
    display_priority: int = 0
    mutable: bool = True


@dataclass(frozen=True)
class DatasetSchema:
    """The full feature system: 20 features plus the 3 diagnosis classes."""

    features: tuple[FeatureSpec, ...]
    classes: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        names = [f.name for f in self.features]
        for name in names:
            if names.count(name) > 1:
                raise SchemaError(f"duplicate feature: {name}")
        for required in FEATURE_NAMES:
            if required not in names:
                raise SchemaError(f"missing feature: {required}")
        if len(self.features) != len(FEATURE_NAMES):
            extra = sorted(set(names) - set(FEATURE_NAMES))
            raise SchemaError(f"unknown feature(s): {', '.join(extra)}")
        if tuple(self.classes) != CLASS_NAMES:
            raise SchemaError(f"classes must be {list(CLASS_NAMES)}, got {list(self.classes)}")
        priorities = [f.display_priority for f in self.features]
        if len(set(priorities)) != len(priorities):
            raise SchemaError("display_priority values must be unique")

    @property
    def n_features(self) -> int:
        return len(self.features)

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def display_order(self) -> list[int]:
        """Feature indices sorted by display priority (lowest first)."""
        return sorted(range(self.n_features),
                      key=lambda i: self.features[i].display_priority)

    def fingerprint(self) -> str:
        """Stable hash of the semantic identity (names, kinds, classes).

        Display priorities and mutability flags are presentation/policy and
        deliberately excluded: they do not invalidate a trained model.
        """
        payload = canonical_json({
            "features": [[f.name, f.kind.value] for f in self.features],
            "classes": list(self.classes),
        })
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_document(self) -> dict:
        return {
            "classes": list(self.classes),
            "features": [
                {"name": f.name, "kind": f.kind.value, "description": f.description,
                 "display_priority": f.display_priority, "mutable": f.mutable}
                for f in self.features
            ],
        }


def _default_priorities(names: Sequence[str]) -> dict[str, int]:
    ordered = list(_PRIORITY_HEAD) + [n for n in FEATURE_NAMES if n not in _PRIORITY_HEAD]
    return {name: ordered.index(name) for name in names if name in ordered}


def load_schema(source: "str | Path | dict") -> DatasetSchema:
    """Parse a schema document (JSON file or already-loaded dict).

    The document lists ``features`` (name/kind plus optional description,
    display_priority, mutable) and optionally ``classes``. Missing display
    priorities default to: age, sex, TSH first, then table order.
    """
    if isinstance(source, (str, Path)):
        try:
            doc = json.loads(Path(source).read_text())
        except OSError as e:
            raise SchemaError(f"cannot read schema document: {e}") from e
        except json.JSONDecodeError as e:
            raise SchemaError(f"schema document is not valid JSON: {e}") from e
    else:
        doc = source
    if not isinstance(doc, dict) or "features" not in doc:
        raise SchemaError("schema document must be an object with a 'features' list")

    defaults = _default_priorities(FEATURE_NAMES)
    taken = set()
    specs = []
    for i, entry in enumerate(doc["features"]):
        if "name" not in entry or "kind" not in entry:
            raise SchemaError(f"feature #{i} must have 'name' and 'kind'")
        name = str(entry["name"])
        kind = FeatureKind.parse(str(entry["kind"]))
        priority = entry.get("display_priority")
        if priority is None:
            priority = defaults.get(name, 100 + i)
        priority = int(priority)
        if priority in taken:
            raise SchemaError(f"duplicate display_priority {priority} (feature {name})")
        taken.add(priority)
        specs.append(FeatureSpec(
            name=name, kind=kind,
            description=str(entry.get("description", "")),
            display_priority=priority,
            mutable=bool(entry.get("mutable", True)),
        ))
    classes = tuple(doc.get("classes", CLASS_NAMES))
    return DatasetSchema(features=tuple(specs), classes=classes)


def thyroid_schema() -> DatasetSchema:
    """The canonical schema shipped with the package."""
    return load_schema(Path(__file__).parent / "thyroid_schema.json")


@dataclass(frozen=True)
class Record:
    """One patient row: an opaque id plus values in schema order."""

    id: str
    values: tuple

    def value(self, schema: DatasetSchema, name: str):
        return self.values[schema.index_of(name)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def _coerce_value(spec: FeatureSpec, raw) -> "int | float":
    if spec.kind is FeatureKind.BOOLEAN:
        iv = int(raw)
        if float(raw) != iv or iv not in (0, 1):
            raise RecordError(f"{spec.name}: boolean must be 0 or 1, got {raw!r}")
        return iv
    if spec.kind is FeatureKind.INTEGER:
        fv = float(raw)
        if not fv.is_integer():
            raise RecordError(f"{spec.name}: expected integer, got {raw!r}")
        iv = int(fv)
        if iv < 0:
            raise RecordError(f"{spec.name}: must be non-negative, got {raw!r}")
        return iv
    fv = float(raw)
    if not np.isfinite(fv):
        raise RecordError(f"{spec.name}: value must be finite, got {raw!r}")
    if spec.name in LAB_FEATURES and fv < 0:
        raise RecordError(f"{spec.name}: lab value must be non-negative, got {raw!r}")
    return fv


def make_record(schema: DatasetSchema, record_id: str, values: Iterable) -> Record:
    """Build a validated Record; raises RecordError on any invariant breach."""
    vals = list(values)
    if len(vals) != schema.n_features:
        raise RecordError(f"expected {schema.n_features} values, got {len(vals)}")
    coerced = tuple(_coerce_value(spec, v) for spec, v in zip(schema.features, vals))
    return Record(id=record_id, values=coerced)


def vector_to_record(schema: DatasetSchema, vec: np.ndarray, record_id: str) -> Record:
    """Convert an engine-internal float vector back to a typed Record."""
    vals = []
    for spec, v in zip(schema.features, vec):
        if spec.kind is FeatureKind.REAL:
            vals.append(float(v))
        else:
            vals.append(int(round(float(v))))
    return make_record(schema, record_id, vals)


@dataclass(frozen=True)
class IngestReport:
    rows_read: int
    rows_dropped: int
    class_counts: tuple[int, int, int]

    @property
    def rows_kept(self) -> int:
        return self.rows_read - self.rows_dropped

    @property
    def class_proportions(self) -> tuple[float, float, float]:
        total = sum(self.class_counts)
        if total == 0:
            return (0.0, 0.0, 0.0)
        return tuple(c / total for c in self.class_counts)

    def to_dict(self) -> dict:
        return {"rows_read": self.rows_read, "rows_dropped": self.rows_dropped,
                "rows_kept": self.rows_kept,
                "class_counts": list(self.class_counts),
                "class_proportions": [round(p, 6) for p in self.class_proportions]}


@dataclass
class LabeledDataset:
    """Immutable-after-construction dataset: records plus parallel labels."""

    schema: DatasetSchema
    records: list[Record]
    labels: list[ClassLabel]
    ingest_report: IngestReport | None = None
    _matrix: np.ndarray | None = field(default=None, repr=False)
    _by_id: dict[str, int] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.records) != len(self.labels):
            raise RecordError("records and labels must have equal length")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise RecordError("record ids must be unique")

    def __len__(self) -> int:
        return len(self.records)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            if self.records:
                m = np.array([r.values for r in self.records], dtype=np.float64)
            else:
                m = np.empty((0, self.schema.n_features), dtype=np.float64)
            object.__setattr__(self, "_matrix", m)
        return self._matrix

    def label_array(self) -> np.ndarray:
        return np.array([int(l) for l in self.labels], dtype=np.int64)

    def by_id(self, record_id: str) -> Record | None:
        if self._by_id is None:
            object.__setattr__(self, "_by_id",
                               {r.id: i for i, r in enumerate(self.records)})
        idx = self._by_id.get(record_id)
        return self.records[idx] if idx is not None else None

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset(
            schema=self.schema,
            records=[self.records[i] for i in indices],
            labels=[self.labels[i] for i in indices],
        )

    def class_counts(self) -> np.ndarray:
        counts = np.zeros(len(self.schema.classes), dtype=np.int64)
        for label in self.labels:
            counts[int(label)] += 1
        return counts


MISSING_MARKERS = frozenset({"", "?"})


def _parse_target(raw: str) -> ClassLabel:
    try:
        return ClassLabel.parse(raw)
    except ValueError:
        raise IngestError(f"unknown target label: {raw!r}") from None


def ingest_csv(path: "str | Path", schema: DatasetSchema,
               missing_policy: str = "drop_row") -> LabeledDataset:
    """Read a comma-delimited dataset file.

    The header must name the 20 features in schema order followed by one
    target column. Rows containing a missing marker ("" or "?") are dropped
    under the only supported policy, drop_row. The returned dataset carries
    an IngestReport (rows read/dropped, per-class counts).
    """
    if missing_policy != "drop_row":
        raise IngestError(f"unsupported missing policy: {missing_policy!r}")
    try:
        fh = open(path, "r", newline="")
    except OSError as e:
        raise IngestError(f"cannot read dataset file: {e}") from e

    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("dataset file has no header row") from None
        expected = list(schema.feature_names)
        if len(header) != len(expected) + 1 or header[:-1] != expected:
            raise IngestError(
                f"header mismatch: expected {expected + ['<target>']}, got {header}")

        records: list[Record] = []
        labels: list[ClassLabel] = []
        rows_read = 0
        rows_dropped = 0
        for row_idx, row in enumerate(reader):
            if not row:
                continue
            rows_read += 1
            if len(row) != len(expected) + 1:
                raise IngestError(f"row {row_idx}: expected {len(expected) + 1} "
                                  f"columns, got {len(row)}")
            if any(cell.strip() in MISSING_MARKERS for cell in row):
                rows_dropped += 1
                continue
            values = []
            for spec, cell in zip(schema.features, row):
                try:
                    values.append(_coerce_value(spec, cell.strip()))
                except (RecordError, ValueError) as e:
                    raise IngestError(
                        f"row {row_idx}, column {spec.name!r}: "
                        f"unparseable value {cell!r} ({e})") from None
            try:
                label = _parse_target(row[-1].strip())
            except IngestError as e:
                raise IngestError(f"row {row_idx}: {e}") from None
            records.append(Record(id=f"r{len(records)}", values=tuple(values)))
            labels.append(label)

    counts = [0, 0, 0]
    for label in labels:
        counts[int(label)] += 1
    report = IngestReport(rows_read=rows_read, rows_dropped=rows_dropped,
                          class_counts=tuple(counts))
    return LabeledDataset(schema=schema, records=records, labels=labels,
                          ingest_report=report)


def _format_value(spec: FeatureSpec, value) -> str:
    if spec.kind is FeatureKind.REAL:
        return repr(float(value))
    return str(int(value))


def write_csv(data: LabeledDataset, path: "str | Path",
              target_column: str = "diagnosis") -> None:
    """Serialize a dataset back to the file format (round-trips ingest_csv)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.schema.feature_names) + [target_column])
        for record, label in zip(data.records, data.labels):
            row = [_format_value(spec, v)
                   for spec, v in zip(data.schema.features, record.values)]
            row.append(label.display_name.lower())
            writer.writerow(row)


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature summary statistics computed from a training dataset.

    All arrays are parallel to schema feature order. ``frequencies`` is the
    rate of 1s and only meaningful for boolean features.
    """

    schema: DatasetSchema
    n_records: int
    mins: np.ndarray
    maxs: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    medians: np.ndarray
    mads: np.ndarray
    frequencies: np.ndarray

    def for_feature(self, name: str) -> dict:
        i = self.schema.index_of(name)
        return {"min": float(self.mins[i]), "max": float(self.maxs[i]),
                "mean": float(self.means[i]), "std": float(self.stds[i]),
                "median": float(self.medians[i]), "mad": float(self.mads[i]),
                "frequency": float(self.frequencies[i])}


def compute_stats(data: LabeledDataset) -> FeatureStats:
    """Column statistics used by perturbation sampling and distances."""
    if len(data) == 0:
        raise RecordError("cannot compute stats of an empty dataset")
    X = data.matrix()
    medians = np.median(X, axis=0)
    return FeatureStats(
        schema=data.schema,
        n_records=len(data),
        mins=X.min(axis=0),
        maxs=X.max(axis=0),
        means=X.mean(axis=0),
        stds=X.std(axis=0),
        medians=medians,
        mads=np.median(np.abs(X - medians), axis=0),
        frequencies=X.mean(axis=0),
    )


def _class_indices(data: LabeledDataset) -> list[np.ndarray]:
    y = data.label_array()
    return [np.flatnonzero(y == c) for c in range(len(data.schema.classes))]


def stratified_split(data: LabeledDataset, test_fraction: float,
                     seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Class-stratified train/test split, deterministic under seed."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0,1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for idx in _class_indices(data):
        if len(idx) < 2:
            raise ValueError("every class needs at least 2 records to split")
        shuffled = rng.permutation(idx)
        n_test = int(round(test_fraction * len(idx)))
        test_idx.extend(shuffled[:n_test].tolist())
    test_set = set(test_idx)
    train_idx = [i for i in range(len(data)) if i not in test_set]
    return data.subset(train_idx), data.subset(sorted(test_idx))


def kfold_indices(data: LabeledDataset, k: int,
                  seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold index pairs (train, validation).

    Validation sets partition the dataset; per-class remainders are dealt to
    the currently smallest folds so overall fold sizes differ by at most 1.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    per_class = _class_indices(data)
    for c, idx in enumerate(per_class):
        if len(idx) < k:
            raise ValueError(f"class {c} has {len(idx)} records, fewer than k={k}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for idx in per_class:
        shuffled = rng.permutation(idx)
        base, extra = divmod(len(shuffled), k)
        # smallest folds (ties broken by index) receive the remainder
        order = sorted(range(k), key=lambda f: (len(folds[f]), f))
        sizes = [base + (1 if rank < extra else 0)
                 for rank, _ in enumerate(order)]
        start = 0
        for rank, f in enumerate(order):
            folds[f].extend(shuffled[start:start + sizes[rank]].tolist())
            start += sizes[rank]
    all_idx = np.arange(len(data))
    out = []
    for f in range(k):
        val = np.array(sorted(folds[f]), dtype=np.int64)
        mask = np.ones(len(data), dtype=bool)
        mask[val] = False
        out.append((all_idx[mask], val))
    return out
