"""Hypothesis-anchored explanation sessions.

A request names a patient record and a diagnostic hypothesis; the bundle
that comes back holds the record itself, similar cases supporting the
hypothesis, counterexamples for each of the two alternate classes and,
optionally, signed feature importance. Requests are seeded and replayable:
identical seeded requests produce byte-identical canonical bundles.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .counterfactual import (CandidateExample, CfConfig, DistanceProfile,
                             SearchResult, generate_counterexamples,
                             generate_similar_cases)
from .errors import RecordNotFoundError, RequestValidationError
from .gbdt import GbdtModel
from .schema import (ClassLabel, FeatureStats, LabeledDataset, Record,
                     make_record)
from .surrogate import (DEFAULT_KERNEL_WIDTH, DEFAULT_N_SAMPLES,
                        ImportanceVector, PerturbationConfig,
                        explain_importance)
from .util import canonical_json, derive_seed

MAX_COUNT = 10


def default_counts(hypothesis: ClassLabel) -> tuple[int, int]:
    """Per-class default explanation counts: fewer when euthyroid."""
    if ClassLabel(hypothesis) is ClassLabel.NEGATIVE:
        return (3, 3)
    return (5, 5)


@dataclass(frozen=True)
class EngineParams:
    """Knobs for the underlying explainers; defaults are production-sized."""

    population_size: int = 200
    generations: int = 50
    sparsity_pressure: float = 0.02
    immutable_features: frozenset = frozenset()
    n_samples: int = DEFAULT_N_SAMPLES
    kernel_width: float = DEFAULT_KERNEL_WIDTH


@dataclass(frozen=True)
class HypothesisRequest:
    hypothesis: ClassLabel
    record_id: str | None = None
    record: Record | None = None
    n_counterexamples_per_class: int | None = None
    n_similar_cases: int | None = None
    include_importance: bool = False
    seed: int | None = None
    repeat: bool = False

    def __post_init__(self):
        try:
            ClassLabel(self.hypothesis)
        except ValueError:
            raise RequestValidationError(
                "invalid_class", f"invalid hypothesis class: {self.hypothesis!r}") from None
        for label, count in (("n_counterexamples_per_class", self.n_counterexamples_per_class),
                             ("n_similar_cases", self.n_similar_cases)):
            if count is not None and not 0 <= count <= MAX_COUNT:
                raise RequestValidationError(
                    "invalid_count", f"{label} must be in [0, {MAX_COUNT}], got {count}")
        if self.record_id is None and self.record is None:
            raise RequestValidationError(
                "missing_record", "request needs a record_id or an inline record")

    def to_dict(self) -> dict:
        return {"record_id": self.record_id,
                "record": list(self.record.values) if self.record else None,
                "hypothesis": int(self.hypothesis),
                "n_counterexamples_per_class": self.n_counterexamples_per_class,
                "n_similar_cases": self.n_similar_cases,
                "include_importance": self.include_importance,
                "seed": self.seed, "repeat": self.repeat}


def parse_request(payload: dict, schema) -> HypothesisRequest:
    """Build a validated request from untrusted JSON-shaped input."""
    if not isinstance(payload, dict):
        raise RequestValidationError("invalid_request", "request body must be an object")
    try:
        hypothesis = ClassLabel.parse(payload["hypothesis"])
    except KeyError:
        raise RequestValidationError("invalid_class", "missing field: hypothesis") from None
    except ValueError as e:
        raise RequestValidationError("invalid_class", str(e)) from None
    record = None
    if payload.get("record") is not None:
        raw = payload["record"]
        try:
            if isinstance(raw, dict):
                values = [raw[name] for name in schema.feature_names]
            else:
                values = list(raw)
            record = make_record(schema, str(payload.get("record_id") or "inline"), values)
        except KeyError as e:
            raise RequestValidationError("invalid_record", f"missing feature: {e.args[0]}") from None
        except Exception as e:
            raise RequestValidationError("invalid_record", str(e)) from None

    def _count(name):
        v = payload.get(name)
        if v is None:
            return None
        if not isinstance(v, int) or isinstance(v, bool):
            raise RequestValidationError("invalid_count", f"{name} must be an integer")
        return v

    seed = payload.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise RequestValidationError("invalid_seed", "seed must be an integer")
    rid = payload.get("record_id")
    return HypothesisRequest(
        hypothesis=hypothesis,
        record_id=str(rid) if rid is not None else None,
        record=record,
        n_counterexamples_per_class=_count("n_counterexamples_per_class"),
        n_similar_cases=_count("n_similar_cases"),
        include_importance=bool(payload.get("include_importance", False)),
        seed=seed)


@dataclass(frozen=True)
class ExplanationBundle:
    record_id: str
    hypothesis: ClassLabel
    record: Record
    display_order: tuple[str, ...]
    similar_cases: tuple
    similar_cases_exhausted: bool
    counterexamples: dict              # alternate class index -> tuple of Counterexample
    counterexamples_exhausted: dict    # alternate class index -> bool
    importance: ImportanceVector | None
    n_similar_cases: int
    n_counterexamples_per_class: int
    model_fingerprint: str
    seed: int
    timing_ms: float

    def _example_dict(self, example: CandidateExample, schema) -> dict:
        by_name = dict(zip(schema.feature_names, example.candidate.values))
        d = example.to_dict()
        d["values"] = [{"name": n, "value": by_name[n]} for n in self.display_order]
        return d

    def to_dict(self, schema, include_timing: bool = True) -> dict:
        by_name = dict(zip(schema.feature_names, self.record.values))
        doc = {
            "record_id": self.record_id,
            "hypothesis": int(self.hypothesis),
            "hypothesis_name": ClassLabel(self.hypothesis).display_name,
            "display_order": list(self.display_order),
            "record_values": [{"name": n, "value": by_name[n]} for n in self.display_order],
            "n_similar_cases": self.n_similar_cases,
            "n_counterexamples_per_class": self.n_counterexamples_per_class,
            "similar_cases": [self._example_dict(e, schema) for e in self.similar_cases],
            "similar_cases_exhausted": self.similar_cases_exhausted,
            "counterexamples": {
                str(c): [self._example_dict(e, schema) for e in examples]
                for c, examples in sorted(self.counterexamples.items())},
            "counterexamples_exhausted": {
                str(c): flag for c, flag in sorted(self.counterexamples_exhausted.items())},
            "importance": (self.importance.to_dict(schema.feature_names)
                           if self.importance else None),
            "provenance": {"model_fingerprint": self.model_fingerprint,
                           "seed": self.seed},
        }
        if include_timing:
            doc["provenance"]["timing_ms"] = self.timing_ms
        return doc

    def canonical_json(self, schema) -> str:
        """Deterministic serialization: excludes volatile timing."""
        return canonical_json(self.to_dict(schema, include_timing=False))

    def sha256(self, schema) -> str:
        return hashlib.sha256(self.canonical_json(schema).encode()).hexdigest()


class SessionLog:
    """Append-only request/summary log; one JSON document per line."""

    def __init__(self, path: "str | Path | None" = None):
        self.path = Path(path) if path else None
        self._entries: list[dict] = []
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self._entries.append(json.loads(line))

    def append(self, request: HypothesisRequest, bundle: ExplanationBundle,
               schema) -> dict:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "request": request.to_dict(),
            "summary": {
                "record_id": bundle.record_id,
                "hypothesis": int(bundle.hypothesis),
                "seed": bundle.seed,
                "n_similar_cases": len(bundle.similar_cases),
                "n_counterexamples": {str(c): len(v) for c, v
                                      in sorted(bundle.counterexamples.items())},
                "similar_cases_exhausted": bundle.similar_cases_exhausted,
                "counterexamples_exhausted": {
                    str(c): f for c, f in sorted(bundle.counterexamples_exhausted.items())},
                "importance_included": bundle.importance is not None,
                "bundle_sha256": bundle.sha256(schema),
            },
        }
        with self._lock:
            self._entries.append(entry)
            if self.path:
                with open(self.path, "a") as fh:
                    fh.write(canonical_json(entry) + "\n")
        return entry

    def entries(self) -> list[dict]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


def _resolve_record(req: HypothesisRequest, data: LabeledDataset) -> Record:
    if req.record is not None:
        return req.record
    record = data.by_id(req.record_id)
    if record is None:
        raise RecordNotFoundError(req.record_id)
    return record


def handle_request(req: HypothesisRequest, model: GbdtModel,
                   data: LabeledDataset, stats: FeatureStats,
                   log: SessionLog | None = None,
                   params: EngineParams = EngineParams()) -> ExplanationBundle:
    """Run the three explainers for one hypothesis and assemble the bundle.

    Absent counts fall back to default_counts; the master seed (given or
    freshly drawn) is recorded in provenance and deterministically derives
    one child seed per explainer.
    """
    started = time.perf_counter()
    schema = data.schema
    model.check_schema(schema)
    record = _resolve_record(req, data)
    hypothesis = ClassLabel(req.hypothesis)
    d_cf, d_sc = default_counts(hypothesis)
    n_cf = req.n_counterexamples_per_class if req.n_counterexamples_per_class is not None else d_cf
    n_sc = req.n_similar_cases if req.n_similar_cases is not None else d_sc
    master_seed = req.seed if req.seed is not None else secrets.randbits(32)

    profile = DistanceProfile.from_stats(schema, stats,
                                         immutable_features=sorted(params.immutable_features))
    similar = generate_similar_cases(
        model, record, hypothesis, n_sc, profile, data,
        seed=derive_seed(master_seed, 0),
        population_size=params.population_size, generations=params.generations,
        sparsity_pressure=params.sparsity_pressure)

    counterexamples: dict[int, tuple] = {}
    exhausted: dict[int, bool] = {}
    for alt in sorted(set(int(c) for c in ClassLabel) - {int(hypothesis)}):
        config = CfConfig(target_class=ClassLabel(alt), k=n_cf,
                          population_size=params.population_size,
                          generations=params.generations,
                          sparsity_pressure=params.sparsity_pressure,
                          seed=derive_seed(master_seed, 1 + alt))
        result: SearchResult = generate_counterexamples(
            model, record, config, profile, data)
        counterexamples[alt] = tuple(result.items)
        exhausted[alt] = result.budget_exhausted

    importance = None
    if req.include_importance:
        importance = explain_importance(
            model, record, hypothesis, stats,
            PerturbationConfig(n_samples=params.n_samples,
                               kernel_width=params.kernel_width,
                               seed=derive_seed(master_seed, 4)))

    bundle = ExplanationBundle(
        record_id=record.id,
        hypothesis=hypothesis,
        record=record,
        display_order=tuple(schema.feature_names[i] for i in schema.display_order()),
        similar_cases=tuple(similar.items),
        similar_cases_exhausted=similar.budget_exhausted,
        counterexamples=counterexamples,
        counterexamples_exhausted=exhausted,
        importance=importance,
        n_similar_cases=n_sc,
        n_counterexamples_per_class=n_cf,
        model_fingerprint=model.fingerprint,
        seed=master_seed,
        timing_ms=(time.perf_counter() - started) * 1000.0)
    if log is not None:
        log.append(req, bundle, schema)
    return bundle


def investigate_another_hypothesis(previous: ExplanationBundle,
                                   new_hypothesis: ClassLabel) -> HypothesisRequest:
    """Pre-filled follow-up request: same record, new hypothesis, defaults."""
    new_hypothesis = ClassLabel(new_hypothesis)
    inline = previous.record if previous.record_id == "inline" else None
    n_cf, n_sc = default_counts(new_hypothesis)
    return HypothesisRequest(
        hypothesis=new_hypothesis,
        record_id=previous.record_id if inline is None else None,
        record=inline,
        n_counterexamples_per_class=n_cf,
        n_similar_cases=n_sc,
        include_importance=previous.importance is not None,
        repeat=new_hypothesis is ClassLabel(previous.hypothesis))


def replay_entry(entry: dict, model: GbdtModel, data: LabeledDataset,
                 stats: FeatureStats,
                 params: EngineParams = EngineParams()) -> ExplanationBundle:
    """Re-run a logged request with its recorded seed."""
    req_doc = dict(entry["request"])
    record = None
    if req_doc.get("record") is not None:
        record = make_record(data.schema, req_doc.get("record_id") or "inline",
                             req_doc["record"])
    req = HypothesisRequest(
        hypothesis=ClassLabel(req_doc["hypothesis"]),
        record_id=req_doc.get("record_id"),
        record=record,
        n_counterexamples_per_class=req_doc.get("n_counterexamples_per_class"),
        n_similar_cases=req_doc.get("n_similar_cases"),
        include_importance=req_doc.get("include_importance", False),
        seed=entry["summary"]["seed"])
    return handle_request(req, model, data, stats, log=None, params=params)
