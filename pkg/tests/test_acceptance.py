"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
complete. Seeds and tolerances are pinned here, not configurable.
"""

import time

import numpy as np
import pytest

from thyrolens import (CfConfig, ClassLabel, DistanceProfile, HypothesisRequest,
                       PerturbationConfig, TrainConfig, cross_validate,
                       default_counts, explain_importance,
                       generate_counterexamples, generate_similar_cases,
                       handle_request, ingest_csv, parse_request,
                       thyroid_schema)
from thyrolens.session import EngineParams
from thyrolens.toys import PROXIMITY_RATIO_LIMIT, SPARSITY_SLACK, bundled_toys, check_toy

from conftest import DATA_CSV, record_with

SEED_SUITE = (11, 23, 37, 53, 71)

# expected class mix: 89.4% / 8.15% / 2.45%
TARGET_PROPORTIONS = (0.894, 0.0815, 0.0245)
PROPORTION_TOL = 0.01     # one percentage point

SEARCH = dict(population_size=100, generations=25)


def _criterion(name: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def test_dataset_reproduction(schema):
    started = time.perf_counter()
    data = ingest_csv(DATA_CSV, schema)
    elapsed = time.perf_counter() - started
    props = data.ingest_report.class_proportions
    within = all(abs(p - expected) <= PROPORTION_TOL
                 for p, expected in zip(props, TARGET_PROPORTIONS))
    again = ingest_csv(DATA_CSV, schema)
    deterministic = again.ingest_report == data.ingest_report
    _criterion(
        "dataset reproduction",
        within and deterministic and elapsed < 5.0,
        f"counts={data.ingest_report.class_counts}, "
        f"proportions={tuple(round(p, 4) for p in props)}, "
        f"ingest={elapsed:.2f}s")


def test_model_benchmark(thyroid_data):
    started = time.perf_counter()
    accuracies, f1_gaps = [], []
    ok = True
    for seed in SEED_SUITE:
        cv = cross_validate(thyroid_data, TrainConfig(seed=seed), k=10, seed=seed)
        accuracies.append(cv.mean_accuracy)
        f1_gaps.append(cv.mean_f1[int(ClassLabel.NEGATIVE)]
                       - cv.mean_f1[int(ClassLabel.HYPOTHYROID)])
        ok &= cv.mean_accuracy >= 0.95
        ok &= cv.mean_f1[int(ClassLabel.HYPOTHYROID)] < cv.mean_f1[int(ClassLabel.NEGATIVE)]
    elapsed = time.perf_counter() - started
    _criterion(
        "model benchmark (10-fold CV, 5 seeds)",
        ok and elapsed < 600.0,
        f"mean accuracy per seed={[round(a, 4) for a in accuracies]}, "
        f"neg-hypo F1 gap={[round(g, 3) for g in f1_gaps]}, {elapsed:.0f}s")


def test_counterfactual_validity(thyroid_model, thyroid_data, thyroid_stats):
    profile = DistanceProfile.from_stats(thyroid_data.schema, thyroid_stats)
    rng = np.random.default_rng(404)
    rows = rng.integers(0, len(thyroid_data), size=200)
    targets = rng.integers(0, 3, size=200)
    n_cf = n_sc = 0
    cf_valid = sc_valid = True
    for i, (row, target) in enumerate(zip(rows, targets)):
        query = thyroid_data.records[int(row)]
        target = ClassLabel(int(target))
        config = CfConfig(target_class=target, k=2, seed=1000 + i, **SEARCH)
        result = generate_counterexamples(thyroid_model, query, config,
                                          profile, thyroid_data)
        for cf in result.items:
            n_cf += 1
            pred = thyroid_model.predict_class_matrix(cf.candidate.as_array()[None, :])[0]
            cf_valid &= int(pred) == int(target) == int(cf.predicted_class)
        cases = generate_similar_cases(thyroid_model, query, target, 2, profile,
                                       thyroid_data, seed=2000 + i, **SEARCH)
        for case in cases.items:
            n_sc += 1
            pred = thyroid_model.predict_class_matrix(case.candidate.as_array()[None, :])[0]
            sc_valid &= int(pred) == int(target) == int(case.predicted_class)
            sc_valid &= case.candidate.values != query.values
    _criterion(
        "counterfactual validity (200 pairs, zero tolerance)",
        cf_valid and sc_valid and n_cf > 0 and n_sc > 0,
        f"{n_cf} counterexamples, {n_sc} similar cases, all re-predicted")


def test_oracle_equivalence():
    started = time.perf_counter()
    rows = [check_toy(toy, seed, population_size=100, generations=30)
            for toy in bundled_toys() for seed in SEED_SUITE]
    elapsed = time.perf_counter() - started
    ok = all(r["ok"] for r in rows) and elapsed < 60.0
    worst = max((r.get("ratio", 0.0) for r in rows), default=0.0)
    _criterion(
        "oracle equivalence (5 toys x 5 seeds)",
        ok,
        f"worst proximity ratio={worst:.3f} (limit {PROXIMITY_RATIO_LIMIT}), "
        f"sparsity slack {SPARSITY_SLACK}, {elapsed:.0f}s")


def test_surrogate_sanity(schema, thyroid_stats, thyroid_data):
    i_tsh = schema.index_of("TSH")
    mean, std = thyroid_stats.means[i_tsh], thyroid_stats.stds[i_tsh]

    class LinearOracle:
        def predict_proba_matrix(self, X):
            p = 1.0 / (1.0 + np.exp(-3.0 * (np.asarray(X)[:, i_tsh] - mean) / std))
            out = np.zeros((len(p), 3))
            out[:, 1] = p
            out[:, 0] = 1.0 - p
            return out

    model = LinearOracle()
    rng = np.random.default_rng(7)
    anchors = rng.choice(len(thyroid_data), size=100, replace=False)
    top_hits = 0
    sign_agree = sign_total = 0
    for trial, row in enumerate(anchors):
        record = thyroid_data.records[int(row)]
        iv = explain_importance(model, record, ClassLabel.HYPERTHYROID,
                                thyroid_stats,
                                PerturbationConfig(n_samples=400, seed=trial))
        weights = np.asarray(iv.weights)
        if int(np.argmax(np.abs(weights))) == i_tsh and weights[i_tsh] > 0:
            top_hits += 1
        base = record.as_array()
        for j, spec in enumerate(schema.features):
            if spec.kind.value == "boolean" or thyroid_stats.stds[j] == 0:
                continue
            h = max(1e-4 * thyroid_stats.stds[j], 1e-6)
            up, down = base.copy(), base.copy()
            up[j] += h
            down[j] -= h
            grad = (model.predict_proba_matrix(up[None, :])[0, 1]
                    - model.predict_proba_matrix(down[None, :])[0, 1]) / (2 * h)
            if abs(grad) * thyroid_stats.stds[j] <= 1e-3:
                continue
            sign_total += 1
            if np.sign(weights[j]) == np.sign(grad):
                sign_agree += 1
    sign_rate = sign_agree / sign_total if sign_total else 0.0
    _criterion(
        "surrogate sanity (linear oracle)",
        top_hits >= 90 and sign_rate >= 0.9,
        f"top-feature hits={top_hits}/100, "
        f"finite-difference sign agreement={sign_rate:.2%} over {sign_total}")


def test_contract_suite(schema, thyroid_model, thyroid_data, thyroid_stats):
    ok = default_counts(ClassLabel.NEGATIVE) == (3, 3)
    ok &= default_counts(ClassLabel.HYPERTHYROID) == (5, 5)
    ok &= default_counts(ClassLabel.HYPOTHYROID) == (5, 5)

    params = EngineParams(population_size=80, generations=15, n_samples=300)
    keys_ok = True
    for hyp in ClassLabel:
        req = HypothesisRequest(hypothesis=hyp, record_id=thyroid_data.records[0].id,
                                seed=5, n_counterexamples_per_class=1,
                                n_similar_cases=0)
        bundle = handle_request(req, thyroid_model, thyroid_data, thyroid_stats,
                                params=params)
        keys_ok &= set(bundle.counterexamples) == {0, 1, 2} - {int(hyp)}

    rejected = 0
    for payload in ({"hypothesis": 0, "record_id": "r0", "n_similar_cases": 11},
                    {"hypothesis": 0, "record_id": "r0", "n_similar_cases": -1},
                    {"hypothesis": 0, "record_id": "r0",
                     "n_counterexamples_per_class": 42}):
        try:
            parse_request(payload, schema)
        except Exception:
            rejected += 1

    req = HypothesisRequest(hypothesis=ClassLabel.NEGATIVE,
                            record_id=thyroid_data.records[4].id, seed=314,
                            include_importance=True)
    a = handle_request(req, thyroid_model, thyroid_data, thyroid_stats, params=params)
    b = handle_request(req, thyroid_model, thyroid_data, thyroid_stats, params=params)
    identical = a.canonical_json(schema) == b.canonical_json(schema)

    _criterion(
        "contract suite (defaults, class keys, bounds, determinism)",
        ok and keys_ok and rejected == 3 and identical,
        f"defaults ok={bool(ok)}, keys ok={keys_ok}, "
        f"out-of-range rejected={rejected}/3, byte-identical={identical}")


def test_low_tsh_profile_reproduction(schema, thyroid_model, thyroid_data,
                                      thyroid_stats):
    """Negative-supported profile: TSH 0.1, age 77, unremarkable labs."""
    record = record_with(schema, "profile", age=77, TSH=0.1, T3=2.0,
                         TT4=108.0, T4U=0.98, FTI=107.0)
    negative_supported = thyroid_model.predict_class(record) is ClassLabel.NEGATIVE

    profile = DistanceProfile.from_stats(schema, thyroid_stats)
    config = CfConfig(target_class=ClassLabel.HYPOTHYROID, k=3, seed=20,
                      **SEARCH)
    cfs = generate_counterexamples(thyroid_model, record, config, profile,
                                   thyroid_data)
    tsh_raised = bool(cfs.items) and all(
        any(c.name == "TSH" and float(c.new) > float(c.old)
            for c in cf.changed_features)
        for cf in cfs.items)

    cases = generate_similar_cases(thyroid_model, record, ClassLabel.NEGATIVE,
                                   3, profile, thyroid_data, seed=21, **SEARCH)
    labs = {"TSH", "T3", "TT4", "T4U", "FTI"}
    labs_only = any(
        case.changed_features and
        {c.name for c in case.changed_features} <= labs
        for case in cases.items)

    _criterion(
        "qualitative profile reproduction (low-TSH record)",
        negative_supported and tsh_raised and labs_only,
        f"negative_supported={negative_supported}, "
        f"hypothyroid CFs raise TSH={tsh_raised}, "
        f"lab-only similar case={labs_only}")
