"""Small enumerable problems pitting the evolutionary search against the
brute-force grid oracle. Used by tests and the `oracle-check` subcommand.

Each problem lives in the full 20-feature space but only varies a couple
of named features; everything else is frozen at the query value, so the
whole grid stays enumerable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counterfactual import (CfConfig, DistanceProfile, brute_force_oracle,
                             generate_counterexamples)
from .schema import (ClassLabel, DatasetSchema, FeatureStats, Record,
                     make_record, thyroid_schema)


class RuleModel:
    """Deterministic stand-in model: a vectorized rule picks the class."""

    def __init__(self, schema: DatasetSchema, rule):
        self.schema = schema
        self._rule = rule

    def predict_class_matrix(self, X: np.ndarray) -> np.ndarray:
        return self._rule(np.asarray(X, dtype=np.float64)).astype(np.int64)

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        cls = self.predict_class_matrix(X)
        out = np.full((len(cls), 3), 0.05)
        out[np.arange(len(cls)), cls] = 0.9
        return out

    def predict_class(self, record: Record, schema=None) -> ClassLabel:
        return ClassLabel(int(self.predict_class_matrix(record.as_array()[None, :])[0]))


@dataclass(frozen=True)
class ToyProblem:
    name: str
    description: str
    model: RuleModel
    query: Record
    target_class: ClassLabel
    grid: dict
    profile: DistanceProfile
    feasible: bool = True


_BASE_VALUES = {
    "age": 50, "sex": 1, "on_thyroxine": 0, "on_antithyroid_meds": 0,
    "sick": 0, "pregnant": 0, "thyroid_surgery": 0, "I131_treatment": 0,
    "query_hypothyroid": 0, "query_hyperthyroid": 0, "lithium": 0,
    "goitre": 0, "tumor": 0, "hypopituitary": 0.0, "psych": 0,
    "TSH": 2.0, "T3": 2.0, "TT4": 100.0, "T4U": 1.0, "FTI": 100.0,
}


def _query(schema: DatasetSchema, record_id: str, **overrides) -> Record:
    values = dict(_BASE_VALUES, **overrides)
    return make_record(schema, record_id, [values[n] for n in schema.feature_names])


def _toy_profile(schema: DatasetSchema, query: Record,
                 active_ranges: dict) -> DistanceProfile:
    """Stats where only the active features have spread; the rest freeze."""
    q = query.as_array()
    mins, maxs = q.copy(), q.copy()
    for name, (lo, hi) in active_ranges.items():
        i = schema.index_of(name)
        mins[i], maxs[i] = lo, hi
    stats = FeatureStats(schema=schema, n_records=2, mins=mins, maxs=maxs,
                         means=(mins + maxs) / 2, stds=(maxs - mins) / 4,
                         medians=(mins + maxs) / 2,
                         mads=(maxs - mins) / 8, frequencies=(mins + maxs) / 2)
    immutable = [f.name for f in schema.features if f.name not in active_ranges]
    return DistanceProfile.from_stats(schema, stats, immutable_features=immutable)


def bundled_toys() -> list[ToyProblem]:
    schema = thyroid_schema()
    toys = []

    # 1. single threshold: hypothyroid once TSH crosses 5
    q = _query(schema, "toy1", TSH=3.0)
    toys.append(ToyProblem(
        name="tsh_step",
        description="class flips to Hypothyroid when TSH > 5",
        model=RuleModel(schema, lambda X: np.where(X[:, schema.index_of("TSH")] > 5, 2, 0)),
        query=q, target_class=ClassLabel.HYPOTHYROID,
        grid={"TSH": [float(v) for v in range(0, 11)]},
        profile=_toy_profile(schema, q, {"TSH": (0.0, 10.0)})))

    # 2. conjunction: hyperthyroid needs low TSH and high T3 (sparsity 2)
    q = _query(schema, "toy2", TSH=2.5, T3=2.0)
    idx_tsh, idx_t3 = schema.index_of("TSH"), schema.index_of("T3")
    toys.append(ToyProblem(
        name="low_tsh_high_t3",
        description="Hyperthyroid requires TSH < 0.4 and T3 > 4",
        model=RuleModel(schema, lambda X: np.where(
            (X[:, idx_tsh] < 0.4) & (X[:, idx_t3] > 4.0), 1, 0)),
        query=q, target_class=ClassLabel.HYPERTHYROID,
        grid={"TSH": [round(0.1 * v, 1) for v in range(0, 31)],
              "T3": [round(0.25 * v, 2) for v in range(0, 33)]},
        profile=_toy_profile(schema, q, {"TSH": (0.0, 3.0), "T3": (0.0, 8.0)})))

    # 3. boolean logic: exactly one of goitre/tumor must flip
    q = _query(schema, "toy3")
    idx_g, idx_t = schema.index_of("goitre"), schema.index_of("tumor")
    toys.append(ToyProblem(
        name="flag_xor",
        description="Hypothyroid iff goitre XOR tumor",
        model=RuleModel(schema, lambda X: np.where(
            (X[:, idx_g] > 0.5) ^ (X[:, idx_t] > 0.5), 2, 0)),
        query=q, target_class=ClassLabel.HYPOTHYROID,
        grid={"goitre": [0, 1], "tumor": [0, 1]},
        profile=_toy_profile(schema, q, {"goitre": (0, 1), "tumor": (0, 1)})))

    # 4. two routes, the sparser one wins: raise TSH, or flag + low TT4
    q = _query(schema, "toy4", TSH=2.0, TT4=100.0)
    idx_thx = schema.index_of("on_thyroxine")
    idx_tt4 = schema.index_of("TT4")
    toys.append(ToyProblem(
        name="two_routes",
        description="Hypothyroid via TSH > 7, or on_thyroxine with TT4 < 60",
        model=RuleModel(schema, lambda X: np.where(
            (X[:, idx_tsh] > 7.0)
            | ((X[:, idx_thx] > 0.5) & (X[:, idx_tt4] < 60.0)), 2, 0)),
        query=q, target_class=ClassLabel.HYPOTHYROID,
        grid={"TSH": [float(v) for v in range(0, 13)],
              "on_thyroxine": [0, 1],
              "TT4": [float(v) for v in range(40, 130, 10)]},
        profile=_toy_profile(schema, q, {"TSH": (0.0, 12.0),
                                         "on_thyroxine": (0, 1),
                                         "TT4": (40.0, 120.0)})))

    # 5. interior band reached from above
    q = _query(schema, "toy5", T3=9.0)
    toys.append(ToyProblem(
        name="t3_band",
        description="Hyperthyroid only inside 4 <= T3 <= 6",
        model=RuleModel(schema, lambda X: np.where(
            (X[:, idx_t3] >= 4.0) & (X[:, idx_t3] <= 6.0), 1, 0)),
        query=q, target_class=ClassLabel.HYPERTHYROID,
        grid={"T3": [float(v) for v in range(0, 11)]},
        profile=_toy_profile(schema, q, {"T3": (0.0, 10.0)})))

    return toys


def vacuous_toy() -> ToyProblem:
    """No grid point ever reaches the target class."""
    schema = thyroid_schema()
    q = _query(schema, "toy-vacuous")
    return ToyProblem(
        name="unreachable",
        description="model is constant Negative; Hypothyroid is infeasible",
        model=RuleModel(schema, lambda X: np.zeros(len(X), dtype=np.int64)),
        query=q, target_class=ClassLabel.HYPOTHYROID,
        grid={"TSH": [float(v) for v in range(0, 11)]},
        profile=_toy_profile(schema, q, {"TSH": (0.0, 10.0)}),
        feasible=False)


PROXIMITY_RATIO_LIMIT = 1.10
SPARSITY_SLACK = 1


def check_toy(toy: ToyProblem, seed: int, population_size: int = 100,
              generations: int = 30) -> dict:
    """Run oracle and search on one toy; report the bound check."""
    oracle = brute_force_oracle(toy.model, toy.query, toy.target_class,
                                toy.grid, toy.profile)
    if oracle is None:
        return {"toy": toy.name, "seed": seed,
                "status": "no counterfactual in grid",
                "ok": not toy.feasible}
    config = CfConfig(target_class=toy.target_class, k=1,
                      population_size=population_size, generations=generations,
                      seed=seed)
    result = generate_counterexamples(toy.model, toy.query, config,
                                      toy.profile, data=None)
    if not result.items:
        return {"toy": toy.name, "seed": seed, "status": "search found nothing",
                "oracle_proximity": oracle.proximity,
                "oracle_sparsity": oracle.sparsity,
                "ratio": float("inf"), "ok": False}
    best = result.items[0]
    ratio = best.proximity / oracle.proximity if oracle.proximity > 0 else float("inf")
    ok = (ratio <= PROXIMITY_RATIO_LIMIT
          and best.sparsity <= oracle.sparsity + SPARSITY_SLACK)
    return {"toy": toy.name, "seed": seed, "status": "compared",
            "oracle_proximity": oracle.proximity, "oracle_sparsity": oracle.sparsity,
            "search_proximity": best.proximity, "search_sparsity": best.sparsity,
            "ratio": ratio, "ok": ok}
