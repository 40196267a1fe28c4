"""Counterexamples and similar cases via evolutionary search.

Both explanation families are minimally-distant synthetic records: a
counterexample is predicted as a chosen alternate class, a similar case as
the hypothesis class itself. The search is a seeded genetic loop (hard
validity filter, lexicographic sparsity/proximity fitness) followed by a
local refinement pass that reverts and bisects changed features back
toward the query, plus a greedy max-min diversity selection. A brute-force
grid oracle provides the independent check used in tests and `oracle-check`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import SchemaMismatchError
from .schema import (ClassLabel, DatasetSchema, FeatureKind, FeatureStats,
                     LabeledDataset, Record, vector_to_record)

CHANGE_TOL = 1e-9        # normalized |delta| above which a feature counts as changed
_MUTATION_RATE = 0.15
_INIT_NOISE = 0.1        # std of seeding noise, in units of feature scale
_BISECT_ITERS = 14
_INVALID_PENALTY = 1e6


@dataclass(frozen=True)
class DistanceProfile:
    """Per-feature normalization constants and the mutability mask.

    Continuous features are scaled by their training range; zero-range
    continuous features are excluded from the distance and frozen. Boolean
    features count a plain 0/1 mismatch.
    """

    schema: DatasetSchema
    scale: np.ndarray          # normalization constant per feature (>0)
    in_scope: np.ndarray       # participates in the distance
    frozen: np.ndarray         # never altered by search
    is_boolean: np.ndarray
    is_integer: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def from_stats(cls, schema: DatasetSchema, stats: FeatureStats,
                   immutable_features: Sequence[str] = ()) -> "DistanceProfile":
        unknown = set(immutable_features) - set(schema.feature_names)
        if unknown:
            raise KeyError(f"immutable features not in schema: {sorted(unknown)}")
        n = schema.n_features
        is_boolean = np.array([f.kind is FeatureKind.BOOLEAN for f in schema.features])
        is_integer = np.array([f.kind is FeatureKind.INTEGER for f in schema.features])
        ranges = stats.maxs - stats.mins
        scale = np.where(is_boolean, 1.0, ranges)
        zero_range = (~is_boolean) & (ranges <= 0)
        in_scope = ~zero_range
        frozen = zero_range.copy()
        for i, f in enumerate(schema.features):
            if not f.mutable or f.name in immutable_features:
                frozen[i] = True
        lo = np.where(is_boolean, 0.0, stats.mins)
        hi = np.where(is_boolean, 1.0, stats.maxs)
        return cls(schema=schema, scale=np.where(in_scope, scale, 1.0),
                   in_scope=in_scope, frozen=frozen, is_boolean=is_boolean,
                   is_integer=is_integer, lo=lo, hi=hi)

    def with_immutable(self, names: Sequence[str]) -> "DistanceProfile":
        unknown = set(names) - set(self.schema.feature_names)
        if unknown:
            raise KeyError(f"immutable features not in schema: {sorted(unknown)}")
        frozen = self.frozen.copy()
        for name in names:
            frozen[self.schema.index_of(name)] = True
        return DistanceProfile(schema=self.schema, scale=self.scale,
                               in_scope=self.in_scope, frozen=frozen,
                               is_boolean=self.is_boolean, is_integer=self.is_integer,
                               lo=self.lo, hi=self.hi)

    def normalized_delta(self, A: np.ndarray, q: np.ndarray) -> np.ndarray:
        diff = np.abs(np.atleast_2d(A) - q[None, :]) / self.scale[None, :]
        bool_diff = (np.atleast_2d(A) != q[None, :]).astype(float)
        return np.where(self.is_boolean[None, :], bool_diff, diff)

    def distance_rows(self, A: np.ndarray, q: np.ndarray) -> np.ndarray:
        delta = self.normalized_delta(A, q)
        return delta[:, self.in_scope].mean(axis=1)

    def changed_mask(self, A: np.ndarray, q: np.ndarray) -> np.ndarray:
        return self.normalized_delta(A, q) > CHANGE_TOL


def distance(a: Record, b: Record, profile: DistanceProfile) -> float:
    """Range-normalized mean distance; symmetric, 0 iff in-scope-equal."""
    va, vb = a.as_array(), b.as_array()
    if va.shape != vb.shape or va.shape[0] != profile.schema.n_features:
        raise SchemaMismatchError("records do not match the profile's schema")
    return float(profile.distance_rows(va[None, :], vb)[0])


def sex_pregnancy_constraint(schema: DatasetSchema) -> Callable[[np.ndarray], np.ndarray]:
    """Reject clinically impossible candidates: pregnant while sex = male."""
    sex = schema.index_of("sex")
    pregnant = schema.index_of("pregnant")

    def check(X: np.ndarray) -> np.ndarray:
        return ~((X[:, sex] < 0.5) & (X[:, pregnant] > 0.5))

    return check


@dataclass(frozen=True)
class CfConfig:
    target_class: ClassLabel
    k: int
    population_size: int = 200
    generations: int = 50
    sparsity_pressure: float = 0.02
    seed: int = 0
    immutable_features: frozenset = frozenset()

    def __post_init__(self):
        if not 0 <= self.k <= 10:
            raise ValueError(f"k must be in [0, 10], got {self.k}")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        # generations == 0 is allowed as a diagnostic no-op (the search
        # evaluates nothing and returns an exhausted empty result)
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.sparsity_pressure < 0:
            raise ValueError("sparsity_pressure must be >= 0")
        ClassLabel(self.target_class)


@dataclass(frozen=True)
class FeatureChange:
    name: str
    old: "int | float"
    new: "int | float"

    def to_dict(self) -> dict:
        return {"name": self.name, "old": self.old, "new": self.new}


@dataclass(frozen=True)
class CandidateExample:
    candidate: Record
    predicted_class: ClassLabel
    changed_features: tuple[FeatureChange, ...]
    proximity: float
    sparsity: int

    def to_dict(self) -> dict:
        return {"id": self.candidate.id,
                "values": list(self.candidate.values),
                "predicted_class": int(self.predicted_class),
                "changed_features": [c.to_dict() for c in self.changed_features],
                "proximity": self.proximity, "sparsity": self.sparsity}


class Counterexample(CandidateExample):
    """Synthetic record the model assigns to a chosen alternate class."""


class SimilarCase(CandidateExample):
    """Nearby synthetic record the model keeps in the hypothesis class."""


@dataclass
class SearchResult:
    items: list
    budget_exhausted: bool

    def __iter__(self) -> Iterator:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


class _Search:
    """One evolutionary search run; owns its random stream."""

    def __init__(self, model, query: Record, target: ClassLabel,
                 profile: DistanceProfile, config: CfConfig,
                 constraint: Callable[[np.ndarray], np.ndarray] | None):
        self.model = model
        self.query = query.as_array()
        if self.query.shape[0] != profile.schema.n_features:
            raise SchemaMismatchError("query record does not match the profile's schema")
        self.target = int(target)
        self.profile = profile.with_immutable(sorted(config.immutable_features))
        self.config = config
        self.constraint = constraint
        self.rng = np.random.default_rng(config.seed)
        self.pool: dict[bytes, np.ndarray] = {}

    # --- vector hygiene -------------------------------------------------
    def _sanitize(self, X: np.ndarray) -> np.ndarray:
        p = self.profile
        X = np.clip(X, p.lo[None, :], p.hi[None, :])
        X[:, p.is_boolean] = np.round(X[:, p.is_boolean])
        X[:, p.is_integer] = np.round(X[:, p.is_integer])
        X[:, p.frozen] = self.query[p.frozen]
        return X

    def _valid(self, X: np.ndarray) -> np.ndarray:
        ok = self.model.predict_class_matrix(X) == self.target
        if self.constraint is not None:
            ok &= self.constraint(X)
        ok &= self.profile.changed_mask(X, self.query).any(axis=1)
        return ok

    def _collect(self, X: np.ndarray, valid: np.ndarray) -> None:
        for row in X[valid]:
            self.pool.setdefault(row.tobytes(), row.copy())

    # --- population machinery -------------------------------------------
    def _initial_population(self, seed_rows: np.ndarray | None) -> np.ndarray:
        size, d = self.config.population_size, self.query.shape[0]
        n_seeded = 0 if seed_rows is None or len(seed_rows) == 0 else size // 2
        parts = []
        if n_seeded:
            reps = -(-n_seeded // len(seed_rows))
            parts.append(np.tile(seed_rows, (reps, 1))[:n_seeded])
        n_local = size - n_seeded
        p = self.profile
        local = np.tile(self.query, (n_local, 1))
        noise = self.rng.normal(0.0, _INIT_NOISE, size=local.shape) * p.scale[None, :]
        cont = ~p.is_boolean & ~p.frozen
        local[:, cont] += noise[:, cont]
        flips = (self.rng.random(local.shape) < 0.1) & p.is_boolean[None, :] & ~p.frozen[None, :]
        local[flips] = 1.0 - local[flips]
        parts.append(local)
        return self._sanitize(np.vstack(parts))

    def _breed(self, pop: np.ndarray, score: np.ndarray) -> np.ndarray:
        size, d = pop.shape
        order = np.argsort(score, kind="stable")
        n_elite = max(1, size // 10)
        elites = pop[order[:n_elite]]
        parents = pop[order[:max(2, size // 2)]]
        n_children = size - n_elite
        pairs = self.rng.integers(0, len(parents), size=(n_children, 2))
        cross = self.rng.random((n_children, d)) < 0.5
        children = np.where(cross, parents[pairs[:, 0]], parents[pairs[:, 1]])
        p = self.profile
        mutate = (self.rng.random(children.shape) < _MUTATION_RATE) & ~p.frozen[None, :]
        resampled = self.rng.uniform(p.lo[None, :], p.hi[None, :], size=children.shape)
        children = np.where(mutate, resampled, children)
        return self._sanitize(np.vstack([elites, children]))

    def run(self, seed_rows: np.ndarray | None) -> list[np.ndarray]:
        if self.config.generations == 0 or self.config.k == 0:
            return []
        pop = self._initial_population(seed_rows)
        for gen in range(self.config.generations):
            valid = self._valid(pop)
            self._collect(pop, valid)
            if gen == self.config.generations - 1:
                break
            prox = self.profile.distance_rows(pop, self.query)
            changed = self.profile.changed_mask(pop, self.query).sum(axis=1)
            score = (prox + self.config.sparsity_pressure * changed
                     + _INVALID_PENALTY * (~valid))
            pop = self._breed(pop, score)
        ranked = sorted(self.pool.values(), key=self._order_key)
        # every candidate offered to diversity selection is locally refined;
        # keep refining past the cap only while dedup leaves fewer than k
        cap = max(10 * self.config.k, 50)   # also bounds the O(n^2) diversity pass
        unique: dict[bytes, np.ndarray] = {}
        idx = 0
        while idx < len(ranked) and (idx < cap or len(unique) < self.config.k):
            refined = self._refine(ranked[idx])
            unique.setdefault(refined.tobytes(), refined)
            idx += 1
        return sorted(unique.values(), key=self._order_key)[:cap]

    def _order_key(self, vec: np.ndarray):
        prox = float(self.profile.distance_rows(vec[None, :], self.query)[0])
        sparsity = int(self.profile.changed_mask(vec[None, :], self.query).sum())
        return (sparsity, prox, vec.tobytes())

    # --- local refinement -------------------------------------------------
    def _refine(self, vec: np.ndarray) -> np.ndarray:
        vec = vec.copy()
        # greedy full reverts: drop changed features while validity survives
        while True:
            changed = np.flatnonzero(self.profile.changed_mask(vec[None, :], self.query)[0])
            if changed.size == 0:
                break
            trials = np.tile(vec, (changed.size, 1))
            trials[np.arange(changed.size), changed] = self.query[changed]
            ok = self._valid(trials)
            if not ok.any():
                break
            prox = self.profile.distance_rows(trials, self.query)
            prox[~ok] = np.inf
            vec = trials[int(np.argmin(prox))]
        # bisect remaining continuous changes toward the query
        changed = np.flatnonzero(self.profile.changed_mask(vec[None, :], self.query)[0])
        for f in changed:
            if self.profile.is_boolean[f]:
                continue
            lo, hi = self.query[f], vec[f]     # lo side invalid, hi side valid
            for _ in range(_BISECT_ITERS):
                mid = (lo + hi) / 2.0
                if self.profile.is_integer[f]:
                    mid = float(round(mid))
                    if mid in (lo, hi):
                        break
                trial = vec.copy()
                trial[f] = mid
                if self._valid(trial[None, :])[0]:
                    hi = mid
                else:
                    lo = mid
            vec[f] = hi
        return vec


def _seed_rows(data: LabeledDataset | None, target: ClassLabel,
               profile: DistanceProfile, query: Record, limit: int) -> np.ndarray | None:
    if data is None or len(data) == 0:
        return None
    y = data.label_array()
    rows = data.matrix()[y == int(target)]
    if rows.shape[0] == 0:
        return None
    order = np.argsort(profile.distance_rows(rows, query.as_array()), kind="stable")
    return rows[order[:limit]]


def _materialize(cls, vectors: list[np.ndarray], search: _Search,
                 profile: DistanceProfile, query: Record, id_prefix: str) -> list:
    out = []
    for i, vec in enumerate(vectors):
        record = vector_to_record(profile.schema, vec, f"{id_prefix}-{i + 1}")
        changed_idx = np.flatnonzero(profile.changed_mask(vec[None, :], query.as_array())[0])
        changes = tuple(
            FeatureChange(name=profile.schema.features[f].name,
                          old=query.values[f], new=record.values[f])
            for f in changed_idx)
        out.append(cls(
            candidate=record,
            predicted_class=ClassLabel(int(search.model.predict_class_matrix(vec[None, :])[0])),
            changed_features=changes,
            proximity=float(profile.distance_rows(vec[None, :], query.as_array())[0]),
            sparsity=len(changes)))
    return out


def generate_counterexamples(model, query: Record, config: CfConfig,
                             profile: DistanceProfile,
                             data: LabeledDataset | None,
                             constraint: "Callable | None" = sex_pregnancy_constraint,
                             ) -> SearchResult:
    """Up to k diverse records the model assigns to config.target_class.

    Results are valid by construction (re-predicted), sorted by
    (sparsity, proximity), and pass through greedy max-min diversity
    selection. Fewer than k results set budget_exhausted.
    """
    if constraint is sex_pregnancy_constraint:
        constraint = sex_pregnancy_constraint(profile.schema)
    search = _Search(model, query, config.target_class, profile, config, constraint)
    if config.k == 0:
        return SearchResult(items=[], budget_exhausted=False)
    seeds = _seed_rows(data, config.target_class, search.profile, query,
                       config.population_size // 2)
    vectors = search.run(seeds)
    candidates = _materialize(Counterexample, vectors, search, search.profile,
                              query, "cf")
    selected = diversity_select(candidates, config.k, search.profile)
    selected.sort(key=_example_key)
    items = _reid(selected, "cf")
    return SearchResult(items=items, budget_exhausted=len(items) < config.k)


def generate_similar_cases(model, query: Record, hypothesis: ClassLabel, k: int,
                           profile: DistanceProfile, data: LabeledDataset | None,
                           seed: int,
                           population_size: int = 200, generations: int = 50,
                           sparsity_pressure: float = 0.02,
                           immutable_features: frozenset = frozenset(),
                           constraint: "Callable | None" = sex_pregnancy_constraint,
                           ) -> SearchResult:
    """Up to k nearby records still predicted as the hypothesis class."""
    config = CfConfig(target_class=hypothesis, k=k, population_size=population_size,
                      generations=generations, sparsity_pressure=sparsity_pressure,
                      seed=seed, immutable_features=immutable_features)
    if constraint is sex_pregnancy_constraint:
        constraint = sex_pregnancy_constraint(profile.schema)
    search = _Search(model, query, hypothesis, profile, config, constraint)
    if k == 0:
        return SearchResult(items=[], budget_exhausted=False)
    seeds = _seed_rows(data, hypothesis, search.profile, query, config.population_size // 2)
    vectors = search.run(seeds)
    candidates = _materialize(SimilarCase, vectors, search, search.profile, query, "sc")
    selected = diversity_select(candidates, k, search.profile)
    selected.sort(key=_example_key)
    items = _reid(selected, "sc")
    return SearchResult(items=items, budget_exhausted=len(items) < k)


def _example_key(example: CandidateExample):
    return (example.sparsity, example.proximity,
            example.candidate.as_array().tobytes())


def _reid(examples: list, prefix: str) -> list:
    out = []
    for i, ex in enumerate(examples):
        record = Record(id=f"{prefix}-{i + 1}", values=ex.candidate.values)
        out.append(type(ex)(candidate=record, predicted_class=ex.predicted_class,
                            changed_features=ex.changed_features,
                            proximity=ex.proximity, sparsity=ex.sparsity))
    return out


def diversity_select(candidates: list, k: int, profile: DistanceProfile) -> list:
    """Greedy max-min selection, never co-selecting zero-distance duplicates."""
    if k <= 0 or not candidates:
        return []
    pool = sorted(candidates, key=_example_key)
    selected = [pool.pop(0)]
    vectors = {id(c): c.candidate.as_array() for c in candidates}
    while pool and len(selected) < k:
        best, best_key = None, None
        for c in pool:
            dmin = min(float(profile.distance_rows(vectors[id(c)][None, :],
                                                   vectors[id(s)])[0])
                       for s in selected)
            key = (-dmin, c.proximity, vectors[id(c)].tobytes())
            if best_key is None or key < best_key:
                best, best_key = c, key
        if -best_key[0] <= 0.0:
            break
        selected.append(best)
        pool.remove(best)
    return selected


def brute_force_oracle(model, query: Record, target_class: ClassLabel,
                       grid: dict, profile: DistanceProfile,
                       constraint: "Callable | None" = sex_pregnancy_constraint,
                       ) -> Counterexample | None:
    """Exhaustive grid enumeration; independent oracle used only by tests.

    ``grid`` maps feature names to finite value lists; absent or frozen
    features stay at the query value. Returns the valid candidate
    minimizing (sparsity, proximity) lexicographically, or None when the
    grid holds no counterfactual.
    """
    if constraint is sex_pregnancy_constraint:
        constraint = sex_pregnancy_constraint(profile.schema)
    schema = profile.schema
    q = query.as_array()
    axes = []
    for i, spec in enumerate(schema.features):
        if spec.name in grid and not profile.frozen[i]:
            axes.append(np.unique(np.asarray(grid[spec.name], dtype=np.float64)))
        else:
            axes.append(np.array([q[i]]))
    total = int(np.prod([len(a) for a in axes]))
    if total > 2_000_000:
        raise ValueError(f"grid too large to enumerate: {total} points")
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.reshape(-1) for m in mesh], axis=1)

    ok = model.predict_class_matrix(X) == int(target_class)
    if constraint is not None:
        ok &= constraint(X)
    ok &= profile.changed_mask(X, q).any(axis=1)
    if not ok.any():
        return None
    Xv = X[ok]
    sparsity = profile.changed_mask(Xv, q).sum(axis=1)
    prox = profile.distance_rows(Xv, q)
    keys = sorted(range(len(Xv)),
                  key=lambda i: (int(sparsity[i]), float(prox[i]), Xv[i].tobytes()))
    best = Xv[keys[0]]
    record = vector_to_record(schema, best, "oracle-1")
    changed_idx = np.flatnonzero(profile.changed_mask(best[None, :], q)[0])
    changes = tuple(FeatureChange(name=schema.features[f].name,
                                  old=query.values[f], new=record.values[f])
                    for f in changed_idx)
    return Counterexample(
        candidate=record,
        predicted_class=ClassLabel(int(model.predict_class_matrix(best[None, :])[0])),
        changed_features=changes,
        proximity=float(prox[keys[0]]),
        sparsity=int(sparsity[keys[0]]))
