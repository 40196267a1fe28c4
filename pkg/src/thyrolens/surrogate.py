"""Signed local feature importance for a (record, hypothesis) pair.

Perturb around the record, weight samples by proximity, fit a weighted
ridge regression of the model's hypothesis-class probability on the
standardized perturbed features. Positive weights support the hypothesis
class locally, negative weights oppose it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .counterfactual import DistanceProfile
from .schema import ClassLabel, FeatureStats, Record

BOOLEAN_FLIP_PROB = 0.15
RIDGE_ALPHA = 1.0
DEFAULT_KERNEL_WIDTH = 0.75 * math.sqrt(20)
DEFAULT_N_SAMPLES = 5000
_DEGENERATE_VAR = 1e-18


@dataclass(frozen=True)
class PerturbationConfig:
    n_samples: int = DEFAULT_N_SAMPLES
    kernel_width: float = DEFAULT_KERNEL_WIDTH
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")


@dataclass(frozen=True)
class ImportanceVector:
    record_id: str
    hypothesis: ClassLabel
    weights: tuple        # one signed weight per feature, schema order
    surrogate_r2: float
    degenerate: bool = False

    def __post_init__(self):
        if self.surrogate_r2 > 1.0 + 1e-12:
            raise ValueError("surrogate_r2 cannot exceed 1")

    def to_dict(self, feature_names=None) -> dict:
        d = {"record_id": self.record_id, "hypothesis": int(self.hypothesis),
             "weights": list(self.weights), "surrogate_r2": self.surrogate_r2,
             "degenerate": self.degenerate}
        if feature_names is not None:
            d["weights"] = [{"name": n, "weight": w}
                            for n, w in zip(feature_names, self.weights)]
        return d


def _feature_rng(seed: int, name: str) -> np.random.Generator:
    # keyed by feature name so sampling is equivariant under schema
    # permutation: the same feature gets the same draws regardless of order
    digest = hashlib.sha256(name.encode()).digest()
    key = (int.from_bytes(digest[:4], "big"), int.from_bytes(digest[4:8], "big"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def perturbation_matrix(record: Record, stats: FeatureStats,
                        config: PerturbationConfig) -> np.ndarray:
    """Sample matrix around the record; row 0 is the unperturbed record.

    Continuous features draw from a normal centred on the record with the
    training std as scale, clipped to the training range (zero-variance
    columns stay constant); booleans flip independently with p = 0.15.
    """
    base = record.as_array()
    n = config.n_samples
    X = np.tile(base, (n, 1))
    if n == 1:
        return X
    for i, spec in enumerate(stats.schema.features):
        rng = _feature_rng(config.seed, spec.name)
        if spec.kind.value == "boolean":
            flips = rng.random(n - 1) < BOOLEAN_FLIP_PROB
            X[1:, i] = np.abs(X[1:, i] - flips)
        elif stats.stds[i] > 0:
            draws = rng.normal(loc=base[i], scale=stats.stds[i], size=n - 1)
            draws = np.clip(draws, stats.mins[i], stats.maxs[i])
            if spec.kind.value == "integer":
                draws = np.round(draws)
            X[1:, i] = draws
    return X


def perturb_around(record: Record, stats: FeatureStats,
                   config: PerturbationConfig) -> list[Record]:
    """Record-typed view of perturbation_matrix (sample 0 = the record)."""
    from .schema import vector_to_record

    X = perturbation_matrix(record, stats, config)
    out = [record]
    for i in range(1, X.shape[0]):
        out.append(vector_to_record(stats.schema, X[i], f"p{i}"))
    return out


def kernel_weights(record: Record, samples, stats: FeatureStats,
                   kernel_width: float) -> np.ndarray:
    """exp(-d^2 / width^2) proximity weights; the record itself weighs 1."""
    profile = DistanceProfile.from_stats(stats.schema, stats)
    if isinstance(samples, np.ndarray):
        X = samples
    else:
        X = np.array([s.as_array() for s in samples])
    d = profile.distance_rows(X, record.as_array())
    return np.exp(-(d ** 2) / (kernel_width ** 2))


def _standardize(X: np.ndarray, stats: FeatureStats) -> np.ndarray:
    is_boolean = np.array([f.kind.value == "boolean" for f in stats.schema.features])
    Z = X.copy()
    cont = ~is_boolean
    scale = np.where(cont & (stats.stds > 0), stats.stds, 1.0)
    Z[:, cont] = (X[:, cont] - stats.means[cont]) / scale[cont]
    return Z


def explain_importance(model, record: Record, hypothesis: ClassLabel,
                       stats: FeatureStats,
                       config: PerturbationConfig) -> ImportanceVector:
    """Weighted ridge surrogate of the hypothesis-class probability.

    Weights are reported in schema feature order and are comparable across
    features because continuous columns are standardized by the training
    std before fitting. ``surrogate_r2`` is the proximity-weighted
    coefficient of determination on the perturbation set; a degenerate fit
    (no target variance, singular system) is flagged, never raised.
    """
    X = perturbation_matrix(record, stats, config)
    y = model.predict_proba_matrix(X)[:, int(hypothesis)]
    w = kernel_weights(record, X, stats, config.kernel_width)
    Z = _standardize(X, stats)

    n, d = Z.shape
    A = np.hstack([np.ones((n, 1)), Z])
    Aw = A * w[:, None]
    M = A.T @ Aw
    reg = np.eye(d + 1) * RIDGE_ALPHA
    reg[0, 0] = 0.0                      # intercept unpenalized
    rhs = Aw.T @ y
    degenerate = False
    try:
        coef = np.linalg.solve(M + reg, rhs)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(M + reg, rhs, rcond=None)
        degenerate = True

    y_hat = A @ coef
    w_sum = w.sum()
    y_bar = float((w * y).sum() / w_sum)
    ss_tot = float((w * (y - y_bar) ** 2).sum())
    ss_res = float((w * (y - y_hat) ** 2).sum())
    if ss_tot < _DEGENERATE_VAR:
        degenerate = True
        r2 = 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return ImportanceVector(record_id=record.id, hypothesis=ClassLabel(hypothesis),
                            weights=tuple(float(c) for c in coef[1:]),
                            surrogate_r2=min(r2, 1.0), degenerate=degenerate)
