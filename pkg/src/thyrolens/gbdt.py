"""Gradient-boosted decision trees with softmax outputs, from scratch.

One regression tree per class per boosting round, fit to the gradient of
the multi-class cross-entropy with second-order (gradient/hessian) exact
greedy splits and L2 leaf regularization. Trained models are immutable and
safe to share across concurrent prediction and explanation calls.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelFormatError, SchemaMismatchError
from .schema import ClassLabel, DatasetSchema, LabeledDataset, Record, load_schema
from .util import canonical_json

L2_LAMBDA = 1.0          # leaf-weight regularization
MIN_GAIN = 1e-12
MODEL_FORMAT = "thyrolens.gbdt"
MODEL_VERSION = 1
_PREDICT_CHUNK = 4096


@dataclass(frozen=True)
class TrainConfig:
    n_rounds: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be positive")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return {"n_rounds": self.n_rounds, "max_depth": self.max_depth,
                "learning_rate": self.learning_rate,
                "min_samples_leaf": self.min_samples_leaf,
                "subsample_fraction": self.subsample_fraction, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in ("n_rounds", "max_depth", "learning_rate",
                                        "min_samples_leaf", "subsample_fraction",
                                        "seed")})


class RegressionTree:
    """Flat-array binary tree; feature < 0 marks a leaf node."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return self.value[node]
            f = np.where(active, feat, 0)
            go_left = X[np.arange(X.shape[0]), f] < self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _scan_split_numpy(X: np.ndarray, order: np.ndarray, g: np.ndarray,
                      h: np.ndarray, min_leaf: int) -> tuple[float, int, float]:
    """Feature-by-feature scan mirroring the jitted kernel bit-for-bit."""
    m = order.shape[0]
    rows0 = order[:, 0]
    G = float(g[rows0].sum())
    H = float(h[rows0].sum())
    parent = G * G / (H + L2_LAMBDA)
    best_gain, best_feat, best_thr = -np.inf, -1, 0.0
    if m < 2 * min_leaf:
        return best_gain, best_feat, best_thr
    counts = np.arange(1, m)
    for f in range(order.shape[1]):
        rows = order[:, f]
        Xs = X[rows, f]
        GL = np.cumsum(g[rows])[:-1]
        HL = np.cumsum(h[rows])[:-1]
        mid = (Xs[1:] + Xs[:-1]) / 2.0
        valid = ((Xs[1:] > Xs[:-1]) & (mid > Xs[:-1]) & (mid <= Xs[1:])
                 & (counts >= min_leaf) & ((m - counts) >= min_leaf))
        if not valid.any():
            continue
        GR = G - GL
        HR = H - HL
        gain = GL ** 2 / (HL + L2_LAMBDA) + GR ** 2 / (HR + L2_LAMBDA) - parent
        gain = np.where(valid, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain:
            best_gain, best_feat, best_thr = float(gain[pos]), f, float(mid[pos])
    return best_gain, best_feat, best_thr


try:
    from numba import njit

    @njit(cache=True)
    def _scan_split_jit(X, order, g, h, min_leaf, lam):  # pragma: no cover
        m, d = order.shape
        G = 0.0
        H = 0.0
        for i in range(m):
            r = order[i, 0]
            G += g[r]
            H += h[r]
        parent = G * G / (H + lam)
        best_gain = -np.inf
        best_feat = -1
        best_thr = 0.0
        if m < 2 * min_leaf:
            return best_gain, best_feat, best_thr
        for f in range(d):
            gl = 0.0
            hl = 0.0
            for i in range(m - 1):
                r = order[i, f]
                gl += g[r]
                hl += h[r]
                x0 = X[r, f]
                x1 = X[order[i + 1, f], f]
                if x1 <= x0:
                    continue
                if (i + 1) < min_leaf or (m - i - 1) < min_leaf:
                    continue
                thr = (x0 + x1) / 2.0
                if not (thr > x0 and thr <= x1):
                    continue
                gr = G - gl
                hr = H - hl
                gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = thr
        return best_gain, best_feat, best_thr

    def _scan_split(X, order, g, h, min_leaf):
        return _scan_split_jit(X, order, g, h, min_leaf, L2_LAMBDA)
except ImportError:  # pragma: no cover
    _scan_split = _scan_split_numpy


def _build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray,
                config: TrainConfig,
                sorted_order: np.ndarray) -> tuple[RegressionTree, np.ndarray]:
    """Fit one tree; returns the tree and its per-row prediction on X.

    ``sorted_order[:, f]`` holds row indices of X sorted by feature f; it is
    partitioned down the tree instead of re-sorting each node. Candidate
    thresholds are midpoints between consecutive distinct sorted values;
    ties resolve to the lowest feature index then lowest position, so
    rebuilding is byte-deterministic.
    """
    d = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    row_pred = np.zeros(X.shape[0], dtype=np.float64)
    is_left = np.zeros(X.shape[0], dtype=bool)

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, sorted_order, 0)]
    while stack:
        node, order, depth = stack.pop()
        rows = order[:, 0]
        split = None
        if depth < config.max_depth:
            gain, feat, thr = _scan_split(X, order, g, h, config.min_samples_leaf)
            if feat >= 0 and gain > MIN_GAIN:
                split = (feat, thr)
        if split is None:
            w = -g[rows].sum() / (h[rows].sum() + L2_LAMBDA) * config.learning_rate
            value[node] = w
            row_pred[rows] = w
            continue
        feat, thr = split
        feature[node] = feat
        threshold[node] = thr
        go_left = X[rows, feat] < thr
        is_left[rows] = go_left
        mask = is_left[order]
        n_left = int(go_left.sum())
        left_order = order.T[mask.T].reshape(d, n_left).T
        right_order = order.T[~mask.T].reshape(d, len(rows) - n_left).T
        left[node] = new_node()
        right[node] = new_node()
        stack.append((left[node], left_order, depth + 1))
        stack.append((right[node], right_order, depth + 1))
    return RegressionTree(feature, threshold, left, right, value), row_pred


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class _StackedEnsemble:
    """All trees of a model flattened for batch traversal."""

    def __init__(self, trees_per_class: Sequence[Sequence[RegressionTree]]):
        feats, thrs, lefts, rights, vals = [], [], [], [], []
        roots, tree_class = [], []
        offset = 0
        for k, trees in enumerate(trees_per_class):
            for tree in trees:
                roots.append(offset)
                tree_class.append(k)
                feats.append(tree.feature)
                thrs.append(tree.threshold)
                lefts.append(tree.left + offset)
                rights.append(tree.right + offset)
                vals.append(tree.value)
                offset += len(tree.feature)
        self.n_trees = len(roots)
        if self.n_trees == 0:
            return
        self.feature = np.concatenate(feats)
        self.threshold = np.concatenate(thrs)
        self.left = np.concatenate(lefts)
        self.right = np.concatenate(rights)
        self.value = np.concatenate(vals)
        self.roots = np.array(roots, dtype=np.int64)
        self.tree_class = np.array(tree_class, dtype=np.int64)

    def score_sums(self, X: np.ndarray, n_classes: int) -> np.ndarray:
        out = np.zeros((X.shape[0], n_classes))
        if self.n_trees == 0:
            return out
        ptr = np.repeat(self.roots[:, None], X.shape[0], axis=1)
        rows = np.arange(X.shape[0])[None, :]
        while True:
            feat = self.feature[ptr]
            active = feat >= 0
            if not active.any():
                break
            f = np.where(active, feat, 0)
            go_left = X[rows, f] < self.threshold[ptr]
            nxt = np.where(go_left, self.left[ptr], self.right[ptr])
            ptr = np.where(active, nxt, ptr)
        leaf_vals = self.value[ptr]
        for k in range(n_classes):
            sel = self.tree_class == k
            if sel.any():
                out[:, k] = leaf_vals[sel].sum(axis=0)
        return out


@dataclass
class GbdtModel:
    """Per-class additive tree ensembles plus the schema they were fit on."""

    schema: DatasetSchema
    config: TrainConfig
    base_scores: np.ndarray
    trees: list[list[RegressionTree]]
    loss_curve: np.ndarray
    _stacked: _StackedEnsemble | None = field(default=None, repr=False)

    def __post_init__(self):
        lengths = {len(t) for t in self.trees}
        if len(self.trees) != len(self.schema.classes) or len(lengths) > 1:
            raise ValueError("model needs one equal-length tree list per class")

    @property
    def fingerprint(self) -> str:
        return self.schema.fingerprint()

    @property
    def n_rounds(self) -> int:
        return len(self.trees[0])

    def check_schema(self, schema: DatasetSchema) -> None:
        if schema.fingerprint() != self.fingerprint:
            raise SchemaMismatchError(
                f"schema fingerprint {schema.fingerprint()} does not match "
                f"model fingerprint {self.fingerprint}")

    def _ensemble(self) -> _StackedEnsemble:
        if self._stacked is None:
            self._stacked = _StackedEnsemble(self.trees)
        return self._stacked

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.n_features:
            raise SchemaMismatchError(
                f"expected (n, {self.schema.n_features}) matrix, got {X.shape}")
        ens = self._ensemble()
        out = np.empty((X.shape[0], len(self.schema.classes)))
        for start in range(0, X.shape[0], _PREDICT_CHUNK):
            chunk = X[start:start + _PREDICT_CHUNK]
            scores = self.base_scores[None, :] + ens.score_sums(chunk, len(self.schema.classes))
            out[start:start + _PREDICT_CHUNK] = _softmax(scores)
        return out

    def predict_class_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba_matrix(X), axis=1)

    def predict_proba(self, record: Record,
                      schema: DatasetSchema | None = None) -> np.ndarray:
        if schema is not None:
            self.check_schema(schema)
        return self.predict_proba_matrix(record.as_array()[None, :])[0]

    def predict_class(self, record: Record,
                      schema: DatasetSchema | None = None) -> ClassLabel:
        # ties break toward the lowest class index (argmax convention)
        return ClassLabel(int(np.argmax(self.predict_proba(record, schema))))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema_fingerprint": self.fingerprint,
            "schema": self.schema.to_document(),
            "config": self.config.to_dict(),
            "base_scores": self.base_scores.tolist(),
            "trees": [[t.to_dict() for t in per_class] for per_class in self.trees],
            "loss_curve": self.loss_curve.tolist(),
        }


def train(data: LabeledDataset, config: TrainConfig) -> GbdtModel:
    """Boost one tree per class per round on the cross-entropy gradient."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    counts = data.class_counts()
    for c, count in enumerate(counts):
        if count == 0:
            raise ValueError(
                f"class absent from training data: {data.schema.classes[c]}")

    X = data.matrix()
    y = data.label_array()
    n, n_classes = len(data), len(data.schema.classes)
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = 1.0

    base = np.log(counts / counts.sum())
    F = np.tile(base, (n, 1))
    rng = np.random.default_rng(config.seed)
    trees: list[list[RegressionTree]] = [[] for _ in range(n_classes)]
    losses = []

    def cross_entropy() -> float:
        P = _softmax(F)
        return float(-np.mean(np.log(np.clip(P[np.arange(n), y], 1e-15, None))))

    losses.append(cross_entropy())
    global_order = np.argsort(X, axis=0, kind="stable")
    for _ in range(config.n_rounds):
        if config.subsample_fraction < 1.0:
            m = max(1, int(round(config.subsample_fraction * n)))
            rows = np.sort(rng.choice(n, size=m, replace=False))
            X_round = X[rows]
            order = np.argsort(X_round, axis=0, kind="stable")
        else:
            rows = np.arange(n)
            X_round = X
            order = global_order
        P = _softmax(F[rows])
        G = P - Y[rows]
        Hess = P * (1.0 - P)
        for k in range(n_classes):
            tree, row_pred = _build_tree(X_round, G[:, k], Hess[:, k], config, order)
            trees[k].append(tree)
            if len(rows) == n:
                F[:, k] += row_pred
            else:
                F[rows, k] += row_pred
                mask = np.ones(n, dtype=bool)
                mask[rows] = False
                F[mask, k] += tree.predict(X[mask])
        losses.append(cross_entropy())

    return GbdtModel(schema=data.schema, config=config, base_scores=base,
                     trees=trees, loss_curve=np.array(losses))


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: tuple[float, float, float]
    recall: tuple[float, float, float]
    f1: tuple[float, float, float]
    confusion: tuple  # 3x3 counts, rows = true class, cols = predicted

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": list(self.precision),
                "recall": list(self.recall), "f1": list(self.f1),
                "confusion": [list(row) for row in self.confusion]}


def evaluate(model: GbdtModel, test: LabeledDataset) -> EvalReport:
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    model.check_schema(test.schema)
    pred = model.predict_class_matrix(test.matrix())
    true = test.label_array()
    k = len(test.schema.classes)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)
    precision, recall, f1 = [], [], []
    for c in range(k):
        tp = confusion[c, c]
        pred_c = confusion[:, c].sum()
        true_c = confusion[c, :].sum()
        p = tp / pred_c if pred_c else 0.0
        r = tp / true_c if true_c else 0.0
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(2 * p * r / (p + r)) if (p + r) else 0.0)
    return EvalReport(
        accuracy=float(np.trace(confusion) / confusion.sum()),
        precision=tuple(precision), recall=tuple(recall), f1=tuple(f1),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion))


@dataclass(frozen=True)
class CrossValReport:
    folds: tuple[EvalReport, ...]
    mean_accuracy: float
    mean_precision: tuple[float, float, float]
    mean_recall: tuple[float, float, float]
    mean_f1: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {"mean_accuracy": self.mean_accuracy,
                "mean_precision": list(self.mean_precision),
                "mean_recall": list(self.mean_recall),
                "mean_f1": list(self.mean_f1),
                "folds": [f.to_dict() for f in self.folds]}


def cross_validate(data: LabeledDataset, config: TrainConfig, k: int,
                   seed: int) -> CrossValReport:
    """Stratified k-fold CV; aggregate is the unweighted mean over folds."""
    from .schema import kfold_indices

    reports = []
    for train_idx, val_idx in kfold_indices(data, k, seed):
        model = train(data.subset(train_idx.tolist()), config)
        reports.append(evaluate(model, data.subset(val_idx.tolist())))
    mean = lambda key: tuple(
        float(np.mean([getattr(r, key)[c] for r in reports])) for c in range(3))
    return CrossValReport(
        folds=tuple(reports),
        mean_accuracy=float(np.mean([r.accuracy for r in reports])),
        mean_precision=mean("precision"),
        mean_recall=mean("recall"),
        mean_f1=mean("f1"))


def save_model(model: GbdtModel, path: "str | Path") -> None:
    """Atomic write of the versioned, self-describing artifact."""
    path = Path(path)
    payload = canonical_json(model.to_dict())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(payload)
    os.replace(tmp, path)


def load_model(path: "str | Path") -> GbdtModel:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ModelFormatError(f"cannot read model file: {e}") from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model file is corrupt: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a recognized model artifact")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version: {doc.get('version')!r}")
    try:
        schema = load_schema(doc["schema"])
        model = GbdtModel(
            schema=schema,
            config=TrainConfig.from_dict(doc["config"]),
            base_scores=np.asarray(doc["base_scores"], dtype=np.float64),
            trees=[[RegressionTree.from_dict(t) for t in per_class]
                   for per_class in doc["trees"]],
            loss_curve=np.asarray(doc["loss_curve"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"model file is corrupt: {e}") from e
    if doc.get("schema_fingerprint") != model.fingerprint:
        raise ModelFormatError("embedded schema does not match stored fingerprint")
    return model
