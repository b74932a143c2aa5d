"""A small random-forest classifier: bagged CART trees with Gini splits.

The ensemble is deliberately self-contained: tree structure is grown on a
bootstrap sample, after which leaf statistics are re-estimated by routing the
full training set through the tree. Leaf values are therefore exactly the
positive-class fraction of the training rows reaching each leaf, and a
depth-0 forest predicts the training base rate for every input.

Determinism: the bootstrap and feature subsampling of tree ``t`` come from an
independent RNG stream keyed by ``(seed, t)``, so per-tree work can be
parallelized without changing results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import ArtifactError, DataError

FOREST_FORMAT = "trustnbr-forest"
FOREST_VERSION = 1

DEFAULT_PARAMS = {
    "n_trees": 100,
    "max_depth": 8,
    "min_leaf": 1,
    "features_per_split": "sqrt",
}


@dataclass
class Tree:
    """Flat-array binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # float64, nan at leaves
    left: np.ndarray  # int32, -1 at leaves
    right: np.ndarray  # int32, -1 at leaves
    value: np.ndarray  # float64 positive-class fraction of training rows at node
    n_samples: np.ndarray  # int64 training rows reaching node

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return float(self.value[node])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]

    def apply_batch(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            rows = np.flatnonzero(internal)
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])


@dataclass
class Forest:
    trees: list[Tree]
    n_features: int
    base_rate: float
    params: dict = field(default_factory=dict)
    train_seed: int = 0

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check_vector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DataError(f"feature vector of length {x.shape} does not match n_features={self.n_features}")
        return x

    def predict_proba(self, x: Sequence[float]) -> float:
        x = self._check_vector(np.asarray(x))
        return float(np.mean([t.predict(x) for t in self.trees]))

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(f"feature matrix shape {X.shape} does not match n_features={self.n_features}")
        out = np.zeros(X.shape[0])
        for t in self.trees:
            out += t.predict_batch(X)
        return out / self.n_trees

    def predict_label(self, x: Sequence[float], threshold: float = 0.5) -> int:
        if not 0.0 <= threshold <= 1.0:
            raise DataError(f"threshold must be in [0, 1], got {threshold}")
        return int(self.predict_proba(x) >= threshold)

    def predict_label_batch(self, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        if not 0.0 <= threshold <= 1.0:
            raise DataError(f"threshold must be in [0, 1], got {threshold}")
        return (self.predict_proba_batch(X) >= threshold).astype(np.int64)


def predict_proba(forest: Forest, x: Sequence[float]) -> float:
    return forest.predict_proba(x)


def predict_label(forest: Forest, x: Sequence[float], threshold: float = 0.5) -> int:
    return forest.predict_label(x, threshold)


def _gini_best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[int, float] | None:
    """Best (feature, threshold) by weighted Gini; None when no valid split exists.

    Features are scanned in ascending index order and thresholds in ascending
    value order with strictly-better updates only, so exact ties resolve to the
    lowest feature index, then the lowest threshold.
    """
    n = rows.shape[0]
    best_cost = np.inf
    best: tuple[int, float] | None = None
    y_node = y[rows]
    for f in features:
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = y_node[order]
        boundary = np.flatnonzero(sv[:-1] < sv[1:])  # split after these positions
        if boundary.size == 0:
            continue
        n_left = boundary + 1
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        boundary = boundary[ok]
        n_left = n_left[ok]
        n_right = n_right[ok]
        pos = np.cumsum(sy)
        pos_left = pos[boundary]
        pos_right = pos[-1] - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        gini_l = 1.0 - p_l**2 - (1.0 - p_l) ** 2
        gini_r = 1.0 - p_r**2 - (1.0 - p_r) ** 2
        cost = (n_left * gini_l + n_right * gini_r) / n
        for c, b in zip(cost, boundary):
            if c < best_cost:
                lo, hi = sv[b], sv[b + 1]
                t = (lo + hi) / 2.0
                if not lo <= t < hi:  # guard against midpoint rounding onto hi
                    t = lo
                best_cost = c
                best = (int(f), float(t))
    return best


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    bootstrap: np.ndarray,
    rng: np.random.Generator,
    max_depth: int,
    min_leaf: int,
    n_split_features: int,
) -> Tree:
    m = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []

    def build(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        pos = int(y[rows].sum())
        if depth >= max_depth or pos == 0 or pos == rows.shape[0] or rows.shape[0] < 2 * min_leaf:
            return node
        if n_split_features < m:
            feats = np.sort(rng.choice(m, size=n_split_features, replace=False))
        else:
            feats = np.arange(m)
        split = _gini_best_split(X, y, rows, feats, min_leaf)
        if split is None:
            return node
        f, t = split
        mask = X[rows, f] <= t
        feature[node] = f
        threshold[node] = t
        left[node] = build(rows[mask], depth + 1)
        right[node] = build(rows[~mask], depth + 1)
        return node

    build(bootstrap, 0)
    tree = Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.zeros(len(feature)),
        n_samples=np.zeros(len(feature), dtype=np.int64),
    )
    _refit_leaf_stats(tree, X, y)
    return tree


def _refit_leaf_stats(tree: Tree, X: np.ndarray, y: np.ndarray) -> None:
    """Set node values/counts from the full training set routed through the tree."""
    node = np.zeros(X.shape[0], dtype=np.int32)
    counts = np.zeros(tree.n_nodes, dtype=np.int64)
    positives = np.zeros(tree.n_nodes, dtype=np.int64)
    np.add.at(counts, node, 1)
    np.add.at(positives, node, y)
    while True:
        feat = tree.feature[node]
        internal = feat >= 0
        if not internal.any():
            break
        rows = np.flatnonzero(internal)
        go_left = X[rows, feat[rows]] <= tree.threshold[node[rows]]
        node[rows] = np.where(go_left, tree.left[node[rows]], tree.right[node[rows]])
        np.add.at(counts, node[rows], 1)
        np.add.at(positives, node[rows], y[rows])
    if (counts[tree.feature < 0] == 0).any():
        # Cannot happen for structures grown on training rows; guard anyway.
        raise DataError("tree leaf received no training rows")
    with np.errstate(invalid="ignore"):
        tree.value = np.where(counts > 0, positives / np.maximum(counts, 1), 0.0)
    tree.n_samples = counts


def _resolve_features_per_split(spec, m: int) -> int:
    if spec in (None, "all"):
        return m
    if spec == "sqrt":
        return max(1, int(np.floor(np.sqrt(m))))
    if spec == "log2":
        return max(1, int(np.floor(np.log2(m))) + 1)
    k = int(spec)
    if not 1 <= k <= m:
        raise DataError(f"features_per_split must be in [1, {m}], got {spec!r}")
    return k


def train_forest(train: Dataset, params: dict | None = None, seed: int = 0) -> Forest:
    """Grow a bagged CART forest on the training split."""
    merged = dict(DEFAULT_PARAMS)
    merged.update(params or {})
    n_trees = int(merged["n_trees"])
    max_depth = int(merged["max_depth"])
    min_leaf = int(merged["min_leaf"])
    if n_trees < 1:
        raise DataError("n_trees must be >= 1")
    if max_depth < 0:
        raise DataError("max_depth must be >= 0")
    if min_leaf < 1:
        raise DataError("min_leaf must be >= 1")
    if train.n_rows == 0:
        raise DataError("empty training data")
    y = train.labels
    if y.min() == y.max():
        raise DataError("single-class training data")
    X = train.features
    n, m = X.shape
    n_split_features = _resolve_features_per_split(merged["features_per_split"], m)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        bootstrap = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X, y, bootstrap, rng, max_depth, min_leaf, n_split_features))
    return Forest(
        trees=trees,
        n_features=m,
        base_rate=float(y.mean()),
        params=merged,
        train_seed=seed,
    )


def serialize_forest(forest: Forest) -> bytes:
    """Versioned, human-inspectable JSON with per-tree flat node arrays."""
    if forest.n_trees == 0:
        raise ArtifactError("cannot serialize an empty forest")
    payload = {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "n_features": forest.n_features,
        "base_rate": forest.base_rate,
        "train_seed": forest.train_seed,
        "params": forest.params,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": [None if np.isnan(v) else v for v in t.threshold.tolist()],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "n_samples": t.n_samples.tolist(),
            }
            for t in forest.trees
        ],
    }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def deserialize_forest(blob: bytes) -> Forest:
    try:
        payload = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"corrupted forest payload: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != FOREST_FORMAT:
        raise ArtifactError("not a forest payload")
    if payload.get("version") != FOREST_VERSION:
        raise ArtifactError(f"unsupported forest version: {payload.get('version')!r}")
    try:
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(
                    [np.nan if v is None else v for v in t["threshold"]], dtype=np.float64
                ),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
                n_samples=np.asarray(t["n_samples"], dtype=np.int64),
            )
            for t in payload["trees"]
        ]
        forest = Forest(
            trees=trees,
            n_features=int(payload["n_features"]),
            base_rate=float(payload["base_rate"]),
            params=dict(payload["params"]),
            train_seed=int(payload["train_seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"corrupted forest payload: {exc}") from None
    if forest.n_trees == 0:
        raise ArtifactError("forest payload contains no trees")
    for t in forest.trees:
        internal = t.feature >= 0
        if internal.any() and t.feature[internal].max() >= forest.n_features:
            raise ArtifactError("tree references feature beyond n_features")
    return forest
