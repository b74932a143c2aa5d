"""Exact Shapley-value explanations for the forest's confidence score.

The value function is interventional: for a coalition S, features inside S
keep the explained instance's values and features outside S are replaced by a
background row, averaging the model output over all background rows. For a
single tree and a single background row the game is a sum of leaf indicator
games, each of which depends only on which path features are forced in or out
of the coalition, so its Shapley value has a closed form in factorials. Tree
values are combined by linearity across the ensemble (the forest output is
the mean over trees) and across background rows.

``brute_force_shapley`` evaluates the same quantity straight from the subset
definition using only ``predict_proba`` and serves as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DataError
from .forest import Forest, Tree

BRUTE_FORCE_MAX_FEATURES = 15


@dataclass(frozen=True)
class ShapVector:
    """Per-feature contributions for one prediction, in probability units."""

    phi: np.ndarray  # (m,)
    base_value: float  # mean model output over the background
    model_output: float

    def __post_init__(self) -> None:
        phi = np.asarray(self.phi, dtype=np.float64)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def n_features(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class ShapMatrix:
    """Row-aligned collection of ShapVectors sharing one background."""

    phi: np.ndarray  # (n, m)
    base_value: float
    model_outputs: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        phi = np.asarray(self.phi, dtype=np.float64)
        outputs = np.asarray(self.model_outputs, dtype=np.float64)
        if phi.ndim != 2 or outputs.shape != (phi.shape[0],):
            raise DataError("shap matrix rows and model outputs must align")
        phi.setflags(write=False)
        outputs.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "model_outputs", outputs)

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    def row(self, i: int) -> ShapVector:
        return ShapVector(
            phi=self.phi[i].copy(), base_value=self.base_value, model_output=float(self.model_outputs[i])
        )


@dataclass(frozen=True)
class GlobalImportance:
    """Per-feature mean of absolute contributions over a collection of rows."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        if (weights < 0).any():
            raise DataError("global importance weights must be non-negative")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)


# --- leaf path tables ------------------------------------------------------


@dataclass
class _LeafPath:
    features: np.ndarray  # (p,) distinct features on the root-to-leaf path
    lo: np.ndarray  # (p,) open lower bounds: reaching the leaf needs lo < x[f] <= hi
    hi: np.ndarray
    value: float


def _tree_leaf_paths(tree: Tree) -> list[_LeafPath]:
    paths: list[_LeafPath] = []

    def walk(node: int, bounds: dict[int, tuple[float, float]]) -> None:
        f = int(tree.feature[node])
        if f < 0:
            feats = np.fromiter(bounds.keys(), dtype=np.int64, count=len(bounds))
            lo = np.array([bounds[int(k)][0] for k in feats])
            hi = np.array([bounds[int(k)][1] for k in feats])
            paths.append(_LeafPath(features=feats, lo=lo, hi=hi, value=float(tree.value[node])))
            return
        t = float(tree.threshold[node])
        lo, hi = bounds.get(f, (-np.inf, np.inf))
        bounds[f] = (lo, min(hi, t))
        walk(int(tree.left[node]), bounds)
        bounds[f] = (max(lo, t), hi)
        walk(int(tree.right[node]), bounds)
        if lo == -np.inf and hi == np.inf:
            del bounds[f]
        else:
            bounds[f] = (lo, hi)

    walk(0, {})
    return paths


def _weight_tables(max_players: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form Shapley weights for leaf indicator games.

    For a leaf whose path forces N features into the coalition and M features
    out of it, a forced-in feature receives (N-1)! M! / (N+M)! and a
    forced-out feature receives -N! (M-1)! / (N+M)!. Entries with N=0
    (resp. M=0) are never read and stay 0.
    """
    P = max_players
    wpos = np.zeros((P + 1, P + 1))
    wneg = np.zeros((P + 1, P + 1))
    for n in range(P + 1):
        for m in range(P + 1 - n):
            if n >= 1:
                wpos[n, m] = math.factorial(n - 1) * math.factorial(m) / math.factorial(n + m)
            if m >= 1:
                wneg[n, m] = math.factorial(n) * math.factorial(m - 1) / math.factorial(n + m)
    return wpos, wneg


class _ForestPaths:
    def __init__(self, forest: Forest):
        self.trees = [_tree_leaf_paths(t) for t in forest.trees]
        longest = max(
            (p.features.shape[0] for tree in self.trees for p in tree),
            default=0,
        )
        self.wpos, self.wneg = _weight_tables(max(longest, 1))


def _shap_batch(forest: Forest, X: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Contributions for every row of X against every background row, averaged."""
    paths = _ForestPaths(forest)
    n_rows, m = X.shape
    n_bg = background.shape[0]
    phi = np.zeros((n_rows, m))
    for tree_paths in paths.trees:
        for path in tree_paths:
            p = path.features.shape[0]
            if p == 0 or path.value == 0.0:
                continue
            x_in = ((X[:, path.features] > path.lo) & (X[:, path.features] <= path.hi)).astype(np.float64)
            b_in = ((background[:, path.features] > path.lo) & (background[:, path.features] <= path.hi)).astype(
                np.float64
            )
            x_out = 1.0 - x_in
            b_out = 1.0 - b_in
            # Per (row, background) counts of forced-in / forced-out / dead features.
            forced_in = x_in @ b_out.T
            forced_out = x_out @ b_in.T
            dead = x_out @ b_out.T
            idx_in = forced_in.astype(np.int64)
            idx_out = forced_out.astype(np.int64)
            wpos = paths.wpos[idx_in, idx_out]
            wneg = paths.wneg[idx_in, idx_out]
            reach = dead == 0.0
            wpos *= reach
            wneg *= reach
            phi[:, path.features] += path.value * (x_in * (wpos @ b_out) - x_out * (wneg @ b_in))
    return phi / (n_bg * forest.n_trees)


def _as_background_matrix(background: Dataset | np.ndarray, m: int) -> np.ndarray:
    B = background.features if isinstance(background, Dataset) else np.asarray(background, dtype=np.float64)
    if B.ndim != 2 or B.shape[1] != m:
        raise DataError(f"background shape {B.shape} does not match n_features={m}")
    if B.shape[0] == 0:
        raise DataError("empty background")
    return B


def tree_shap(forest: Forest, x: np.ndarray, background: Dataset | np.ndarray) -> ShapVector:
    """Exact interventional Shapley values of ``predict_proba`` at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (forest.n_features,):
        raise DataError(f"feature vector shape {x.shape} does not match n_features={forest.n_features}")
    B = _as_background_matrix(background, forest.n_features)
    phi = _shap_batch(forest, x[None, :], B)[0]
    base = float(forest.predict_proba_batch(B).mean())
    return ShapVector(phi=phi, base_value=base, model_output=forest.predict_proba(x))


def shap_for_dataset(forest: Forest, d: Dataset, background: Dataset | np.ndarray) -> ShapMatrix:
    """Row-wise ``tree_shap`` over a dataset, order preserved."""
    B = _as_background_matrix(background, forest.n_features)
    if d.n_features != forest.n_features:
        raise DataError(f"dataset has {d.n_features} features, forest expects {forest.n_features}")
    phi = _shap_batch(forest, d.features, B)
    base = float(forest.predict_proba_batch(B).mean())
    outputs = forest.predict_proba_batch(d.features)
    return ShapMatrix(phi=phi, base_value=base, model_outputs=outputs)


def brute_force_shapley(forest: Forest, x: np.ndarray, background: Dataset | np.ndarray) -> ShapVector:
    """Subset-enumeration oracle: same contract as ``tree_shap``, O(2^m)."""
    x = np.asarray(x, dtype=np.float64)
    m = forest.n_features
    if x.shape != (m,):
        raise DataError(f"feature vector shape {x.shape} does not match n_features={m}")
    if m > BRUTE_FORCE_MAX_FEATURES:
        raise DataError(f"brute force limited to m <= {BRUTE_FORCE_MAX_FEATURES}, got {m}")
    B = _as_background_matrix(background, m)

    values = np.empty(1 << m)
    for mask in range(1 << m):
        hybrid = B.copy()
        for j in range(m):
            if mask >> j & 1:
                hybrid[:, j] = x[j]
        values[mask] = forest.predict_proba_batch(hybrid).mean()

    fact = [math.factorial(k) for k in range(m + 1)]
    phi = np.zeros(m)
    for j in range(m):
        bit = 1 << j
        for mask in range(1 << m):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            w = fact[s] * fact[m - s - 1] / fact[m]
            phi[j] += w * (values[mask | bit] - values[mask])
    return ShapVector(phi=phi, base_value=float(values[0]), model_output=float(values[(1 << m) - 1]))


def global_importance(shap_rows: ShapMatrix | list[ShapVector]) -> GlobalImportance:
    """Elementwise mean of absolute contributions across rows."""
    if isinstance(shap_rows, ShapMatrix):
        phi = shap_rows.phi
    else:
        if not shap_rows:
            raise DataError("cannot compute global importance of an empty collection")
        m = shap_rows[0].n_features
        if any(v.n_features != m for v in shap_rows):
            raise DataError("inconsistent feature counts across shap vectors")
        phi = np.stack([v.phi for v in shap_rows])
    if phi.shape[0] == 0:
        raise DataError("cannot compute global importance of an empty collection")
    return GlobalImportance(weights=np.abs(phi).mean(axis=0))


def background_sample(train: Dataset, size: int = 128, seed: int = 0) -> Dataset:
    """Seeded training-row subsample used as the interventional background."""
    if size < 1:
        raise DataError("background size must be >= 1")
    if train.n_rows <= size:
        return train
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(train.n_rows, size=size, replace=False))
    return train.subset(idx)
