import numpy as np
import pytest

from trustnbr.attribution import GlobalImportance, ShapVector
from trustnbr.dataset import Dataset
from trustnbr.forest import Forest, Tree
from trustnbr.retrieval import Case, CaseBase


def make_dataset(n: int, m: int, seed: int = 0, label_rule=None) -> Dataset:
    """Random dataset; labels from a signal on feature 0 unless a rule is given."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    if label_rule is None:
        y = (X[:, 0] + rng.normal(scale=0.5, size=n) > 0).astype(np.int64)
    else:
        y = label_rule(X, rng).astype(np.int64)
    if y.min() == y.max():  # keep both classes present for forest training
        y[0] = 1 - y[0]
    return Dataset(
        features=X,
        labels=y,
        feature_names=tuple(f"f{j}" for j in range(m)),
        instance_ids=tuple(f"i{i:05d}" for i in range(n)),
    )


def leaf_tree(value: float, n_samples: int = 1) -> Tree:
    return Tree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([np.nan]),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        value=np.array([value]),
        n_samples=np.array([n_samples], dtype=np.int64),
    )


def stump_tree(feature: int, threshold: float, left_value: float, right_value: float) -> Tree:
    return Tree(
        feature=np.array([feature, -1, -1], dtype=np.int32),
        threshold=np.array([threshold, np.nan, np.nan]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        value=np.array([0.5, left_value, right_value]),
        n_samples=np.array([2, 1, 1], dtype=np.int64),
    )


def make_case(instance_id: str, features, phi, true_label: int, label_verified: bool = True) -> Case:
    features = np.asarray(features, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    return Case(
        instance_id=instance_id,
        features=features,
        shap=ShapVector(phi=phi, base_value=0.5, model_output=0.5 + phi.sum()),
        true_label=true_label,
        label_verified=label_verified,
    )


def make_case_base(features: np.ndarray, phi: np.ndarray, labels, ids=None) -> CaseBase:
    features = np.asarray(features, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    if ids is None:
        ids = [f"c{i:05d}" for i in range(n)]
    cases = [make_case(ids[i], features[i], phi[i], int(labels[i])) for i in range(n)]
    weights = np.abs(phi).mean(axis=0) if n else np.zeros(phi.shape[1])
    return CaseBase(cases, GlobalImportance(weights=weights))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
