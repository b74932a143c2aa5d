"""Simulated-analyst evaluation of neighborhood evidence.

The protocol: build the alert set from production rows the model flags
positive, estimate for each alert how confident an analyst reading the
neighborhood would be that it is a true positive, and score those confidence
values against ground truth with mean average precision, side by side with
the model's own confidence. Two analyst models are available: the plain
positive fraction of the retrieved neighbors, and the inverse-distance
weighted fraction (distances taken under the visualization's distance kind).

``run_grid`` sweeps every (retrieval kind, visualization kind, k)
combination, where visualization kind ``U`` stands for the distance-blind
analyst using the plain fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .attribution import ShapVector, shap_for_dataset
from .dataset import Dataset
from .errors import DataError, NoAlertsError
from .forest import Forest
from .retrieval import Case, CaseBase, DistanceKind, NeighborSet, distance, retrieve_k_nearest

UNWEIGHTED_CODE = "U"
VIZ_CHOICES: tuple[DistanceKind | None, ...] = (
    DistanceKind.FEATURES,
    DistanceKind.SHAP,
    DistanceKind.GLOBAL_WEIGHTED,
    DistanceKind.LOCAL_WEIGHTED,
    None,
)


def viz_code(kind: DistanceKind | None) -> str:
    return UNWEIGHTED_CODE if kind is None else kind.value


class ConfidenceMode(str, Enum):
    UNWEIGHTED = "unweighted"
    INVERSE_DISTANCE = "inverse_distance"


@dataclass(frozen=True)
class ConfidenceEstimate:
    value: float
    mode: ConfidenceMode
    k_used: int
    epsilon_applied: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise DataError(f"confidence outside [0, 1]: {self.value}")


@dataclass(frozen=True)
class Alert:
    instance_id: str
    features: np.ndarray
    model_confidence: float
    true_label: int  # ground truth, used only for scoring
    shap: ShapVector

    def as_case(self) -> Case:
        return Case(
            instance_id=self.instance_id,
            features=self.features,
            shap=self.shap,
            true_label=self.true_label,
            label_verified=False,
        )


@dataclass(frozen=True)
class AlertSet:
    alerts: tuple[Alert, ...]
    threshold: float

    def __len__(self) -> int:
        return len(self.alerts)

    @property
    def true_labels(self) -> np.ndarray:
        return np.array([a.true_label for a in self.alerts], dtype=np.int64)

    @property
    def model_confidences(self) -> np.ndarray:
        return np.array([a.model_confidence for a in self.alerts])


def build_alert_set(
    forest: Forest, production: Dataset, threshold: float = 0.5, background: Dataset | np.ndarray = None
) -> AlertSet:
    """Production rows with predicted label 1, with confidence and explanation attached."""
    if background is None:
        raise DataError("build_alert_set needs a background sample for the explanations")
    if production.n_rows == 0:
        raise DataError("empty production data")
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold must be in [0, 1], got {threshold}")
    proba = forest.predict_proba_batch(production.features)
    flagged = np.flatnonzero(proba >= threshold)
    if flagged.size == 0:
        raise NoAlertsError(f"no production instance reaches the alert threshold {threshold}")
    subset = production.subset(flagged)
    shap = shap_for_dataset(forest, subset, background)
    alerts = tuple(
        Alert(
            instance_id=subset.instance_ids[i],
            features=subset.features[i],
            model_confidence=float(proba[flagged[i]]),
            true_label=int(subset.labels[i]),
            shap=shap.row(i),
        )
        for i in range(subset.n_rows)
    )
    return AlertSet(alerts=alerts, threshold=threshold)


def unweighted_confidence(neighbors: NeighborSet) -> ConfidenceEstimate:
    """Fraction of retrieved neighbors whose true class is positive."""
    if not neighbors.neighbors:
        raise DataError("empty neighbor set")
    y = neighbors.labels()
    return ConfidenceEstimate(
        value=float(y.sum() / y.shape[0]),
        mode=ConfidenceMode.UNWEIGHTED,
        k_used=y.shape[0],
    )


def weighted_confidence(
    neighbors: NeighborSet,
    distances: Sequence[float] | None = None,
    epsilon_divisor: float = 10.0,
) -> ConfidenceEstimate:
    """Inverse-distance weighted positive fraction of the retrieved neighbors.

    ``distances`` overrides the retrieval distances (used when the
    visualization applies a different distance kind). Zero distances are
    replaced by (smallest non-zero distance)/``epsilon_divisor`` so an
    identical neighbor dominates without silencing the rest; if every
    distance is zero the estimate falls back to the unweighted fraction.
    """
    if not neighbors.neighbors:
        raise DataError("empty neighbor set")
    d = np.asarray(neighbors.distances() if distances is None else distances, dtype=np.float64)
    if d.shape[0] != len(neighbors.neighbors):
        raise DataError("distance list does not match neighbor count")
    if (d < 0).any():
        raise DataError("negative distance")
    if epsilon_divisor <= 0:
        raise DataError("epsilon_divisor must be positive")
    y = neighbors.labels()
    k = y.shape[0]
    if (d == 0.0).all():
        return ConfidenceEstimate(
            value=float(y.sum() / k), mode=ConfidenceMode.UNWEIGHTED, k_used=k
        )
    if (d == d[0]).all():
        # Uniform weights cancel; computing the plain fraction keeps the
        # equal-distance case exactly equal to the unweighted estimator.
        return ConfidenceEstimate(
            value=float(y.sum() / k), mode=ConfidenceMode.INVERSE_DISTANCE, k_used=k
        )
    zero = d == 0.0
    if zero.any():
        d = d.copy()
        d[zero] = d[~zero].min() / epsilon_divisor
    w = 1.0 / d
    value = float(np.sum(w * y) / np.sum(w))
    value = min(max(value, 0.0), 1.0)
    return ConfidenceEstimate(
        value=value,
        mode=ConfidenceMode.INVERSE_DISTANCE,
        k_used=k,
        epsilon_applied=bool(zero.any()),
    )


def mean_average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision of ``labels`` ranked by descending ``scores``.

    Ties keep their original relative order. With a single ranked list this
    equals the mean average precision of the experiment's one query.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be equal-length vectors")
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    if labels.sum() == 0:
        raise DataError("average precision undefined without positive labels")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    hits = np.cumsum(ranked)
    ranks = np.arange(1, ranked.shape[0] + 1)
    return float(np.mean((hits / ranks)[ranked == 1]))


def run_cell(
    cb: CaseBase,
    alert_set: AlertSet,
    retrieval_kind: DistanceKind,
    viz_kind: DistanceKind | None,
    k: int,
    epsilon_divisor: float = 10.0,
) -> float:
    """User MAP for one (retrieval kind, visualization kind, k) combination.

    ``viz_kind=None`` is the distance-blind analyst (plain fraction); when the
    visualization reuses the retrieval kind the retrieval distances are used
    directly instead of being recomputed.
    """
    confidences = []
    for alert in alert_set.alerts:
        query = alert.as_case()
        neighbors = retrieve_k_nearest(cb, query, k, retrieval_kind)
        if viz_kind is None:
            est = unweighted_confidence(neighbors)
        elif viz_kind is retrieval_kind:
            est = weighted_confidence(neighbors, epsilon_divisor=epsilon_divisor)
        else:
            viz_d = [distance(viz_kind, query, nb.case, cb) for nb in neighbors.neighbors]
            est = weighted_confidence(neighbors, distances=viz_d, epsilon_divisor=epsilon_divisor)
        confidences.append(est.value)
    return mean_average_precision(confidences, alert_set.true_labels)


@dataclass(frozen=True)
class GridConfig:
    k_values: tuple[int, ...]
    retrieval_kinds: tuple[DistanceKind, ...] = tuple(DistanceKind)
    viz_kinds: tuple[DistanceKind | None, ...] = VIZ_CHOICES
    epsilon_divisor: float = 10.0

    def __post_init__(self) -> None:
        ks = tuple(sorted(set(int(k) for k in self.k_values)))
        if not ks or ks[0] < 1:
            raise DataError("k grid must contain integers >= 1")
        object.__setattr__(self, "k_values", ks)


@dataclass(frozen=True)
class ExperimentGrid:
    """User MAP per (retrieval, viz, k) cell plus the constant model MAP."""

    k_values: tuple[int, ...]
    retrieval_codes: tuple[str, ...]
    viz_codes: tuple[str, ...]
    user_map: dict  # (retrieval code, viz code, k) -> float
    model_map: float
    manifest: dict

    def delta(self, retrieval: str, viz: str, k: int) -> float:
        return self.user_map[(retrieval, viz, k)] - self.model_map

    def mean_delta_over_k(self, retrieval: str, viz: str) -> float:
        values = [self.user_map[(retrieval, viz, k)] for k in self.k_values]
        return float(np.mean(values)) - self.model_map

    def rows(self) -> list[tuple]:
        """Long-form rows: (retrieval, viz, k, user_map, model_map, delta)."""
        out = []
        for retrieval in self.retrieval_codes:
            for viz in self.viz_codes:
                for k in self.k_values:
                    user = self.user_map[(retrieval, viz, k)]
                    out.append((retrieval, viz, k, user, self.model_map, user - self.model_map))
        return out

    def heatmap_rows(self) -> list[tuple]:
        """Summary rows: (retrieval, viz, mean delta over the k grid)."""
        return [
            (retrieval, viz, self.mean_delta_over_k(retrieval, viz))
            for retrieval in self.retrieval_codes
            for viz in self.viz_codes
        ]


def _prefix_weighted(d: np.ndarray, y: np.ndarray, k_values: Sequence[int], divisor: float) -> np.ndarray:
    """Weighted confidence for every prefix size in ``k_values`` of one ranking."""
    n = d.shape[0]
    nonzero = d > 0
    w = np.zeros(n)
    w[nonzero] = 1.0 / d[nonzero]
    cum_w = np.cumsum(w)
    cum_wy = np.cumsum(w * y)
    cum_zero = np.cumsum(~nonzero)
    cum_zero_pos = np.cumsum(~nonzero & (y == 1))
    cum_y = np.cumsum(y)
    min_nonzero = np.minimum.accumulate(np.where(nonzero, d, np.inf))
    out = np.empty(len(k_values))
    for i, k in enumerate(k_values):
        j = min(k, n) - 1
        if cum_zero[j] == j + 1:
            out[i] = cum_y[j] / (j + 1)
        elif cum_zero[j] == 0:
            out[i] = cum_wy[j] / cum_w[j]
        else:
            eps = min_nonzero[j] / divisor
            out[i] = (cum_wy[j] + cum_zero_pos[j] / eps) / (cum_w[j] + cum_zero[j] / eps)
    return np.clip(out, 0.0, 1.0)


def run_grid(cb: CaseBase, alert_set: AlertSet, config: GridConfig, manifest: dict | None = None) -> ExperimentGrid:
    """The full sweep; equivalent to ``run_cell`` per cell but shares work."""
    alerts = alert_set.alerts
    if not alerts:
        raise DataError("empty alert set")
    labels = alert_set.true_labels
    model_map = mean_average_precision(alert_set.model_confidences, labels)
    ks = config.k_values
    n_alerts = len(alerts)

    dvecs: list[dict[DistanceKind, np.ndarray]] = []
    orders: list[dict[DistanceKind, np.ndarray]] = []
    needed = set(config.retrieval_kinds) | {v for v in config.viz_kinds if v is not None}
    for alert in alerts:
        query = alert.as_case()
        per_kind = {kind: cb.distances_from(query, kind) for kind in needed}
        dvecs.append(per_kind)
        orders.append(
            {kind: np.lexsort((cb.ids, per_kind[kind])) for kind in config.retrieval_kinds}
        )

    user_map: dict = {}
    for retrieval in config.retrieval_kinds:
        for viz in config.viz_kinds:
            conf = np.empty((n_alerts, len(ks)))
            for a, alert in enumerate(alerts):
                order = orders[a][retrieval]
                y = cb.labels[order]
                if viz is None:
                    cum_y = np.cumsum(y)
                    sizes = np.minimum(np.asarray(ks), len(cb))
                    conf[a] = cum_y[sizes - 1] / sizes
                else:
                    conf[a] = _prefix_weighted(
                        dvecs[a][viz][order], y, ks, config.epsilon_divisor
                    )
            for i, k in enumerate(ks):
                user_map[(retrieval.value, viz_code(viz), k)] = mean_average_precision(conf[:, i], labels)

    grid_manifest = dict(manifest or {})
    grid_manifest.update(
        {
            "k_values": list(ks),
            "epsilon_divisor": config.epsilon_divisor,
            "n_alerts": n_alerts,
            "alert_positive_rate": float(labels.mean()),
            "model_map": model_map,
            "case_base_size": len(cb),
        }
    )
    return ExperimentGrid(
        k_values=ks,
        retrieval_codes=tuple(k.value for k in config.retrieval_kinds),
        viz_codes=tuple(viz_code(v) for v in config.viz_kinds),
        user_map=user_map,
        model_map=model_map,
        manifest=grid_manifest,
    )


@dataclass(frozen=True)
class ClusterStat:
    cluster: int
    size: int
    inertia: float
    error_rate: float


@dataclass(frozen=True)
class ClusterDiagnostic:
    assignments: np.ndarray
    clusters: tuple[ClusterStat, ...]
    total_inertia: float


def _kmeans(rows: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100):
    n = rows.shape[0]
    centers = np.empty((k, rows.shape[1]))
    centers[0] = rows[rng.integers(n)]
    d2 = np.sum((rows - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0:
            centers[c] = rows[rng.integers(n)]
        else:
            centers[c] = rows[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((rows - centers[c]) ** 2, axis=1))
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dist2 = np.sum((rows[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dist2, axis=1)
        for c in range(k):
            members = new_assign == c
            if members.any():
                centers[c] = rows[members].mean(axis=0)
            else:
                # Re-seed an empty cluster with the worst-fit point.
                worst = np.argmax(dist2[np.arange(n), new_assign])
                centers[c] = rows[worst]
                new_assign[worst] = c
        if (new_assign == assign).all():
            break
        assign = new_assign
    return assign, centers


def shap_cluster_diagnostic(
    shap_matrix: np.ndarray,
    true_labels: Sequence[int],
    predicted_labels: Sequence[int],
    k_clusters: int = 10,
    seed: int = 0,
) -> ClusterDiagnostic:
    """k-means over contribution vectors with per-cluster model error rates.

    Supports the observation that model performance varies across groups of
    instances that are explained similarly.
    """
    rows = np.asarray(getattr(shap_matrix, "phi", shap_matrix), dtype=np.float64)
    y_true = np.asarray(true_labels, dtype=np.int64)
    y_pred = np.asarray(predicted_labels, dtype=np.int64)
    if rows.ndim != 2:
        raise DataError("shap matrix must be 2-d")
    n = rows.shape[0]
    if y_true.shape != (n,) or y_pred.shape != (n,):
        raise DataError("labels must align with shap matrix rows")
    if k_clusters < 1 or n < k_clusters:
        raise DataError(f"need at least {k_clusters} rows for {k_clusters} clusters")
    assign, centers = _kmeans(rows, k_clusters, np.random.default_rng(seed))
    stats = []
    total = 0.0
    for c in range(k_clusters):
        members = assign == c
        inertia = float(np.sum((rows[members] - centers[c]) ** 2))
        total += inertia
        stats.append(
            ClusterStat(
                cluster=c,
                size=int(members.sum()),
                inertia=inertia,
                error_rate=float((y_true[members] != y_pred[members]).mean()),
            )
        )
    return ClusterDiagnostic(assignments=assign, clusters=tuple(stats), total_inertia=total)
