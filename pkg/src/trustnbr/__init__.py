"""Case-based trust evidence for classifier alerts.

For an alerted instance, retrieve the most similar labeled historical cases
under configurable explanation-aware distance functions, embed the
neighborhood in 2D for inspection, and evaluate the whole approach with a
simulated-analyst protocol.
"""

from .attribution import (
    GlobalImportance,
    ShapMatrix,
    ShapVector,
    background_sample,
    brute_force_shapley,
    global_importance,
    shap_for_dataset,
    tree_shap,
)
from .dataset import (
    Dataset,
    Normalizer,
    SplitDataset,
    apply_normalizer,
    fit_normalizer,
    load_csv,
    split_three_way,
)
from .embed import DistanceMatrix, Embedding2D, mds_embed, pairwise_distances, stress
from .errors import ArtifactError, DataError, NoAlertsError, TrustnbrError
from .forest import Forest, deserialize_forest, predict_label, predict_proba, serialize_forest, train_forest
from .retrieval import (
    Case,
    CaseBase,
    DistanceKind,
    NeighborSet,
    build_case_base,
    distance,
    retrieve_k_nearest,
    weighted_euclidean,
)
from .simuser import (
    Alert,
    AlertSet,
    ConfidenceEstimate,
    ExperimentGrid,
    GridConfig,
    build_alert_set,
    mean_average_precision,
    run_cell,
    run_grid,
    shap_cluster_diagnostic,
    unweighted_confidence,
    weighted_confidence,
)

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AlertSet",
    "ArtifactError",
    "Case",
    "CaseBase",
    "ConfidenceEstimate",
    "DataError",
    "Dataset",
    "DistanceKind",
    "DistanceMatrix",
    "Embedding2D",
    "ExperimentGrid",
    "Forest",
    "GlobalImportance",
    "GridConfig",
    "NeighborSet",
    "NoAlertsError",
    "Normalizer",
    "ShapMatrix",
    "ShapVector",
    "SplitDataset",
    "TrustnbrError",
    "apply_normalizer",
    "background_sample",
    "brute_force_shapley",
    "build_alert_set",
    "build_case_base",
    "deserialize_forest",
    "distance",
    "fit_normalizer",
    "global_importance",
    "load_csv",
    "mds_embed",
    "mean_average_precision",
    "pairwise_distances",
    "predict_label",
    "predict_proba",
    "retrieve_k_nearest",
    "run_cell",
    "run_grid",
    "serialize_forest",
    "shap_cluster_diagnostic",
    "shap_for_dataset",
    "split_three_way",
    "stress",
    "train_forest",
    "tree_shap",
    "unweighted_confidence",
    "weighted_confidence",
    "weighted_euclidean",
]
