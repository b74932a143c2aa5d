"""The case base, its four distance functions, and exact k-NN retrieval.

All four distances are weighted Euclidean metrics over either raw feature
vectors or per-prediction contribution vectors:

  FEATURES          unit weights on feature values
  SHAP              unit weights on contribution vectors
  GLOBAL_WEIGHTED   feature values weighted by mean absolute contribution
  LOCAL_WEIGHTED    feature values weighted by the query's absolute contributions

Retrieval is an exact brute-force scan; ties are broken by instance id so
results are deterministic regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .attribution import GlobalImportance, ShapMatrix, ShapVector
from .dataset import Dataset
from .errors import ArtifactError, DataError
from .ioutil import read_json, read_npz, write_json, write_npz

CASEBASE_FORMAT = "trustnbr-casebase"
CASEBASE_VERSION = 1


class DistanceKind(str, Enum):
    FEATURES = "F"
    SHAP = "S"
    GLOBAL_WEIGHTED = "G"
    LOCAL_WEIGHTED = "L"

    @classmethod
    def from_code(cls, code: str) -> "DistanceKind":
        try:
            return cls(code.upper())
        except ValueError:
            raise DataError(f"unknown distance kind {code!r}; expected one of F, S, G, L") from None


@dataclass(frozen=True)
class Case:
    """One labeled historical instance with its stored explanation."""

    instance_id: str
    features: np.ndarray
    shap: ShapVector
    true_label: int
    label_verified: bool = True
    timestamp: float | None = None

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        features.setflags(write=False)
        object.__setattr__(self, "features", features)
        if features.shape != self.shap.phi.shape:
            raise DataError("case features and shap vector lengths differ")
        if self.true_label not in (0, 1):
            raise DataError(f"true_label must be 0 or 1, got {self.true_label!r}")


class Neighbor(NamedTuple):
    case: Case
    distance: float


@dataclass(frozen=True)
class NeighborSet:
    query_id: str
    retrieval_kind: DistanceKind
    neighbors: tuple[Neighbor, ...]

    def labels(self) -> np.ndarray:
        return np.array([n.case.true_label for n in self.neighbors], dtype=np.int64)

    def distances(self) -> np.ndarray:
        return np.array([n.distance for n in self.neighbors])


class CaseBase:
    """Indexed store of cases with dense matrices for the distance scans."""

    def __init__(self, cases: Sequence[Case], global_imp: GlobalImportance):
        if not cases:
            raise DataError("empty case base")
        m = cases[0].features.shape[0]
        if any(c.features.shape[0] != m for c in cases):
            raise DataError("cases disagree on feature count")
        if global_imp.weights.shape != (m,):
            raise DataError("global importance length does not match feature count")
        ids = [c.instance_id for c in cases]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate instance ids in case base")
        self.cases = list(cases)
        self.global_importance = global_imp
        self.m = m
        self.ids = np.array(ids)
        self.features = np.vstack([c.features for c in cases])
        self.phi = np.vstack([c.shap.phi for c in cases])
        self.labels = np.array([c.true_label for c in cases], dtype=np.int64)
        self.features.setflags(write=False)
        self.phi.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.cases)

    def distances_from(self, query: Case, kind: DistanceKind) -> np.ndarray:
        """Distance from the query to every case, in case-base order."""
        if query.features.shape[0] != self.m:
            raise DataError("query feature count does not match case base")
        if kind is DistanceKind.SHAP:
            diff = self.phi - query.shap.phi
            return np.sqrt(np.sum(diff * diff, axis=1))
        diff = self.features - query.features
        if kind is DistanceKind.FEATURES:
            return np.sqrt(np.sum(diff * diff, axis=1))
        if kind is DistanceKind.GLOBAL_WEIGHTED:
            w = self.global_importance.weights
        else:
            w = np.abs(query.shap.phi)
        return np.sqrt(np.sum(w * diff * diff, axis=1))


def weighted_euclidean(w: np.ndarray, z_a: np.ndarray, z_b: np.ndarray) -> float:
    """sqrt(sum_j w_j (z_aj - z_bj)^2), the base distance for all four kinds."""
    w = np.asarray(w, dtype=np.float64)
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if not w.shape == z_a.shape == z_b.shape or w.ndim != 1:
        raise DataError(f"length mismatch: w {w.shape}, z_a {z_a.shape}, z_b {z_b.shape}")
    if (w < 0).any():
        raise DataError("weights must be non-negative")
    diff = z_a - z_b
    return float(np.sqrt(np.sum(w * diff * diff)))


def distance(kind: DistanceKind, query: Case, other: Case, cb: CaseBase) -> float:
    """Pairwise distance under one of the four configured kinds."""
    ones = np.ones(cb.m)
    if kind is DistanceKind.FEATURES:
        return weighted_euclidean(ones, query.features, other.features)
    if kind is DistanceKind.SHAP:
        return weighted_euclidean(ones, query.shap.phi, other.shap.phi)
    if kind is DistanceKind.GLOBAL_WEIGHTED:
        return weighted_euclidean(cb.global_importance.weights, query.features, other.features)
    if kind is DistanceKind.LOCAL_WEIGHTED:
        return weighted_euclidean(np.abs(query.shap.phi), query.features, other.features)
    raise DataError(f"unknown distance kind: {kind!r}")


def build_case_base(
    train: Dataset, test: Dataset | None, shap: ShapMatrix, global_imp: GlobalImportance
) -> CaseBase:
    """One case per labeled train/test instance, explanation rows aligned."""
    parts = [train] if test is None or test.n_rows == 0 else [train, test]
    n_total = sum(p.n_rows for p in parts)
    if shap.n_rows != n_total:
        raise DataError(f"shap matrix has {shap.n_rows} rows, expected {n_total}")
    cases: list[Case] = []
    row = 0
    for part in parts:
        for i in range(part.n_rows):
            cases.append(
                Case(
                    instance_id=part.instance_ids[i],
                    features=part.features[i],
                    shap=shap.row(row),
                    true_label=int(part.labels[i]),
                    label_verified=True,
                )
            )
            row += 1
    return CaseBase(cases, global_imp)


def retrieve_k_nearest(cb: CaseBase, query: Case, k: int, kind: DistanceKind) -> NeighborSet:
    """The k nearest cases under ``kind``; exact, ties broken by instance id."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    dists = cb.distances_from(query, kind)
    order = np.lexsort((cb.ids, dists))
    take = order[: min(k, len(cb))]
    neighbors = tuple(Neighbor(case=cb.cases[i], distance=float(dists[i])) for i in take)
    return NeighborSet(query_id=query.instance_id, retrieval_kind=kind, neighbors=neighbors)


def save_case_base(directory: str | Path, cb: CaseBase) -> tuple[Path, Path]:
    """Persist as a JSON manifest plus a binary matrix container."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    npz_path = directory / "casebase.npz"
    json_path = directory / "casebase.json"
    write_npz(
        npz_path,
        features=cb.features,
        phi=cb.phi,
        labels=cb.labels,
        base_values=np.array([c.shap.base_value for c in cb.cases]),
        model_outputs=np.array([c.shap.model_output for c in cb.cases]),
        label_verified=np.array([c.label_verified for c in cb.cases], dtype=np.bool_),
        global_importance=cb.global_importance.weights,
    )
    write_json(
        json_path,
        {
            "format": CASEBASE_FORMAT,
            "version": CASEBASE_VERSION,
            "n_cases": len(cb),
            "n_features": cb.m,
            "instance_ids": [c.instance_id for c in cb.cases],
            "matrices": npz_path.name,
        },
    )
    return json_path, npz_path


def load_case_base(directory: str | Path) -> CaseBase:
    directory = Path(directory)
    json_path = directory / "casebase.json"
    if not json_path.exists():
        raise ArtifactError(f"missing case base manifest: {json_path}")
    manifest = read_json(json_path)
    if manifest.get("format") != CASEBASE_FORMAT or manifest.get("version") != CASEBASE_VERSION:
        raise ArtifactError("unsupported case base container")
    arrays = read_npz(directory / manifest["matrices"])
    ids = manifest["instance_ids"]
    n = int(manifest["n_cases"])
    if len(ids) != n or arrays["features"].shape[0] != n:
        raise ArtifactError("case base manifest and matrices disagree on row count")
    cases = [
        Case(
            instance_id=ids[i],
            features=arrays["features"][i],
            shap=ShapVector(
                phi=arrays["phi"][i],
                base_value=float(arrays["base_values"][i]),
                model_output=float(arrays["model_outputs"][i]),
            ),
            true_label=int(arrays["labels"][i]),
            label_verified=bool(arrays["label_verified"][i]),
        )
        for i in range(n)
    ]
    return CaseBase(cases, GlobalImportance(weights=arrays["global_importance"]))
