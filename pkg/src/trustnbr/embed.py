"""2D embedding of a retrieved neighborhood by stress majorization (SMACOF).

The initial configuration comes from classical scaling (double centering plus
the top two eigenvectors); each SMACOF iteration applies the Guttman
transform, which never increases raw stress. The reported ``stress`` field is
the normalized residual in [0, 1] (0 = distances reproduced exactly).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .retrieval import Case, CaseBase, DistanceKind


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray  # (n, n) symmetric, zero diagonal, non-negative

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError("distance matrix must be square")
        if values.shape[0] < 2:
            raise DataError("distance matrix needs at least 2 items")
        if not np.allclose(values, values.T, atol=1e-12, rtol=0.0):
            raise DataError("distance matrix must be symmetric")
        if (np.diag(values) != 0).any():
            raise DataError("distance matrix diagonal must be zero")
        if (values < 0).any():
            raise DataError("distance matrix entries must be non-negative")
        values = (values + values.T) / 2.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Embedding2D:
    coords: np.ndarray  # (n, 2), centered at the origin
    stress: float  # normalized stress of coords against the input matrix
    iterations_used: int
    converged: bool
    raw_stress_history: tuple[float, ...] = ()  # raw stress before and after each iteration


def pairwise_distances(
    items: Sequence[Case], kind: DistanceKind, cb: CaseBase, local_weight_query: Case | None = None
) -> DistanceMatrix:
    """All pairwise distances among ``items`` under ``kind``.

    For LOCAL_WEIGHTED the weights come from ``local_weight_query`` (the
    alerted instance) for every pair, not from the row instance.
    """
    if len(items) < 2:
        raise DataError("need at least 2 items for pairwise distances")
    n = len(items)
    if kind is DistanceKind.LOCAL_WEIGHTED:
        if local_weight_query is None:
            raise DataError("LOCAL_WEIGHTED pairwise distances need the query instance for weighting")
        w = np.abs(local_weight_query.shap.phi)
        vectors = np.vstack([c.features for c in items])
    elif kind is DistanceKind.SHAP:
        w = np.ones(cb.m)
        vectors = np.vstack([c.shap.phi for c in items])
    elif kind is DistanceKind.GLOBAL_WEIGHTED:
        w = cb.global_importance.weights
        vectors = np.vstack([c.features for c in items])
    else:
        w = np.ones(cb.m)
        vectors = np.vstack([c.features for c in items])
    out = np.zeros((n, n))
    for i in range(n):
        diff = vectors[i + 1 :] - vectors[i]
        d = np.sqrt(np.sum(w * diff * diff, axis=1))
        out[i, i + 1 :] = d
        out[i + 1 :, i] = d
    return DistanceMatrix(values=out)


def stress(dm: DistanceMatrix, coords: np.ndarray) -> float:
    """Normalized stress: sqrt(sum (d - delta)^2 / sum delta^2) over pairs i<j."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (dm.n, 2):
        raise DataError(f"coords shape {coords.shape} does not match ({dm.n}, 2)")
    iu = np.triu_indices(dm.n, k=1)
    target = dm.values[iu]
    embedded = _euclidean(coords)[iu]
    denom = np.sum(target * target)
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(np.sum((embedded - target) ** 2) / denom))


def _euclidean(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _raw_stress(target: np.ndarray, coords: np.ndarray) -> float:
    iu = np.triu_indices(target.shape[0], k=1)
    return float(np.sum((_euclidean(coords)[iu] - target[iu]) ** 2))


def _classical_init(target: np.ndarray) -> np.ndarray:
    n = target.shape[0]
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ (target * target) @ centering
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:2]
    lam = np.clip(evals[order], 0.0, None)
    coords = evecs[:, order] * np.sqrt(lam)
    if coords.shape[1] < 2:
        coords = np.column_stack([coords, np.zeros(n)])
    return coords


def mds_embed(dm: DistanceMatrix, seed: int = 0, max_iter: int = 300, eps: float = 1e-6) -> Embedding2D:
    """SMACOF embedding into the plane; raw stress is non-increasing per iteration."""
    target = dm.values
    n = dm.n
    if (target == 0).all():
        # Legal degenerate input (all items identical): coincident points.
        coords = np.zeros((n, 2))
        return Embedding2D(coords=coords, stress=0.0, iterations_used=0, converged=True,
                           raw_stress_history=(0.0,))

    coords = _classical_init(target)
    # Classical scaling can collapse points that the targets keep apart (for
    # strongly non-Euclidean inputs); jitter those apart so SMACOF can move them.
    embedded = _euclidean(coords)
    iu = np.triu_indices(n, k=1)
    if ((embedded[iu] == 0) & (target[iu] > 0)).any():
        rng = np.random.default_rng(seed)
        coords = coords + rng.normal(scale=1e-3 * target.max(), size=coords.shape)
    coords -= coords.mean(axis=0)

    sigma = _raw_stress(target, coords)
    history = [sigma]
    converged = sigma == 0.0
    iterations = 0
    while not converged and iterations < max_iter:
        iterations += 1
        embedded = _euclidean(coords)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(embedded > 0, target / np.where(embedded > 0, embedded, 1.0), 0.0)
        b = -ratio
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        coords = (b @ coords) / n
        new_sigma = _raw_stress(target, coords)
        history.append(new_sigma)
        if new_sigma == 0.0 or (sigma > 0 and (sigma - new_sigma) / sigma < eps):
            converged = True
        sigma = new_sigma
    coords = coords - coords.mean(axis=0)
    return Embedding2D(
        coords=coords,
        stress=stress(dm, coords),
        iterations_used=iterations,
        converged=converged,
        raw_stress_history=tuple(history),
    )
