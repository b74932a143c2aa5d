"""Synthetic benchmark generator used by the tests, docs, and demos.

Produces a Phoneme-style task: a handful of continuous features, a smooth
nonlinear class boundary, and irreducible label noise, so that model
confidence is informative but imperfect and neighborhoods carry real signal.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import Dataset


def make_surrogate(n_rows: int = 2000, seed: int = 0, flip_rate: float = 0.02) -> Dataset:
    """Multi-scale class structure: labels depend on the sign of a mean-zero
    field with pockets of both classes, so nearby cases are informative while
    a wide neighborhood average washes out toward the base rate. A small
    fraction of labels is flipped as irreducible noise."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_rows, 5))
    field = (
        1.6 * np.sin(2.0 * x[:, 0]) * np.sin(2.0 * x[:, 1])
        + 1.3 * np.sin(2.2 * x[:, 2]) * np.cos(1.8 * x[:, 3])
        + 1.0 * np.sin(2.6 * x[:, 4])
    )
    labels = (field > 0).astype(np.int64)
    flips = rng.random(n_rows) < flip_rate
    labels = np.where(flips, 1 - labels, labels)
    width = max(6, len(str(n_rows)))
    return Dataset(
        features=x,
        labels=labels,
        feature_names=tuple(f"v{j}" for j in range(5)),
        instance_ids=tuple(f"r{i:0{width}d}" for i in range(n_rows)),
    )


def write_surrogate_csv(path: str | Path, n_rows: int = 2000, seed: int = 0) -> Path:
    d = make_surrogate(n_rows=n_rows, seed=seed)
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(d.feature_names) + ["label"])
        for i in range(d.n_rows):
            writer.writerow([repr(float(v)) for v in d.features[i]] + [int(d.labels[i])])
    return path
