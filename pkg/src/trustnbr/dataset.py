"""Tabular data ingestion, z-score normalization, and the three-way data split.

CSV files are parsed into an immutable :class:`Dataset`; categorical columns
are one-hot encoded at load time. Splitting is stratified by label and fully
deterministic for a fixed seed. Normalization parameters are fitted on the
training portion only and then applied unchanged to the other parts.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with binary labels and stable row identifiers."""

    features: np.ndarray  # (n, m) float64
    labels: np.ndarray  # (n,) int64 with values in {0, 1}
    feature_names: tuple[str, ...]
    instance_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "feature_names", tuple(str(c) for c in self.feature_names))
        object.__setattr__(self, "instance_ids", tuple(str(i) for i in self.instance_ids))
        if features.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        n, m = features.shape
        if labels.shape != (n,):
            raise DataError("row count mismatch between features and labels")
        if len(self.instance_ids) != n:
            raise DataError("row count mismatch between features and instance_ids")
        if len(self.feature_names) != m:
            raise DataError("feature_names length does not match feature count")
        if n and not np.isin(labels, (0, 1)).all():
            raise DataError("non-binary label")
        if not np.isfinite(features).all():
            raise DataError("features contain missing or non-finite values")
        if len(set(self.instance_ids)) != n:
            raise DataError("duplicate instance ids")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
            instance_ids=tuple(self.instance_ids[i] for i in idx),
        )


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/test/production partition of one input dataset."""

    train: Dataset
    test: Dataset
    production: Dataset
    split_seed: int

    def __post_init__(self) -> None:
        parts = {"train": self.train, "test": self.test, "production": self.production}
        for name, part in parts.items():
            if part.n_rows == 0:
                raise DataError(f"empty split part: {name}")
        ids = [set(p.instance_ids) for p in parts.values()]
        if ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2]:
            raise DataError("split parts share instance ids")


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine transform (x - shift) / scale fitted on training data."""

    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        shift = np.asarray(self.shift, dtype=np.float64)
        scale = np.asarray(self.scale, dtype=np.float64)
        object.__setattr__(self, "shift", _frozen(shift))
        object.__setattr__(self, "scale", _frozen(scale))
        if shift.shape != scale.shape or shift.ndim != 1:
            raise DataError("normalizer shift/scale must be matching vectors")
        if not (scale > 0).all():
            raise DataError("normalizer scale must be positive for every feature")

    @property
    def n_features(self) -> int:
        return self.shift.shape[0]

    def _check(self, d: Dataset) -> None:
        if d.n_features != self.n_features:
            raise DataError(
                f"feature-count mismatch: normalizer has {self.n_features}, dataset has {d.n_features}"
            )

    def transform(self, d: Dataset) -> Dataset:
        self._check(d)
        return Dataset(
            features=(d.features - self.shift) / self.scale,
            labels=d.labels,
            feature_names=d.feature_names,
            instance_ids=d.instance_ids,
        )

    def inverse(self, d: Dataset) -> Dataset:
        self._check(d)
        return Dataset(
            features=d.features * self.scale + self.shift,
            labels=d.labels,
            feature_names=d.feature_names,
            instance_ids=d.instance_ids,
        )


def fit_normalizer(train: Dataset) -> Normalizer:
    """Fit z-score parameters on the training part; constant columns get scale 1."""
    shift = train.features.mean(axis=0)
    scale = train.features.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    return Normalizer(shift=shift, scale=scale)


def apply_normalizer(normalizer: Normalizer, d: Dataset) -> Dataset:
    return normalizer.transform(d)


def _parse_label(raw: str, row: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"non-binary label {raw!r} at row {row}") from None
    if value == 0.0:
        return 0
    if value == 1.0:
        return 1
    raise DataError(f"non-binary label {raw!r} at row {row}")


def load_csv(path: str | Path, label_column: str, impute_mean: bool = False) -> Dataset:
    """Load an RFC-4180 CSV (header row required) into a Dataset.

    The label column must contain only 0/1. Columns whose non-empty cells all
    parse as numbers become numeric features; columns where none parse are
    one-hot encoded (one indicator per distinct value, named ``col=value``).
    A column with a mix of numeric and non-numeric cells is rejected, naming
    the offending row and column. Missing cells (empty or non-finite) are
    rejected unless ``impute_mean`` is set, in which case numeric columns are
    filled with their column mean. Row numbers in error messages are 1-based
    data rows (the header is row 0).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV: header row required") from None
        rows = [row for row in reader if row]
    if label_column not in header:
        raise DataError(f"label column not found: {label_column!r}")
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    if not rows:
        raise DataError("CSV contains no data rows")
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {i} has {len(row)} cells, expected {len(header)}")

    label_idx = header.index(label_column)
    labels = [_parse_label(row[label_idx].strip(), i) for i, row in enumerate(rows, start=1)]

    names: list[str] = []
    columns: list[np.ndarray] = []
    for j, name in enumerate(header):
        if j == label_idx:
            continue
        raw = [row[j].strip() for row in rows]
        parsed = np.full(len(raw), np.nan)
        bad: list[int] = []  # 1-based rows that are present but non-numeric
        for i, cell in enumerate(raw):
            if cell == "":
                continue
            try:
                value = float(cell)
            except ValueError:
                bad.append(i + 1)
                continue
            if math.isfinite(value):
                parsed[i] = value
        n_present = sum(1 for cell in raw if cell != "")
        if bad and len(bad) < n_present:
            raise DataError(f"unparseable cell at row {bad[0]}, column {name!r}: {raw[bad[0] - 1]!r}")
        if bad:
            # Categorical column: every present cell is non-numeric.
            missing = [i + 1 for i, cell in enumerate(raw) if cell == ""]
            if missing:
                raise DataError(f"missing value at row {missing[0]}, column {name!r}")
            for level in sorted(set(raw)):
                names.append(f"{name}={level}")
                columns.append(np.array([1.0 if cell == level else 0.0 for cell in raw]))
        else:
            gaps = np.flatnonzero(~np.isfinite(parsed))
            if gaps.size:
                if not impute_mean:
                    raise DataError(f"missing value at row {gaps[0] + 1}, column {name!r}")
                present = parsed[np.isfinite(parsed)]
                if present.size == 0:
                    raise DataError(f"column {name!r} has no usable values")
                parsed[gaps] = present.mean()
            names.append(name)
            columns.append(parsed)

    if not names:
        raise DataError("CSV has no feature columns besides the label")
    features = np.column_stack(columns)
    width = max(6, len(str(len(rows))))
    ids = tuple(f"r{i:0{width}d}" for i in range(len(rows)))
    return Dataset(features=features, labels=np.array(labels), feature_names=tuple(names), instance_ids=ids)


def _allocate(quotas: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder integer allocation; ties go to the earlier part."""
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(quotas - base), kind="stable")
    for p in order[:short]:
        base[p] += 1
    return base


def split_three_way(
    d: Dataset, fractions: tuple[float, float, float] = (0.5, 0.25, 0.25), seed: int = 0
) -> SplitDataset:
    """Stratified random partition into train/test/production parts.

    Part sizes follow the fractions exactly (largest-remainder rounding); each
    part's positive count is the rounded share of the global positive rate,
    so every part is within one instance of the global rate.
    """
    f = np.asarray(fractions, dtype=np.float64)
    if f.shape != (3,) or (f <= 0).any():
        raise DataError("fractions must be three positive numbers")
    if abs(f.sum() - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {f.sum()!r}")
    n = d.n_rows
    n_pos = int(d.labels.sum())
    sizes = _allocate(n * f, n)
    if (sizes == 0).any():
        name = ("train", "test", "production")[int(np.flatnonzero(sizes == 0)[0])]
        raise DataError(f"empty split part: {name}")
    pos_counts = _allocate(sizes * (n_pos / n), n_pos) if n_pos else np.zeros(3, dtype=np.int64)
    neg_counts = sizes - pos_counts

    rng = np.random.default_rng(seed)
    pos_idx = np.flatnonzero(d.labels == 1)
    neg_idx = np.flatnonzero(d.labels == 0)
    rng.shuffle(pos_idx)
    rng.shuffle(neg_idx)
    assembled = []
    pos_at = neg_at = 0
    for p in range(3):
        chunk = np.concatenate(
            [pos_idx[pos_at : pos_at + pos_counts[p]], neg_idx[neg_at : neg_at + neg_counts[p]]]
        )
        pos_at += pos_counts[p]
        neg_at += neg_counts[p]
        assembled.append(d.subset(np.sort(chunk)))
    return SplitDataset(train=assembled[0], test=assembled[1], production=assembled[2], split_seed=seed)


def save_split_manifest(path: str | Path, split: SplitDataset) -> None:
    payload = {
        "seed": split.split_seed,
        "train_ids": list(split.train.instance_ids),
        "test_ids": list(split.test.instance_ids),
        "production_ids": list(split.production.instance_ids),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_split_manifest(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("seed", "train_ids", "test_ids", "production_ids"):
        if key not in payload:
            raise DataError(f"split manifest missing field {key!r}")
    return payload
