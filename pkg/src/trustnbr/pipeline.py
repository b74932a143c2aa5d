"""Stepwise artifact pipeline: prepare -> train -> explain -> casebase -> experiment.

Each step records its parameters and the SHA-256 of every file it writes in
``manifest.json`` at the output-directory root. A step re-run with identical
parameters and intact outputs is a no-op; a step whose upstream files no
longer match their recorded hashes refuses to run. All file writes are
atomic (write-to-temp + rename) and byte-deterministic, so re-executing any
command under an identical manifest reproduces identical bytes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import ShapMatrix, background_sample, global_importance, shap_for_dataset
from .dataset import Dataset, fit_normalizer, load_csv, save_split_manifest, split_three_way
from .errors import ArtifactError, DataError
from .forest import DEFAULT_PARAMS, Forest, deserialize_forest, serialize_forest, train_forest
from .ioutil import (
    atomic_write_bytes,
    atomic_write_text,
    read_json,
    read_npz,
    sha256_file,
    write_json,
    write_npz,
)
from .retrieval import CaseBase, build_case_base, load_case_base, save_case_base
from .simuser import AlertSet, GridConfig, build_alert_set, run_grid

MANIFEST_NAME = "manifest.json"

DATA_NPZ = "dataset/data.npz"
SPLIT_JSON = "dataset/split.json"
NORMALIZER_JSON = "dataset/normalizer.json"
FOREST_JSON = "forest.json"
SHAP_NPZ = "shap/shap.npz"
SHAP_JSON = "shap/shap.json"
CASEBASE_JSON = "casebase/casebase.json"
CASEBASE_NPZ = "casebase/casebase.npz"
GRID_CSV = "experiment/grid.csv"
HEATMAP_CSV = "experiment/heatmap.csv"
CURVES_CSV = "experiment/curves.csv"
EXPERIMENT_JSON = "experiment/experiment_manifest.json"


def _manifest_path(out_dir: Path) -> Path:
    return out_dir / MANIFEST_NAME


def load_manifest(out_dir: str | Path) -> dict:
    path = _manifest_path(Path(out_dir))
    if not path.exists():
        raise ArtifactError(f"missing artifact manifest: {path}")
    return read_json(path)


def _save_manifest(out_dir: Path, manifest: dict) -> None:
    write_json(_manifest_path(out_dir), manifest)


def _hash_outputs(out_dir: Path, relpaths: list[str]) -> dict[str, str]:
    return {rel: sha256_file(out_dir / rel) for rel in relpaths}


def _verify_files(out_dir: Path, recorded: dict[str, str], context: str) -> None:
    for rel, digest in recorded.items():
        path = out_dir / rel
        if not path.exists():
            raise ArtifactError(f"{context}: missing artifact {rel}")
        actual = sha256_file(path)
        if actual != digest:
            raise ArtifactError(f"{context}: hash mismatch for {rel} (expected {digest[:12]}..., got {actual[:12]}...)")


def _step_cached(out_dir: Path, manifest: dict, step: str, params: dict) -> bool:
    entry = manifest.get("steps", {}).get(step)
    if not entry or entry.get("params") != params:
        return False
    try:
        _verify_files(out_dir, entry.get("outputs", {}), f"step {step!r}")
    except ArtifactError:
        return False
    return True


def _require_step(manifest: dict, step: str) -> dict:
    entry = manifest.get("steps", {}).get(step)
    if not entry:
        raise ArtifactError(f"upstream step {step!r} has not been run; run it first")
    return entry


def _record_step(
    out_dir: Path, manifest: dict, step: str, params: dict, outputs: list[str], upstream: dict[str, str]
) -> None:
    manifest.setdefault("steps", {})[step] = {
        "params": params,
        "upstream": upstream,
        "outputs": _hash_outputs(out_dir, outputs),
    }
    _save_manifest(out_dir, manifest)


def prepare(
    csv_path: str | Path,
    out_dir: str | Path,
    label_column: str,
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25),
    seed: int = 7,
    impute_mean: bool = False,
) -> bool:
    """Load, split, normalize; returns True when served from cache."""
    csv_path = Path(csv_path)
    out_dir = Path(out_dir)
    if not csv_path.exists():
        raise DataError(f"no such file: {csv_path}")
    dataset_hash = sha256_file(csv_path)
    params = {
        "label_column": label_column,
        "fractions": list(fractions),
        "seed": seed,
        "impute_mean": impute_mean,
        "dataset_sha256": dataset_hash,
    }
    manifest: dict
    if _manifest_path(out_dir).exists():
        manifest = load_manifest(out_dir)
        if manifest.get("dataset", {}).get("sha256") not in (None, dataset_hash):
            raise ArtifactError(f"output dir {out_dir} was prepared from a different dataset")
        if _step_cached(out_dir, manifest, "prepare", params):
            return True
    else:
        manifest = {"tool": "trustnbr", "tool_version": __version__}

    full = load_csv(csv_path, label_column, impute_mean=impute_mean)
    split = split_three_way(full, fractions, seed=seed)
    normalizer = fit_normalizer(split.train)
    train = normalizer.transform(split.train)
    test = normalizer.transform(split.test)
    production = normalizer.transform(split.production)

    (out_dir / "dataset").mkdir(parents=True, exist_ok=True)
    write_npz(
        out_dir / DATA_NPZ,
        train_features=train.features,
        train_labels=train.labels,
        train_ids=np.array(train.instance_ids),
        test_features=test.features,
        test_labels=test.labels,
        test_ids=np.array(test.instance_ids),
        production_features=production.features,
        production_labels=production.labels,
        production_ids=np.array(production.instance_ids),
        feature_names=np.array(train.feature_names),
    )
    save_split_manifest(out_dir / SPLIT_JSON, split)
    write_json(
        out_dir / NORMALIZER_JSON,
        {"shift": normalizer.shift.tolist(), "scale": normalizer.scale.tolist()},
    )
    manifest["dataset"] = {
        "source_path": str(csv_path),
        "sha256": dataset_hash,
        "label_column": label_column,
        "n_rows": full.n_rows,
        "n_features": full.n_features,
    }
    _record_step(out_dir, manifest, "prepare", params, [DATA_NPZ, SPLIT_JSON, NORMALIZER_JSON], upstream={})
    return False


def _load_part(arrays: dict, part: str, feature_names: tuple[str, ...]) -> Dataset:
    return Dataset(
        features=arrays[f"{part}_features"],
        labels=arrays[f"{part}_labels"],
        feature_names=feature_names,
        instance_ids=tuple(str(s) for s in arrays[f"{part}_ids"]),
    )


def load_prepared(out_dir: str | Path) -> tuple[Dataset, Dataset, Dataset]:
    """The normalized train/test/production parts written by ``prepare``."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    entry = _require_step(manifest, "prepare")
    _verify_files(out_dir, entry["outputs"], "prepare outputs")
    arrays = read_npz(out_dir / DATA_NPZ)
    names = tuple(str(s) for s in arrays["feature_names"])
    return (
        _load_part(arrays, "train", names),
        _load_part(arrays, "test", names),
        _load_part(arrays, "production", names),
    )


def train(out_dir: str | Path, params: dict | None = None, seed: int = 13) -> bool:
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    prepare_entry = _require_step(manifest, "prepare")
    merged = dict(DEFAULT_PARAMS)
    merged.update(params or {})
    step_params = {"forest": merged, "seed": seed}
    if _step_cached(out_dir, manifest, "train", step_params):
        return True
    _verify_files(out_dir, prepare_entry["outputs"], "prepare outputs")
    train_part, _, _ = load_prepared(out_dir)
    forest = train_forest(train_part, merged, seed=seed)
    atomic_write_bytes(out_dir / FOREST_JSON, serialize_forest(forest))
    _record_step(out_dir, manifest, "train", step_params, [FOREST_JSON], upstream=dict(prepare_entry["outputs"]))
    return False


def load_forest(out_dir: str | Path) -> Forest:
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    entry = _require_step(manifest, "train")
    _verify_files(out_dir, entry["outputs"], "train outputs")
    return deserialize_forest((out_dir / FOREST_JSON).read_bytes())


def explain(out_dir: str | Path, background_size: int = 128, background_seed: int = 29) -> bool:
    """Contribution vectors for every prospective case (train + test rows)."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    prepare_entry = _require_step(manifest, "prepare")
    train_entry = _require_step(manifest, "train")
    step_params = {"background_size": background_size, "background_seed": background_seed}
    if _step_cached(out_dir, manifest, "explain", step_params):
        return True
    upstream = dict(prepare_entry["outputs"]) | dict(train_entry["outputs"])
    _verify_files(out_dir, upstream, "upstream of explain")
    train_part, test_part, _ = load_prepared(out_dir)
    forest = load_forest(out_dir)
    background = background_sample(train_part, size=background_size, seed=background_seed)
    shap_train = shap_for_dataset(forest, train_part, background)
    shap_test = shap_for_dataset(forest, test_part, background)
    (out_dir / "shap").mkdir(parents=True, exist_ok=True)
    write_npz(
        out_dir / SHAP_NPZ,
        phi=np.vstack([shap_train.phi, shap_test.phi]),
        model_outputs=np.concatenate([shap_train.model_outputs, shap_test.model_outputs]),
        base_value=np.array([shap_train.base_value]),
        background_features=background.features,
    )
    write_json(
        out_dir / SHAP_JSON,
        {
            "format": "trustnbr-shap",
            "version": 1,
            "n_rows": shap_train.n_rows + shap_test.n_rows,
            "background_size": background.n_rows,
            "background_seed": background_seed,
            "matrices": "shap.npz",
        },
    )
    _record_step(out_dir, manifest, "explain", step_params, [SHAP_NPZ, SHAP_JSON], upstream=upstream)
    return False


def load_shap(out_dir: str | Path) -> tuple[ShapMatrix, np.ndarray]:
    """The persisted case explanations and the background matrix they used."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    entry = _require_step(manifest, "explain")
    _verify_files(out_dir, entry["outputs"], "explain outputs")
    arrays = read_npz(out_dir / SHAP_NPZ)
    matrix = ShapMatrix(
        phi=arrays["phi"],
        base_value=float(arrays["base_value"][0]),
        model_outputs=arrays["model_outputs"],
    )
    return matrix, arrays["background_features"]


def casebase(out_dir: str | Path) -> bool:
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    prepare_entry = _require_step(manifest, "prepare")
    explain_entry = _require_step(manifest, "explain")
    step_params: dict = {}
    if _step_cached(out_dir, manifest, "casebase", step_params):
        return True
    upstream = dict(prepare_entry["outputs"]) | dict(explain_entry["outputs"])
    _verify_files(out_dir, upstream, "upstream of casebase")
    train_part, test_part, _ = load_prepared(out_dir)
    shap_matrix, _ = load_shap(out_dir)
    cb = build_case_base(train_part, test_part, shap_matrix, global_importance(shap_matrix))
    save_case_base(out_dir / "casebase", cb)
    _record_step(out_dir, manifest, "casebase", step_params, [CASEBASE_JSON, CASEBASE_NPZ], upstream=upstream)
    return False


def load_casebase(out_dir: str | Path) -> CaseBase:
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    entry = _require_step(manifest, "casebase")
    _verify_files(out_dir, entry["outputs"], "casebase outputs")
    return load_case_base(out_dir / "casebase")


def _csv_text(header: list[str], rows: list[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _run_manifest(manifest: dict, extra: dict) -> dict:
    """Everything needed to reproduce the run bit-exactly."""
    steps = manifest.get("steps", {})
    return {
        "tool": "trustnbr",
        "tool_version": manifest.get("tool_version", __version__),
        "dataset_sha256": manifest.get("dataset", {}).get("sha256"),
        "label_column": manifest.get("dataset", {}).get("label_column"),
        "prepare": steps.get("prepare", {}).get("params"),
        "train": steps.get("train", {}).get("params"),
        "explain": steps.get("explain", {}).get("params"),
        **extra,
    }


def experiment(
    out_dir: str | Path,
    k_max: int = 100,
    threshold: float = 0.5,
    epsilon_divisor: float = 10.0,
) -> bool:
    """Full grid sweep; emits grid/heatmap/curves CSVs plus a manifest."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    for step in ("prepare", "train", "explain", "casebase"):
        _require_step(manifest, step)
    step_params = {"k_max": k_max, "threshold": threshold, "epsilon_divisor": epsilon_divisor}
    if _step_cached(out_dir, manifest, "experiment", step_params):
        return True
    upstream = dict(manifest["steps"]["casebase"]["outputs"]) | dict(manifest["steps"]["train"]["outputs"])
    _verify_files(out_dir, upstream, "upstream of experiment")

    _, _, production = load_prepared(out_dir)
    forest = load_forest(out_dir)
    cb = load_casebase(out_dir)
    _, background = load_shap(out_dir)
    alert_set = build_alert_set(forest, production, threshold=threshold, background=background)
    grid = run_grid(
        cb,
        alert_set,
        GridConfig(k_values=tuple(range(1, k_max + 1)), epsilon_divisor=epsilon_divisor),
        manifest=_run_manifest(manifest, {"threshold": threshold}),
    )

    # All rows are computed before any file is written, so an interrupted run
    # leaves no partial CSV behind.
    grid_text = _csv_text(["retrieval", "viz", "k", "user_map", "model_map", "delta"], grid.rows())
    heatmap_text = _csv_text(["retrieval", "viz", "mean_delta_over_k"], grid.heatmap_rows())
    curves_text = _csv_text(
        ["retrieval", "viz", "k", "user_map"],
        [(r, v, k, u) for (r, v, k, u, _, _) in grid.rows()],
    )
    (out_dir / "experiment").mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / GRID_CSV, grid_text)
    atomic_write_text(out_dir / HEATMAP_CSV, heatmap_text)
    atomic_write_text(out_dir / CURVES_CSV, curves_text)
    write_json(out_dir / EXPERIMENT_JSON, grid.manifest)
    _record_step(
        out_dir,
        manifest,
        "experiment",
        step_params,
        [GRID_CSV, HEATMAP_CSV, CURVES_CSV, EXPERIMENT_JSON],
        upstream=upstream,
    )
    return False


@dataclass
class SessionBundle:
    """Everything the HTTP service needs to answer alert queries."""

    forest: Forest
    case_base: CaseBase
    alert_set: AlertSet
    feature_names: tuple[str, ...]
    threshold: float
    manifest: dict

    @property
    def n_features(self) -> int:
        return self.case_base.m


def load_session(out_dir: str | Path, threshold: float = 0.5) -> SessionBundle:
    """Load prepared artifacts and build the alert set for serving."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    for step in ("prepare", "train", "explain", "casebase"):
        _require_step(manifest, step)
    train_part, _, production = load_prepared(out_dir)
    forest = load_forest(out_dir)
    cb = load_casebase(out_dir)
    _, background = load_shap(out_dir)
    alert_set = build_alert_set(forest, production, threshold=threshold, background=background)
    return SessionBundle(
        forest=forest,
        case_base=cb,
        alert_set=alert_set,
        feature_names=train_part.feature_names,
        threshold=threshold,
        manifest=manifest,
    )


def run_all(
    csv_path: str | Path,
    out_dir: str | Path,
    label_column: str,
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25),
    split_seed: int = 7,
    forest_params: dict | None = None,
    train_seed: int = 13,
    background_size: int = 128,
    background_seed: int = 29,
) -> None:
    """Convenience wrapper: prepare through casebase in one call."""
    prepare(csv_path, out_dir, label_column, fractions, seed=split_seed)
    train(out_dir, forest_params, seed=train_seed)
    explain(out_dir, background_size=background_size, background_seed=background_seed)
    casebase(out_dir)
