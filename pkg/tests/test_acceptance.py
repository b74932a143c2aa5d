"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line (visible with ``pytest -s`` or in failure output).

The heavyweight criteria run the real artifact pipeline on the bundled
synthetic benchmark with every seed pinned; everything here is deterministic.
"""

import time

import numpy as np
import pytest

import trustnbr.pipeline as pipeline
from trustnbr.attribution import brute_force_shapley, global_importance, shap_for_dataset, tree_shap
from trustnbr.dataset import fit_normalizer, split_three_way
from trustnbr.embed import DistanceMatrix, mds_embed
from trustnbr.forest import train_forest
from trustnbr.retrieval import DistanceKind, build_case_base, distance, retrieve_k_nearest
from trustnbr.simuser import mean_average_precision, unweighted_confidence, weighted_confidence
from trustnbr.synthetic import make_surrogate, write_surrogate_csv

from conftest import make_case, make_case_base
from test_simuser import naive_average_precision, neighbor_set
from test_attribution import random_triple

RETRIEVAL_CODES = ("F", "S", "G", "L")
WEIGHTED_VIZ_CODES = ("F", "S", "G", "L")


def report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def benchmark_dir(tmp_path_factory):
    """The pinned benchmark pipeline: every seed fixed, k grid 1..100."""
    root = tmp_path_factory.mktemp("acceptance")
    csv = root / "surrogate.csv"
    write_surrogate_csv(csv, n_rows=3000, seed=2)
    out = root / "artifacts"
    pipeline.prepare(csv, out, "label", fractions=(0.4, 0.2, 0.4), seed=8)
    pipeline.train(out, {"n_trees": 100, "max_depth": 8}, seed=4)
    pipeline.explain(out, background_size=64, background_seed=29)
    pipeline.casebase(out)
    pipeline.experiment(out, k_max=100, threshold=0.5)
    return out


def read_curves(benchmark_dir):
    rows = (benchmark_dir / "experiment/curves.csv").read_text().splitlines()[1:]
    curves: dict = {}
    for line in rows:
        retrieval, viz, k, user_map = line.split(",")
        curves.setdefault((retrieval, viz), {})[int(k)] = float(user_map)
    return curves


def test_shap_oracle_equivalence(rng):
    start = time.time()
    worst = 0.0
    for _ in range(100):
        forest, x, background = random_triple(rng, max_trees=20, max_m=8, max_bg=32)
        fast = tree_shap(forest, x, background)
        slow = brute_force_shapley(forest, x, background)
        worst = max(worst, float(np.abs(fast.phi - slow.phi).max()))
        assert np.abs(fast.phi - slow.phi).max() < 1e-9
    elapsed = time.time() - start
    report(
        "shap oracle equivalence (100 random triples, per-component 1e-9)",
        worst < 1e-9 and elapsed < 120.0,
        f"max err {worst:.2e}, {elapsed:.1f}s",
    )


def test_local_accuracy_on_synthetic_case_base():
    d = make_surrogate(1000, seed=0)
    split = split_three_way(d, seed=7)
    norm = fit_normalizer(split.train)
    train = norm.transform(split.train)
    test = norm.transform(split.test)
    forest = train_forest(train, {"n_trees": 30, "max_depth": 6}, seed=3)
    background = train.features[:64]
    worst = 0.0
    for part in (train, test):
        matrix = shap_for_dataset(forest, part, background)
        residual = np.abs(matrix.base_value + matrix.phi.sum(axis=1) - matrix.model_outputs)
        worst = max(worst, float(residual.max()))
    report(
        "local accuracy on every case-base instance (1,000-row synthetic)",
        worst < 1e-9,
        f"max |base + sum(phi) - proba| = {worst:.2e}",
    )


def test_retrieval_oracle_full_sort(rng):
    def naive(cb, q, k, kind):
        scored = sorted(
            ((distance(kind, q, c, cb), c.instance_id) for c in cb.cases),
            key=lambda t: (t[0], t[1]),
        )
        return scored[: min(k, len(cb))]

    for n in (500, 5000):
        features = rng.normal(size=(n, 6))
        phi = rng.normal(size=(n, 6))
        # exact duplicates exercise the tie-break contract
        features[n // 2] = features[0]
        phi[n // 2] = phi[0]
        cb = make_case_base(features, phi, rng.integers(0, 2, n))
        q = make_case("q", rng.normal(size=6), rng.normal(size=6), 1)
        for kind in DistanceKind:
            for k in (1, 5, 50, n):
                fast = retrieve_k_nearest(cb, q, k, kind)
                slow = naive(cb, q, k, kind)
                got = [(nb.distance, nb.case.instance_id) for nb in fast.neighbors]
                assert got == slow, f"mismatch at n={n} kind={kind} k={k}"
    report("retrieval equals naive full sort (4 kinds, k in {1,5,50,|CB|}, up to 5000 cases)", True)


def test_mds_monotone_and_exact_configurations(rng):
    start = time.time()
    for _ in range(50):
        n = int(rng.integers(3, 30))
        a = rng.random((n, n))
        a = (a + a.T) / 2.0
        np.fill_diagonal(a, 0.0)
        e = mds_embed(DistanceMatrix(values=a), seed=1)
        diffs = np.diff(np.array(e.raw_stress_history))
        assert (diffs <= 1e-12).all(), "raw stress increased"
    triangle = mds_embed(DistanceMatrix(values=np.ones((3, 3)) - np.eye(3)), seed=0)
    r2 = np.sqrt(2.0)
    square = mds_embed(
        DistanceMatrix(
            values=np.array(
                [[0, 1, r2, 1], [1, 0, 1, r2], [r2, 1, 0, 1], [1, r2, 1, 0]], dtype=float
            )
        ),
        seed=0,
    )
    elapsed = time.time() - start
    report(
        "mds stress monotone (50 random matrices) and < 1e-6 on exact configurations",
        triangle.stress < 1e-6 and square.stress < 1e-6 and elapsed < 60.0,
        f"triangle {triangle.stress:.2e}, square {square.stress:.2e}, {elapsed:.1f}s",
    )


def test_confidence_unit_cases():
    eq3 = unweighted_confidence(neighbor_set([1, 1, 0, 1], [1.0, 2.0, 3.0, 4.0])).value
    eq4 = weighted_confidence(neighbor_set([1, 0], [1.0, 3.0])).value
    equal_distance_sets = [([1, 0, 1], [2.0, 2.0, 2.0]), ([1, 1, 0, 0], [0.7, 0.7, 0.7, 0.7])]
    exact = all(
        weighted_confidence(neighbor_set(labels, d)).value
        == unweighted_confidence(neighbor_set(labels, d)).value
        for labels, d in equal_distance_sets
    )
    report(
        "estimator unit cases: [1,1,0,1]->0.75, [1,0]/[1,3]->0.75, equal distances exact",
        eq3 == pytest.approx(0.75) and eq4 == pytest.approx(0.75) and exact,
        f"eq3={eq3}, eq4={eq4}",
    )


def test_map_oracle_and_hand_case(rng):
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        scores = rng.choice([0.1, 0.25, 0.5, 0.75, 0.9], size=n)
        labels = rng.integers(0, 2, n)
        if labels.sum() == 0:
            labels[int(rng.integers(n))] = 1
        fast = mean_average_precision(scores, labels)
        slow = naive_average_precision(list(scores), list(labels))
        worst = max(worst, abs(fast - slow))
        assert abs(fast - slow) < 1e-12
    hand = mean_average_precision([0.9, 0.8, 0.1], [1, 0, 1])
    report(
        "map agrees with definition-based oracle (1,000 random vectors, 1e-12) and hand case",
        worst < 1e-12 and hand == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-12),
        f"worst dev {worst:.2e}, hand {hand:.10f}",
    )


def test_grid_shape_and_bit_identical_rerun(tmp_path):
    csv = tmp_path / "small.csv"
    write_surrogate_csv(csv, n_rows=600, seed=3)
    out = tmp_path / "art"
    pipeline.prepare(csv, out, "label", seed=7)
    pipeline.train(out, {"n_trees": 10, "max_depth": 4}, seed=13)
    pipeline.explain(out, background_size=24, background_seed=29)
    pipeline.casebase(out)
    pipeline.experiment(out, k_max=6)
    grid_lines = (out / "experiment/grid.csv").read_text().splitlines()
    shape_ok = len(grid_lines) == 1 + 4 * 5 * 6
    model_ok = len({line.split(",")[4] for line in grid_lines[1:]}) == 1
    first = {
        rel: (out / rel).read_bytes()
        for rel in ("experiment/grid.csv", "experiment/heatmap.csv", "experiment/curves.csv")
    }
    # drop the cache record and outputs, recompute under the same manifest
    manifest = pipeline.load_manifest(out)
    del manifest["steps"]["experiment"]
    pipeline._save_manifest(out, manifest)
    for rel in first:
        (out / rel).unlink()
    pipeline.experiment(out, k_max=6)
    identical = all((out / rel).read_bytes() == blob for rel, blob in first.items())
    report(
        "grid shape 4x5x|k|, constant model MAP, bit-identical rerun",
        shape_ok and model_ok and identical,
        f"rows {len(grid_lines) - 1}",
    )


def test_trend_unweighted_confidence_is_worst(benchmark_dir):
    start = time.time()
    heatmap = {}
    for line in (benchmark_dir / "experiment/heatmap.csv").read_text().splitlines()[1:]:
        retrieval, viz, delta = line.split(",")
        heatmap[(retrieval, viz)] = float(delta)
    violations = [
        (retrieval, viz, heatmap[(retrieval, "U")] - heatmap[(retrieval, viz)])
        for retrieval in RETRIEVAL_CODES
        for viz in WEIGHTED_VIZ_CODES
        if heatmap[(retrieval, "U")] > heatmap[(retrieval, viz)]
    ]
    clean_retrievals = sum(
        1
        for retrieval in RETRIEVAL_CODES
        if all(heatmap[(retrieval, "U")] <= heatmap[(retrieval, viz)] for viz in WEIGHTED_VIZ_CODES)
    )
    report(
        "trend: distance-blind confidence worst for >=3 of 4 retrieval kinds (<=1 cell violated)",
        clean_retrievals >= 3 and len(violations) <= 1,
        f"clean retrieval kinds {clean_retrievals}/4, violations {violations}, {time.time() - start:.1f}s",
    )


def test_trend_k_curve_rises_from_k1(benchmark_dir):
    curves = read_curves(benchmark_dir)
    ok = True
    detail = []
    for viz in ("F", "S", "G", "L", "U"):
        curve = curves[("S", viz)]
        at_one = curve[1]
        plateau = float(np.mean([curve[k] for k in range(20, 101)]))
        detail.append(f"{viz}: k1={at_one:.3f} < mean[20,100]={plateau:.3f}")
        ok = ok and at_one < plateau
    report(
        "trend: user MAP at k=1 below the k in [20,100] average (retrieval S, per-k curves)",
        ok,
        "; ".join(detail),
    )
