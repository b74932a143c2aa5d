import json
import time
from pathlib import Path

import numpy as np
import pytest

import trustnbr.pipeline as pipeline
from trustnbr.cli import EXIT_DATA, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, main
from trustnbr.errors import ArtifactError
from trustnbr.ioutil import read_json
from trustnbr.synthetic import write_surrogate_csv

FAST = [
    "--trees", "10",
    "--max-depth", "4",
]


@pytest.fixture(scope="module")
def bench_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "bench.csv"
    write_surrogate_csv(path, n_rows=600, seed=2)
    return path


@pytest.fixture()
def prepared(bench_csv, tmp_path):
    out = tmp_path / "art"
    assert main(["prepare", str(bench_csv), "--label", "label", "--out", str(out), "--seed", "7"]) == EXIT_OK
    return out


@pytest.fixture()
def trained(prepared, bench_csv):
    assert main(["train", str(prepared), *FAST, "--seed", "13"]) == EXIT_OK
    assert main(["explain", str(prepared), "--background-size", "24", "--background-seed", "29"]) == EXIT_OK
    assert main(["casebase", str(prepared)]) == EXIT_OK
    return prepared


class TestPrepare:
    def test_writes_split_manifest_and_matrices(self, prepared):
        split = read_json(prepared / "dataset/split.json")
        assert set(split) == {"seed", "train_ids", "test_ids", "production_ids"}
        assert split["seed"] == 7
        assert (prepared / "dataset/data.npz").exists()
        manifest = read_json(prepared / "manifest.json")
        assert "prepare" in manifest["steps"]

    def test_rerun_same_seed_identical_artifacts(self, bench_csv, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert main(["prepare", str(bench_csv), "--label", "label", "--out", str(out)]) == EXIT_OK
        for rel in ("dataset/data.npz", "dataset/split.json", "manifest.json"):
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes()

    def test_rerun_is_cached(self, bench_csv, prepared, capsys):
        assert main(["prepare", str(bench_csv), "--label", "label", "--out", str(prepared), "--seed", "7"]) == EXIT_OK
        assert "cached" in capsys.readouterr().out

    def test_missing_label_column(self, bench_csv, tmp_path, capsys):
        code = main(["prepare", str(bench_csv), "--label", "nope", "--out", str(tmp_path / "x")])
        assert code == EXIT_DATA
        assert "nope" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        code = main(["prepare", str(tmp_path / "absent.csv"), "--label", "label", "--out", str(tmp_path / "x")])
        assert code == EXIT_DATA

    def test_usage_error_exit_code(self):
        assert main(["prepare"]) == EXIT_USAGE


class TestPipelineSteps:
    def test_full_chain_under_a_minute(self, trained):
        start = time.time()
        assert main(["experiment", str(trained), "--k-max", "10"]) == EXIT_OK
        assert time.time() - start < 60.0

    def test_train_requires_prepare(self, tmp_path):
        out = tmp_path / "empty"
        out.mkdir()
        assert main(["train", str(out)]) == EXIT_DATA

    def test_tampered_forest_detected(self, trained):
        forest_path = trained / "forest.json"
        forest_path.write_text(forest_path.read_text().replace("0.", "0.0", 1))
        with pytest.raises(ArtifactError, match="hash mismatch"):
            pipeline.explain(trained, background_size=24, background_seed=30)

    def test_tampered_forest_cli_exit(self, trained, capsys):
        (trained / "forest.json").write_bytes(b"{}")
        code = main(["explain", str(trained), "--background-size", "16", "--background-seed", "5"])
        assert code == EXIT_DATA
        assert "hash mismatch" in capsys.readouterr().err

    def test_steps_cached_on_rerun(self, trained, capsys):
        assert main(["train", str(trained), *FAST, "--seed", "13"]) == EXIT_OK
        assert "cached" in capsys.readouterr().out

    def test_changed_params_retrain(self, trained, capsys):
        assert main(["train", str(trained), "--trees", "5", "--max-depth", "3", "--seed", "13"]) == EXIT_OK
        assert "done" in capsys.readouterr().out


class TestExperimentOutputs:
    def test_csv_shapes(self, trained):
        assert main(["experiment", str(trained), "--k-max", "5"]) == EXIT_OK
        grid = (trained / "experiment/grid.csv").read_text().splitlines()
        assert grid[0] == "retrieval,viz,k,user_map,model_map,delta"
        assert len(grid) == 1 + 4 * 5 * 5
        heat = (trained / "experiment/heatmap.csv").read_text().splitlines()
        assert len(heat) == 1 + 20
        curves = (trained / "experiment/curves.csv").read_text().splitlines()
        assert len(curves) == 1 + 4 * 5 * 5
        model_maps = {line.split(",")[4] for line in grid[1:]}
        assert len(model_maps) == 1

    def test_k_max_one(self, trained):
        assert main(["experiment", str(trained), "--k-max", "1"]) == EXIT_OK
        curves = (trained / "experiment/curves.csv").read_text().splitlines()
        assert len(curves) == 1 + 20

    def test_rerun_bit_identical(self, trained):
        assert main(["experiment", str(trained), "--k-max", "4"]) == EXIT_OK
        first = {rel: (trained / rel).read_bytes() for rel in (
            "experiment/grid.csv", "experiment/heatmap.csv", "experiment/curves.csv",
            "experiment/experiment_manifest.json",
        )}
        # wipe the cache record and outputs, then recompute from scratch
        manifest = read_json(trained / "manifest.json")
        del manifest["steps"]["experiment"]
        (trained / "manifest.json").write_text(json.dumps(manifest))
        for rel in first:
            (trained / rel).unlink()
        assert main(["experiment", str(trained), "--k-max", "4"]) == EXIT_OK
        for rel, blob in first.items():
            assert (trained / rel).read_bytes() == blob, rel

    def test_interrupted_run_leaves_no_partial_csv(self, trained, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise RuntimeError("interrupted")

        monkeypatch.setattr(pipeline, "run_grid", boom)
        code = main(["experiment", str(trained), "--k-max", "3"])
        assert code == EXIT_INTERNAL
        assert not (trained / "experiment/grid.csv").exists()

    def test_manifest_records_reproduction_inputs(self, trained):
        assert main(["experiment", str(trained), "--k-max", "3"]) == EXIT_OK
        manifest = read_json(trained / "experiment/experiment_manifest.json")
        assert manifest["dataset_sha256"]
        assert manifest["train"]["forest"]["n_trees"] == 10
        assert manifest["prepare"]["seed"] == 7
        assert manifest["explain"]["background_seed"] == 29
        assert manifest["k_values"] == [1, 2, 3]
        assert "alert_positive_rate" in manifest and "n_alerts" in manifest


class TestServeCommand:
    def test_unprepared_dir_names_missing_artifact(self, tmp_path, capsys):
        out = tmp_path / "nothing"
        out.mkdir()
        code = main(["serve", str(out), "--port", "0"])
        assert code == EXIT_DATA
        assert "manifest" in capsys.readouterr().err

    def test_occupied_port_clean_error(self, trained, capsys):
        import socket

        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        try:
            code = main(["serve", str(trained), "--port", str(port)])
        finally:
            sock.close()
        assert code == EXIT_DATA
        assert "cannot bind" in capsys.readouterr().err


class TestSynth:
    def test_synth_roundtrips_through_prepare(self, tmp_path):
        csv = tmp_path / "s.csv"
        assert main(["synth", str(csv), "--rows", "120", "--seed", "5"]) == EXIT_OK
        out = tmp_path / "art"
        assert main(["prepare", str(csv), "--label", "label", "--out", str(out)]) == EXIT_OK
        arrays = np.load(out / "dataset/data.npz")
        total = sum(arrays[f"{p}_features"].shape[0] for p in ("train", "test", "production"))
        assert total == 120
        assert arrays["train_features"].shape[1] == 5
