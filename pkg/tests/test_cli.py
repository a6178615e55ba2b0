"""End-to-end smoke tests for the command-line interface (in-process)."""

import json

import numpy as np
import pytest

from softbubble.cli import main
from softbubble.io import DEPTH_SCALE, read_pgm16

CONFIG = "configs/default.toml"


def run(*argv):
    return main(list(argv))


class TestRest:
    def test_writes_depth_frame(self, tmp_path):
        out = tmp_path / "rest.pgm"
        assert run("rest", "--config", CONFIG, "--out", str(out)) == 0
        img = read_pgm16(out)
        assert img.data.shape == (171, 224)
        # on-axis depth is standoff + inflation height, within noise and
        # quantization
        assert abs(img.data[85, 112] - 154.0) < 1.0


class TestPress:
    def test_writes_frames_and_manifest(self, tmp_path):
        out = tmp_path / "press"
        code = run(
            "press", "--config", CONFIG, "--object", "cube",
            "--depth", "15", "--frames", "2", "--out", str(out),
        )
        assert code == 0
        entries = json.loads((out / "press_manifest.json").read_text())
        assert len(entries) == 2
        assert entries[0]["touch"] is False
        assert entries[1]["touch"] is True
        assert (out / entries[1]["file"]).exists()
        assert (out / "patch_0001.ply").exists()

    def test_unknown_object_exits(self, tmp_path):
        with pytest.raises(SystemExit):
            run("press", "--object", "teapot", "--out", str(tmp_path / "x"))

    def test_unknown_library_exits(self, tmp_path):
        with pytest.raises(SystemExit):
            run("press", "--library", "mystery", "--out", str(tmp_path / "x"))


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "three"
    code = run(
        "dataset", "gen", "--config", CONFIG, "--library", "three_cube",
        "--train", "2", "--val", "1", "--out", str(out),
    )
    assert code == 0
    return out


class TestDatasetAndClassify:
    def test_manifest_written(self, dataset_dir):
        manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert len(manifest["entries"]) == 3 * (2 + 2)  # incl. no_touch class

    def test_train_and_eval(self, dataset_dir, tmp_path):
        model = tmp_path / "model.npz"
        code = run(
            "classify", "train", "--dataset", str(dataset_dir),
            "--out", str(model),
        )
        assert code == 0 and model.exists()
        metrics = tmp_path / "metrics.csv"
        code = run(
            "classify", "eval", "--dataset", str(dataset_dir),
            "--levels", "0", "--out", str(metrics),
        )
        assert code == 0
        lines = metrics.read_text().strip().splitlines()
        assert lines[0] == "dataset,N,split,top1_accuracy,n_samples"
        assert len(lines) == 2

    def test_sort_demo_needs_model(self, dataset_dir, tmp_path):
        model = tmp_path / "m.npz"
        assert run(
            "classify", "train", "--dataset", str(dataset_dir),
            "--baseline", "centroid", "--out", str(model),
        ) == 0
        # the model was fit on the three-cube set; sort-demo uses the
        # six-object library, so predictions may be wrong but the run completes
        out = tmp_path / "sort.csv"
        code = run(
            "sort-demo", "--config", CONFIG, "--model", str(model),
            "--baseline", "centroid", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "label,predicted,final_x,final_y,in_correct_zone"
        assert len(lines) == 1 + 6


class TestPose:
    def test_estimate_writes_log(self, tmp_path):
        out = tmp_path / "pose.csv"
        code = run(
            "pose", "estimate", "--config", CONFIG, "--axes", "2",
            "--inits", "4", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("frame,timestamp,qw,")
        assert len(lines) == 3

    def test_too_many_inits_exits(self, tmp_path):
        with pytest.raises(SystemExit):
            run("pose", "estimate", "--inits", "13", "--out", str(tmp_path / "x"))

    def test_track_writes_log(self, tmp_path):
        out = tmp_path / "track.csv"
        code = run(
            "track", "--config", CONFIG, "--frames", "3", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 4
        assert all(line.split(",")[-1] == "1" for line in lines[1:])


class TestErrors:
    def test_bad_config_returns_one(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[bubble]\ninflation_height = 5.0\n")
        code = run("rest", "--config", str(bad), "--out", str(tmp_path / "r.pgm"))
        assert code == 1

    def test_missing_config_returns_one(self, tmp_path):
        code = run(
            "rest", "--config", str(tmp_path / "none.toml"),
            "--out", str(tmp_path / "r.pgm"),
        )
        assert code == 1
