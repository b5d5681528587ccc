import csv
import json

import numpy as np
import pytest

from branchstereo import cli
from branchstereo.disparity_io import write_pfm
from branchstereo.geometry import CameraRig, DisparityMap

from conftest import build_real_corpus, touch_mock_corpus

RIG = CameraRig()


def run(*argv):
    return cli.main(list(argv))


class TestScanSplit:
    def test_scan_counts(self, tmp_path, capsys):
        touch_mock_corpus(tmp_path, trees=2, frames=4)
        assert run("scan", "--root", str(tmp_path)) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "24 records" in out
        assert "trees: 2" in out

    def test_scan_writes_index_json(self, tmp_path):
        touch_mock_corpus(tmp_path / "c", trees=1, frames=2)
        out = tmp_path / "index.json"
        run("scan", "--root", str(tmp_path / "c"), "--out", str(out))
        payload = json.loads(out.read_text())
        assert len(payload["records"]) == 6
        assert payload["malformed"] == []

    def test_scan_missing_root_errors(self, tmp_path, capsys):
        assert run("scan", "--root", str(tmp_path / "nope")) == cli.EXIT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_split_manifest(self, tmp_path, capsys):
        touch_mock_corpus(tmp_path / "c", trees=5, frames=4)
        manifest = tmp_path / "m.json"
        assert run(
            "split", "--root", str(tmp_path / "c"), "--seed", "3",
            "--out", str(manifest),
        ) == cli.EXIT_OK
        payload = json.loads(manifest.read_text())
        assert payload["seed"] == 3
        sizes = {k: len(v) for k, v in payload["splits"].items()}
        assert sizes == {"train": 48, "val": 6, "test": 6}
        assert "48/6/6" in capsys.readouterr().out


class TestCost:
    def test_all_presets_table(self, capsys):
        assert run("cost", "--all-presets") == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "vits" in out and "972" in out and "18/40" in out
        assert "prunenano" in out and "234" in out

    def test_single_preset_csv(self, tmp_path):
        out = tmp_path / "cost.csv"
        run("cost", "--preset", "prunestereo", "--out", str(out))
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 1
        assert rows[0]["attention_tokens"] == "540"
        assert rows[0]["corr_planes_standard"] == "7"

    def test_json_output(self, tmp_path):
        out = tmp_path / "cost.json"
        run("cost", "--out", str(out))
        rows = json.loads(out.read_text())
        assert {r["variant"] for r in rows} == set(
            ("vits", "vitl", "pruneplus", "prunestereo", "prunenano")
        )

    def test_custom_crop(self, capsys):
        run("cost", "--preset", "vits", "--crop", "280x280")
        assert "400" in capsys.readouterr().out  # 20x20 patch grid


class TestProfile:
    def test_sleep_profile_with_travel(self, tmp_path, capsys):
        out = tmp_path / "lat.json"
        assert run(
            "profile", "--sleep-ms", "2", "--frames", "5", "--warmup", "1",
            "--speed-mps", "0.3", "--out", str(out),
        ) == cli.EXIT_OK
        text = capsys.readouterr().out
        assert "FPS" in text
        assert "travel per update" in text
        payload = json.loads(out.read_text())
        assert payload["measured_frames"] == 5
        assert payload["mean_ms"] >= 2.0

    def test_builtin_matcher_profile(self, capsys):
        assert run(
            "profile", "--frames", "2", "--warmup", "0",
            "--width", "96", "--height", "64", "--max-disparity", "32",
        ) == cli.EXIT_OK
        assert "builtin-matcher-96x64" in capsys.readouterr().out


class TestDistance:
    def _write_disp(self, path, depth_m=2.0, shape=(30, 30)):
        d = RIG.focal_baseline / depth_m
        write_pfm(path, DisparityMap(values=np.full(shape, d, np.float32)))

    def test_distance_and_decision(self, tmp_path, capsys):
        disp = tmp_path / "d.pfm"
        self._write_disp(disp, depth_m=2.0)
        assert run(
            "distance", "--disp", str(disp), "--roi", "5,5,10,10"
        ) == cli.EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["distance_m"] == pytest.approx(2.0, abs=1e-3)
        assert payload["n_valid"] == 100
        assert payload["decision"] == "approach"

    def test_close_branch_actuates(self, tmp_path, capsys):
        disp = tmp_path / "d.pfm"
        self._write_disp(disp, depth_m=0.4)
        run("distance", "--disp", str(disp), "--roi", "0,0,8,8")
        assert json.loads(capsys.readouterr().out)["decision"] == "actuate"

    def test_no_measurement_holds(self, tmp_path, capsys):
        disp = tmp_path / "empty.pfm"
        write_pfm(
            disp,
            DisparityMap(values=np.zeros((10, 10), np.float32),
                         valid=np.zeros((10, 10), bool)),
        )
        assert run("distance", "--disp", str(disp), "--roi", "0,0,5,5") == cli.EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["measurement"] is None
        assert payload["decision"] == "hold"

    def test_bad_roi_errors(self, tmp_path, capsys):
        disp = tmp_path / "d.pfm"
        self._write_disp(disp)
        assert run("distance", "--disp", str(disp), "--roi", "25,25,20,20") == cli.EXIT_ERROR


class TestMatchEvalReport:
    def test_end_to_end_small_corpus(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        build_real_corpus(corpus, trees=1, frames=2, disparity=16)
        pred = tmp_path / "pred"
        assert run(
            "match", "--root", str(corpus), "--out", str(pred),
            "--max-disparity", "48",
        ) == cli.EXIT_OK
        assert len(list(pred.glob("*.pfm"))) == 6

        out = tmp_path / "eval" / "scores"
        assert run(
            "eval", "--root", str(corpus), "--pred-dir", str(pred),
            "--model", "zncc", "--out", str(out),
        ) == cli.EXIT_OK
        payload = json.loads(out.with_suffix(".json").read_text())
        assert payload["complete"] is True
        assert payload["summary"]["epe_px"] < 0.5
        assert payload["summary"]["delta1_pct"] > 95.0

        report_dir = tmp_path / "report"
        grid_inputs = sorted(str(p) for p in pred.glob("*.pfm"))[:4]
        assert run(
            "report", "--metrics", str(out.with_suffix(".json")),
            "--reported", "--markdown",
            "--grid", *grid_inputs, "--grid-cols", "2",
            "--out", str(report_dir),
        ) == cli.EXIT_OK
        rows = list(csv.DictReader((report_dir / "report.csv").read_text().splitlines()))
        assert len(rows) == 6  # one measured + five reported
        by_model = {r["model"]: r for r in rows}
        assert by_model["DEFOM-PrunePlus"]["usability"] == "✓"
        assert by_model["DEFOM-PruneStereo"]["usability"] == "×"
        assert by_model["DEFOM-Stereo ViT-S"]["usability"] == "△"
        assert (report_dir / "report.md").is_file()
        assert (report_dir / "comparison_grid.png").is_file()

    def test_eval_partial_when_prediction_missing(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        build_real_corpus(corpus, trees=1, frames=1, disparity=16)
        pred = tmp_path / "pred"
        run("match", "--root", str(corpus), "--out", str(pred), "--max-disparity", "48")
        removed = sorted(pred.glob("*.pfm"))[0]
        removed.unlink()
        code = run(
            "eval", "--root", str(corpus), "--pred-dir", str(pred),
            "--out", str(tmp_path / "scores"),
        )
        assert code == cli.EXIT_PARTIAL
        assert "missing prediction" in capsys.readouterr().err

    def test_match_single_pair(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        build_real_corpus(corpus, trees=1, frames=1, disparity=8)
        left = next(corpus.rglob("left_*.png"))
        right = next(corpus.rglob("right_*.png"))
        out = tmp_path / "single"
        assert run(
            "match", "--left", str(left), "--right", str(right),
            "--out", str(out), "--max-disparity", "32",
        ) == cli.EXIT_OK
        assert (out / (left.stem + ".pfm")).is_file()

    def test_match_without_inputs_errors(self, tmp_path, capsys):
        assert run("match", "--out", str(tmp_path / "x")) == cli.EXIT_ERROR

    def test_manifest_subset_restricts_eval(self, tmp_path):
        corpus = tmp_path / "corpus"
        build_real_corpus(corpus, trees=2, frames=2, disparity=16)
        manifest = tmp_path / "m.json"
        run("split", "--root", str(corpus), "--split", "0.5,0.25,0.25",
            "--out", str(manifest))
        pred = tmp_path / "pred"
        run("match", "--root", str(corpus), "--manifest", str(manifest),
            "--subset", "test", "--out", str(pred), "--max-disparity", "48")
        n_test = len(json.loads(manifest.read_text())["splits"]["test"])
        assert len(list(pred.glob("*.pfm"))) == n_test
        code = run(
            "eval", "--root", str(corpus), "--pred-dir", str(pred),
            "--manifest", str(manifest), "--subset", "test",
            "--out", str(tmp_path / "scores"),
        )
        assert code == cli.EXIT_OK
