"""Acceptance gate: one test per release criterion.

Each test prints a single PASS/FAIL line (visible under ``pytest -s`` or on
failure) so the whole gate can be read at a glance:

    python3 -m pytest tests/test_acceptance.py -s
"""

import csv
import json
import time

import numpy as np
import pytest

from branchstereo import cli
from branchstereo.costmodel import (
    PRESETS,
    attention_speedup,
    corr_planes,
    ds_gru_ratio,
    ghost_reduction,
    patch_grid,
)
from branchstereo.dataset import make_splits, scan_corpus
from branchstereo.geometry import (
    CameraRig,
    DepthMap,
    DisparityMap,
    depth_to_disparity,
    disparity_to_depth,
)
from branchstereo.kernels import (
    DsGruWeights,
    GruWeights,
    MacCounter,
    conv2d,
    conv2d_macs,
    conv_gru_step,
    ds_gru_step,
)
from branchstereo.matcher import MatchConfig, match
from branchstereo.metrics import depth_metrics, disparity_metrics
from branchstereo.pipeline import Usability, classify_deployability, travel_per_update
from branchstereo.reference_results import REPORTED_RESULTS

from conftest import build_real_corpus, textured_pair, touch_mock_corpus
from test_metrics import naive_depth_metrics, naive_disparity_metrics, random_pair

RIG = CameraRig()


class criterion:
    """Prints one 'criterion N [PASS|FAIL]' line when the block exits."""

    def __init__(self, num, desc):
        self.num = num
        self.desc = desc

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "FAIL" if exc_type else "PASS"
        print(f"criterion {self.num} [{status}]: {self.desc}")
        return False


def test_criterion_1_geometry_round_trip():
    with criterion(1, "disparity/depth conversion accuracy and throughput"):
        d = DisparityMap(values=np.full((8, 8), 29.39990, np.float32))
        depth = disparity_to_depth(d, RIG)
        assert abs(float(depth.values[0, 0]) - 2.000) < 1e-3

        rng = np.random.default_rng(0)
        maps = [
            DisparityMap(values=rng.uniform(1, 500, (64, 64)).astype(np.float32))
            for _ in range(100)
        ]
        start = time.perf_counter()
        for _ in range(10):
            for m in maps:
                back = depth_to_disparity(disparity_to_depth(m, RIG), RIG)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"1000 round trips took {elapsed:.2f} s"
        np.testing.assert_allclose(back.values, maps[-1].values, rtol=1e-4)


def test_criterion_2_corpus_accounting(tmp_path):
    with criterion(2, "full-corpus indexing and deterministic 80/10/10 split"):
        touch_mock_corpus(tmp_path, trees=115, frames=16)
        index = scan_corpus(tmp_path)
        assert len(index) == 5520
        assert len(index.per_tree_counts()) == 115
        splits = make_splits(index, (0.8, 0.1, 0.1), seed=42)
        assert (len(splits.train), len(splits.val), len(splits.test)) == (4416, 552, 552)
        again = make_splits(index, (0.8, 0.1, 0.1), seed=42)
        assert [r.record_id for r in splits.test] == [r.record_id for r in again.test]


def test_criterion_3_metrics_match_naive_oracle():
    with criterion(3, "vectorized metrics equal per-pixel reference on 200 random maps"):
        rng = np.random.default_rng(7)
        for _ in range(100):
            pred, gt = random_pair(rng)
            fast = disparity_metrics(pred, gt)
            ref = naive_disparity_metrics(pred, gt)
            assert fast.epe_px == pytest.approx(ref["epe"], rel=1e-12)
            assert fast.rmse_px == pytest.approx(ref["rmse"], rel=1e-12)
            assert fast.d1_all_pct == pytest.approx(
                100 * ref["d1_count"] / ref["n"], rel=1e-12
            )
        for _ in range(100):
            pred, gt = random_pair(rng, cls=DepthMap, lo=0.2, hi=8.0)
            fast = depth_metrics(pred, gt)
            ref = naive_depth_metrics(pred, gt)
            assert fast.delta1_pct == pytest.approx(
                100 * ref["delta_counts"][0] / ref["n"], rel=1e-12
            )
            assert fast.mae_cm == pytest.approx(ref["mae"], rel=1e-12)
            assert fast.abs_rel == pytest.approx(ref["abs_rel"], rel=1e-12)


def test_criterion_4_cost_model_reproduces_published_figures():
    with criterion(4, "analytic cost model reproduces the published counts"):
        assert corr_planes(2, 4) == 18
        assert corr_planes(1, 3) == 7
        assert corr_planes(1, 2) == 5
        assert patch_grid(384, 512, 1.0) == 972
        assert patch_grid(384, 512, 0.75) == 540
        assert patch_grid(384, 512, 0.5) == 234
        assert attention_speedup(972, 540) == pytest.approx(3.24, rel=0.02)
        assert attention_speedup(972, 234) == pytest.approx(17.25, rel=0.02)
        assert ds_gru_ratio(64) == pytest.approx(7.89, abs=0.005)
        assert ghost_reduction(128, 128) == pytest.approx(0.496, abs=5e-4)
        assert PRESETS["prunenano"].iters_valid == 9
        assert PRESETS["vits"].decoder_conv_layers == 66


def test_criterion_5_kernels_counted_and_stable():
    with criterion(5, "MAC counters match closed forms; GRU stable over 1000 steps"):
        rng = np.random.default_rng(1)
        counter = MacCounter()
        conv2d(rng.standard_normal((8, 6, 6)), rng.standard_normal((4, 8, 3, 3)), counter)
        assert counter.total == conv2d_macs(6, 6, 8, 4)

        c, h, w = 64, 4, 4
        dense, sep = MacCounter(), MacCounter()
        x = rng.standard_normal((c, h, w))
        conv_gru_step(np.zeros((c, h, w)), x, GruWeights.seeded(c), dense)
        ds_gru_step(np.zeros((c, h, w)), x, DsGruWeights.seeded(c), sep)
        assert dense.total / sep.total == pytest.approx(ds_gru_ratio(c), abs=0.01)

        start = time.perf_counter()
        c, h, w = 16, 4, 4
        weights = GruWeights.seeded(c, seed=3)
        state = np.zeros((c, h, w))
        for _ in range(1000):
            state = conv_gru_step(state, rng.standard_normal((c, h, w)) * 3, weights)
            assert np.abs(state).max() <= 1.0 + 1e-9
        assert np.isfinite(state).all()
        assert time.perf_counter() - start < 30.0


def test_criterion_6_deployment_analysis():
    with criterion(6, "latency table, travel arithmetic and deployability labels"):
        for name, row in REPORTED_RESULTS.items():
            assert 1000.0 / row.tensorrt_ms == pytest.approx(row.fps, abs=0.05), name
        assert travel_per_update(0.3, 450) == 13.5
        for name, row in REPORTED_RESULTS.items():
            got = classify_deployability(row.fps, row.depth_mae_cm, row.delta1_pct)
            assert got.symbol == row.usable_label, name
        order = {Usability.UNSAFE: 0, Usability.ACCURATE_BUT_SLOW: 1, Usability.USABLE: 2}
        fps_grid = np.linspace(0.1, 15.0, 100)
        mae_grid = np.linspace(1.0, 200.0, 100)
        labels = np.array(
            [[order[classify_deployability(f, m)] for m in mae_grid] for f in fps_grid]
        )
        assert (np.diff(labels, axis=0) >= 0).all()
        assert (np.diff(labels, axis=1) <= 0).all()


def test_criterion_7_matcher_accuracy():
    with criterion(7, "classical matcher recovers known shifts at 256x256"):
        start = time.perf_counter()
        cfg = MatchConfig(max_disparity=64)
        for d in (0, 4, 16, 40):
            left, right = textured_pair(256, 256, d, seed=100 + d)
            dm = match(left, right, cfg)
            assert dm.valid.mean() >= 0.8, f"d={d}: validity {dm.valid.mean():.2f}"
            epe = float(np.abs(dm.values[dm.valid] - d).mean())
            assert epe < 0.5, f"d={d}: EPE {epe:.3f}"
        assert time.perf_counter() - start < 60.0


def test_criterion_8_disparity_file_round_trips(tmp_path):
    with criterion(8, "PFM lossless and PNG16 quantized round trips"):
        from branchstereo.disparity_io import (
            read_pfm, read_png16, write_pfm, write_png16,
        )

        rng = np.random.default_rng(5)
        values = rng.uniform(0.5, 250.0, (48, 64)).astype(np.float32)
        valid = rng.random((48, 64)) < 0.9
        disp = DisparityMap(values=np.where(valid, values, 0.0), valid=valid)

        write_pfm(tmp_path / "d.pfm", disp)
        back = read_pfm(tmp_path / "d.pfm")
        np.testing.assert_array_equal(back.values, disp.values)
        np.testing.assert_array_equal(back.valid, disp.valid)

        write_png16(tmp_path / "d.png", disp)
        back = read_png16(tmp_path / "d.png")
        np.testing.assert_array_equal(back.valid, disp.valid)
        err = np.abs(back.values[valid] - disp.values[valid]).max()
        assert err <= 1 / 256 + 1e-6


def test_criterion_9_cli_end_to_end(tmp_path):
    with criterion(9, "CLI match -> eval -> report flow on a rendered corpus"):
        start = time.perf_counter()
        corpus = tmp_path / "corpus"
        build_real_corpus(corpus, trees=2, frames=2, disparity=16)
        pred = tmp_path / "pred"
        assert cli.main(
            ["match", "--root", str(corpus), "--out", str(pred),
             "--limit", "10", "--max-disparity", "48"]
        ) == cli.EXIT_OK
        assert len(list(pred.glob("*.pfm"))) == 10

        scores = tmp_path / "scores"
        code = cli.main(
            ["eval", "--root", str(corpus), "--pred-dir", str(pred),
             "--model", "zncc", "--out", str(scores)]
        )
        assert code == cli.EXIT_PARTIAL  # 2 of 12 records deliberately unmatched
        payload = json.loads(scores.with_suffix(".json").read_text())
        assert payload["summary"]["epe_px"] < 0.5
        assert len(payload["missing"]) == 2

        report_dir = tmp_path / "report"
        assert cli.main(
            ["report", "--metrics", str(scores.with_suffix(".json")),
             "--reported", "--out", str(report_dir)]
        ) == cli.EXIT_OK
        rows = list(
            csv.DictReader((report_dir / "report.csv").read_text().splitlines())
        )
        assert len(rows) == 6
        assert {r["usability"] for r in rows if r["source"] == "reported"} == {"✓", "△", "×"}
        assert time.perf_counter() - start < 120.0
