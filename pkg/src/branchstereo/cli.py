"""Command-line entry point tying the toolkit modules together.

Subcommands: scan, split, match, eval, profile, cost, distance, report.
Exit status 0 on success, 1 on any failure, 2 on a partial evaluation
(some predictions missing but a report was still produced).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import cv2
import numpy as np

from . import costmodel, disparity_io, pipeline
from .dataset import SampleRecord, make_splits, scan_corpus
from .geometry import CameraRig
from .matcher import MatchConfig, match
from .metrics import METRIC_COLUMNS, evaluate_split
from .reference_results import REPORTED_RESULTS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _add_rig_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rig-focal-px", type=float, default=933.33)
    parser.add_argument("--rig-baseline-m", type=float, default=0.063)
    parser.add_argument("--max-disparity", type=float, default=512.0)


def _rig(args) -> CameraRig:
    return CameraRig(args.rig_focal_px, args.rig_baseline_m, args.max_disparity)


def _parse_split(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split must be three comma-separated fractions")
    return (parts[0], parts[1], parts[2])


def _parse_crop(text: str) -> tuple[int, int]:
    h, w = text.lower().split("x")
    return int(h), int(w)


def _select_records(args, records) -> list[SampleRecord]:
    if getattr(args, "manifest", None):
        manifest = json.loads(Path(args.manifest).read_text())
        wanted = set(manifest["splits"][args.subset])
        return [r for r in records if str(r.left_path) in wanted]
    return list(records)


def cmd_scan(args) -> int:
    index = scan_corpus(args.root)
    print(f"{len(index)} records under {index.root}")
    for view, count in sorted(index.per_view_counts().items(), key=lambda kv: kv[0].value):
        print(f"  view {view.value}: {count}")
    print(f"  trees: {len(index.per_tree_counts())}")
    for message in index.malformed:
        print(f"  malformed: {message}", file=sys.stderr)
    if args.out:
        payload = {
            "root": str(index.root),
            "records": [str(r.left_path) for r in index.records],
            "malformed": list(index.malformed),
        }
        Path(args.out).write_text(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_split(args) -> int:
    index = scan_corpus(args.root)
    splits = make_splits(index, args.split, args.seed, group_by_tree=args.group_by_tree)
    splits.to_manifest(args.out)
    print(
        f"split {len(index)} records into {len(splits.train)}/{len(splits.val)}/"
        f"{len(splits.test)} (seed {splits.seed}) -> {args.out}"
    )
    return EXIT_OK


def _match_cfg(args) -> MatchConfig:
    return MatchConfig(
        pyramid_levels=args.levels,
        window_radius=args.window_radius,
        search_radius_per_level=args.search_radius,
        max_disparity=int(args.max_disparity),
        lr_consistency_tol=args.lr_tol,
        subpixel=not args.no_subpixel,
    )


def _read_image(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise FileNotFoundError(f"unreadable image {path}")
    return img


def cmd_match(args) -> int:
    cfg = _match_cfg(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".pfm" if args.format == "pfm" else ".png"
    if args.left and args.right:
        disp = match(_read_image(Path(args.left)), _read_image(Path(args.right)), cfg)
        out = out_dir / (Path(args.left).stem + suffix)
        disparity_io.write_disparity_file(disp, out, args.format)
        print(f"wrote {out}")
        return EXIT_OK
    if not args.root:
        print("match needs either --root or both --left and --right", file=sys.stderr)
        return EXIT_ERROR
    records = _select_records(args, scan_corpus(args.root).records)
    if args.limit:
        records = records[: args.limit]
    for record in records:
        disp = match(_read_image(record.left_path), _read_image(record.right_path), cfg)
        disparity_io.write_disparity_file(
            disp, out_dir / (record.record_id + suffix), args.format
        )
    print(f"matched {len(records)} pairs -> {out_dir}")
    return EXIT_OK


def prediction_loader(pred_dir: Path, fmt: str):
    suffix = ".pfm" if fmt == "pfm" else ".png"

    def load(record: SampleRecord):
        path = pred_dir / (record.record_id + suffix)
        if not path.is_file():
            return None
        return disparity_io.read_disparity_file(path, fmt)

    return load


def cmd_eval(args) -> int:
    rig = _rig(args)
    records = _select_records(args, scan_corpus(args.root).records)
    report = evaluate_split(
        prediction_loader(Path(args.pred_dir), args.format), records, rig,
        model_name=args.model,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(out.with_suffix(".csv"))
    report.to_json(out.with_suffix(".json"))
    summary = report.summary() if report.per_image else {}
    if summary:
        print(
            f"{args.model}: EPE {summary['epe_px']:.3f} px, "
            f"D1 {summary['d1_all_pct']:.2f}%, depth MAE {summary['depth_mae_cm']:.2f} cm "
            f"over {len(report.per_image)} images"
        )
    for record_id in report.missing:
        print(f"missing prediction for {record_id}", file=sys.stderr)
    if not report.per_image:
        print("no predictions evaluated", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if report.complete else EXIT_PARTIAL


def cmd_profile(args) -> int:
    if args.sleep_ms is not None:
        def runner() -> None:
            time.sleep(args.sleep_ms / 1000.0)
        label = f"sleep-{args.sleep_ms}ms"
    else:
        cfg = _match_cfg(args)
        rng = np.random.default_rng(args.seed)
        from scipy import ndimage

        base = ndimage.gaussian_filter(
            rng.random((args.height, args.width + 32), dtype=np.float32), 1.5
        )
        left = base[:, :args.width]
        right = base[:, 8 : 8 + args.width]

        def runner() -> None:
            match(left, right, cfg)
        label = f"builtin-matcher-{args.width}x{args.height}"
    try:
        report = pipeline.profile(
            runner, frames=args.frames, warmup=args.warmup,
            resolution=(args.height, args.width), label=label,
        )
    except pipeline.RunnerFailed as exc:
        print(f"profiling aborted: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.out:
        report.to_json(args.out)
    print(
        f"{label}: mean {report.mean_ms:.1f} ms, p95 {report.p95_ms:.1f} ms, "
        f"{report.fps:.2f} FPS over {report.measured_frames} frames"
    )
    if args.speed_mps is not None:
        cm = pipeline.travel_per_update(args.speed_mps, report.mean_ms)
        print(f"travel per update at {args.speed_mps} m/s: {cm:.1f} cm")
    return EXIT_OK


def cmd_cost(args) -> int:
    crop = args.crop
    if args.preset and not args.all_presets:
        names = [args.preset]
    else:
        names = list(costmodel.PRESETS)
    rows = [r for r in costmodel.cost_table(crop) if r["variant"] in names]
    out = Path(args.out) if args.out else None
    if out:
        if out.suffix == ".json":
            out.write_text(json.dumps(rows, indent=2))
        else:
            with open(out, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=costmodel.COST_COLUMNS)
                writer.writeheader()
                writer.writerows(rows)
    header = f"{'variant':<12} {'tokens':>6} {'planes':>10} {'gru MACs/px':>11} {'decoder':>8}"
    print(header)
    for row in rows:
        planes = f"{row['corr_planes_standard']}"
        if row["corr_planes_scale"]:
            planes += f"/{row['corr_planes_scale']}"
        print(
            f"{row['variant']:<12} {row['attention_tokens']:>6} {planes:>10} "
            f"{row['gru_macs_per_pixel_per_iter']:>11} "
            f"{row['decoder_relative_depth']:>8.3f}"
        )
    return EXIT_OK


def cmd_distance(args) -> int:
    rig = _rig(args)
    disp = disparity_io.read_disparity_file(args.disp, args.format)
    x, y, w, h = (int(v) for v in args.roi.split(","))
    est = pipeline.estimate_branch_distance(disp, rig, (x, y, w, h))
    if est is None:
        decision = pipeline.approach_decision(None)
        print(json.dumps({"measurement": None, "decision": decision.value}))
        return EXIT_OK
    decision = pipeline.approach_decision(est.distance_m, est.spread_m)
    print(
        json.dumps(
            {
                "distance_m": round(est.distance_m, 4),
                "spread_m": round(est.spread_m, 4),
                "n_valid": est.n_valid,
                "decision": decision.value,
            }
        )
    )
    return EXIT_OK


REPORT_COLUMNS = (
    "model", "source", "epe_px", "d1_all_pct", "delta1_pct", "depth_mae_cm",
    "latency_ms", "fps", "travel_per_update_cm", "usability",
)


def _report_rows(args) -> list[dict]:
    rows: list[dict] = []
    for metrics_path in args.metrics or []:
        payload = json.loads(Path(metrics_path).read_text())
        summary = payload["summary"]
        rows.append(
            {
                "model": payload["model"],
                "source": "measured",
                "epe_px": summary["epe_px"],
                "d1_all_pct": summary["d1_all_pct"],
                "delta1_pct": summary["delta1_pct"],
                "depth_mae_cm": summary["depth_mae_cm"],
                "latency_ms": None,
                "fps": None,
            }
        )
    if args.reported:
        for ref in REPORTED_RESULTS.values():
            rows.append(
                {
                    "model": ref.display_name,
                    "source": "reported",
                    "epe_px": ref.epe_px,
                    "d1_all_pct": ref.d1_all_pct,
                    "delta1_pct": ref.delta1_pct,
                    "depth_mae_cm": ref.depth_mae_cm,
                    "latency_ms": ref.tensorrt_ms,
                    "fps": ref.fps,
                }
            )
    latency_by_label = {}
    for latency_path in args.latency or []:
        payload = json.loads(Path(latency_path).read_text())
        latency_by_label[payload["label"]] = payload
    for row in rows:
        lat = latency_by_label.get(row["model"])
        if lat:
            row["latency_ms"] = lat["mean_ms"]
            row["fps"] = lat["fps"]
        if row["fps"] is not None:
            row["travel_per_update_cm"] = pipeline.travel_per_update(
                args.speed_mps, 1000.0 / row["fps"]
            )
            row["usability"] = pipeline.classify_deployability(
                row["fps"], row["depth_mae_cm"], row["delta1_pct"]
            ).symbol
        else:
            row["travel_per_update_cm"] = None
            row["usability"] = ""
    return rows


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = _report_rows(args)

    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {csv_path}")

    if args.markdown:
        md_path = out_dir / "report.md"
        lines = ["| " + " | ".join(REPORT_COLUMNS) + " |",
                 "|" + "---|" * len(REPORT_COLUMNS)]
        for row in rows:
            cells = []
            for col in REPORT_COLUMNS:
                value = row.get(col)
                if isinstance(value, float):
                    cells.append(f"{value:.2f}")
                else:
                    cells.append("" if value is None else str(value))
            lines.append("| " + " | ".join(cells) + " |")
        md_path.write_text("\n".join(lines) + "\n")
        print(f"wrote {md_path}")

    if args.grid:
        tiles = []
        row_tiles: list[np.ndarray] = []
        for item in args.grid:
            disp = disparity_io.read_disparity_file(item)
            row_tiles.append(disparity_io.render_colormap(disp))
            if len(row_tiles) == args.grid_cols:
                tiles.append(row_tiles)
                row_tiles = []
        if row_tiles:
            tiles.append(row_tiles)
        grid = disparity_io.assemble_grid(tiles)
        grid_path = out_dir / "comparison_grid.png"
        cv2.imwrite(str(grid_path), grid[:, :, ::-1])
        print(f"wrote {grid_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchstereo",
        description="Stereo evaluation and deployment analysis for UAV branch pruning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="index a stereo corpus directory")
    p.add_argument("--root", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("split", help="write a deterministic train/val/test manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--split", type=_parse_split, default=(0.8, 0.1, 0.1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--group-by-tree", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    def add_matcher_args(p):
        p.add_argument("--levels", type=int, default=2)
        p.add_argument("--window-radius", type=int, default=4)
        p.add_argument("--search-radius", type=int, default=4)
        p.add_argument("--lr-tol", type=float, default=1.0)
        p.add_argument("--no-subpixel", action="store_true")

    p = sub.add_parser("match", help="run the classical matcher over a corpus or one pair")
    p.add_argument("--root")
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--manifest")
    p.add_argument("--subset", default="test")
    p.add_argument("--limit", type=int)
    p.add_argument("--format", choices=disparity_io.FORMATS, default="pfm")
    p.add_argument("--out", required=True)
    p.add_argument("--max-disparity", type=float, default=128)
    add_matcher_args(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="score predictions against EXR ground truth")
    p.add_argument("--root", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--manifest")
    p.add_argument("--subset", default="test")
    p.add_argument("--format", choices=disparity_io.FORMATS, default="pfm")
    p.add_argument("--model", default="prediction")
    p.add_argument("--out", required=True, help="output path prefix (.csv/.json added)")
    _add_rig_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("profile", help="latency-profile a per-frame workload")
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--width", type=int, default=1280)
    p.add_argument("--height", type=int, default=720)
    p.add_argument("--sleep-ms", type=float, help="profile a synthetic fixed-cost frame")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speed-mps", type=float)
    p.add_argument("--max-disparity", type=float, default=128)
    add_matcher_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("cost", help="analytic per-variant compute breakdown")
    p.add_argument("--preset", choices=sorted(costmodel.PRESETS))
    p.add_argument("--all-presets", action="store_true")
    p.add_argument("--crop", type=_parse_crop, default=costmodel.DEFAULT_CROP)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("distance", help="branch distance + approach decision from a disparity file")
    p.add_argument("--disp", required=True)
    p.add_argument("--format", choices=disparity_io.FORMATS)
    p.add_argument("--roi", required=True, help="x,y,w,h")
    _add_rig_args(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("report", help="merge metric and latency reports into one table")
    p.add_argument("--metrics", nargs="*", help="eval JSON outputs")
    p.add_argument("--latency", nargs="*", help="profile JSON outputs")
    p.add_argument("--reported", action="store_true",
                   help="include the published reference rows")
    p.add_argument("--speed-mps", type=float, default=0.3)
    p.add_argument("--markdown", action="store_true")
    p.add_argument("--grid", nargs="*", help="disparity files to render into a colormap grid")
    p.add_argument("--grid-cols", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
