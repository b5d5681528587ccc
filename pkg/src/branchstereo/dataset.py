"""Corpus scanning, EXR depth loading, and deterministic train/val/test splits.

The expected corpus is a directory tree of stereo PNG pairs plus a float EXR
depth image per sample, named like::

    left_001_horizontal_01.png
    right_001_horizontal_01.png
    depth_001_horizontal_01.exr

Files may live flat or grouped into per-tree subdirectories; scanning is
recursive either way.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import exr
from .geometry import CameraRig, DepthMap, DisparityMap, depth_to_disparity


class View(Enum):
    UPWARD = "upward"
    DOWNWARD = "downward"
    PARALLEL = "parallel"


# filename tokens -> capture viewpoint
DEFAULT_VIEW_TOKENS = {"up45": View.UPWARD, "down45": View.DOWNWARD, "horizontal": View.PARALLEL}

_VIEW_ORDER = {View.UPWARD: 0, View.DOWNWARD: 1, View.PARALLEL: 2}


@dataclass(frozen=True)
class FilenameGrammar:
    """Configurable naming scheme for left/right/depth files."""

    left_prefix: str = "left"
    right_prefix: str = "right"
    depth_prefix: str = "depth"
    view_tokens: dict[str, View] = field(default_factory=lambda: dict(DEFAULT_VIEW_TOKENS))

    def left_pattern(self) -> re.Pattern:
        tokens = "|".join(re.escape(t) for t in self.view_tokens)
        return re.compile(
            rf"^{re.escape(self.left_prefix)}_(\d{{3}})_({tokens})_(\d{{2}})\.png$"
        )

    def sibling(self, left: Path, prefix: str, suffix: str) -> Path:
        stem = left.name[len(self.left_prefix):]
        return left.with_name(prefix + stem).with_suffix(suffix)


@dataclass(frozen=True)
class SampleRecord:
    tree_id: int
    view: View
    frame_idx: int
    left_path: Path
    right_path: Path
    depth_path: Path

    @property
    def record_id(self) -> str:
        return f"{self.tree_id:03d}_{self.view.value}_{self.frame_idx:02d}"


class CorpusError(RuntimeError):
    """Unusable corpus directory (missing, unreadable, or empty)."""


@dataclass(frozen=True)
class CorpusIndex:
    root: Path
    records: tuple[SampleRecord, ...]
    malformed: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def per_tree_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for rec in self.records:
            counts[rec.tree_id] = counts.get(rec.tree_id, 0) + 1
        return counts

    def per_view_counts(self) -> dict[View, int]:
        counts: dict[View, int] = {}
        for rec in self.records:
            counts[rec.view] = counts.get(rec.view, 0) + 1
        return counts


def scan_corpus(root: str | Path, grammar: FilenameGrammar | None = None) -> CorpusIndex:
    """Index every well-formed stereo sample under root.

    Records come back in deterministic (tree, view, frame) order. Files that
    look like left images but fail the naming grammar, or that are missing a
    right/depth sibling, are reported in ``malformed`` rather than silently
    dropped.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a readable directory")
    grammar = grammar or FilenameGrammar()
    pattern = grammar.left_pattern()

    records: list[SampleRecord] = []
    malformed: list[str] = []
    for left in root.rglob(f"{grammar.left_prefix}_*"):
        if not left.is_file():
            continue
        m = pattern.match(left.name)
        if m is None:
            malformed.append(f"{left}: does not match naming grammar")
            continue
        tree_id = int(m.group(1))
        view = grammar.view_tokens[m.group(2)]
        frame_idx = int(m.group(3))
        right = grammar.sibling(left, grammar.right_prefix, ".png")
        depth = grammar.sibling(left, grammar.depth_prefix, ".exr")
        missing = [p.name for p in (right, depth) if not p.is_file()]
        if missing:
            malformed.append(f"{left}: missing sibling file(s) {missing}")
            continue
        records.append(SampleRecord(tree_id, view, frame_idx, left, right, depth))

    if not records:
        raise CorpusError(f"no stereo samples found under {root}")
    records.sort(key=lambda r: (r.tree_id, _VIEW_ORDER[r.view], r.frame_idx))
    return CorpusIndex(root=root, records=tuple(records), malformed=tuple(malformed))


@dataclass(frozen=True)
class SplitSet:
    train: tuple[SampleRecord, ...]
    val: tuple[SampleRecord, ...]
    test: tuple[SampleRecord, ...]
    seed: int
    ratios: tuple[float, float, float]

    def to_manifest(self, path: str | Path) -> None:
        payload = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "splits": {
                name: [str(rec.left_path) for rec in split]
                for name, split in (("train", self.train), ("val", self.val), ("test", self.test))
            },
        }
        Path(path).write_text(json.dumps(payload, indent=2))


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Floor-based val/test sizes; the remainder goes to train."""
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    return n - n_val - n_test, n_val, n_test


def make_splits(
    index: CorpusIndex,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    group_by_tree: bool = False,
) -> SplitSet:
    """Deterministic shuffled split of the corpus into train/val/test.

    The split unit is the stereo pair by default; ``group_by_tree`` keeps all
    samples of a tree in the same split instead (sizes then only approximate
    the requested ratios).
    """
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")

    rng = random.Random(seed)
    if group_by_tree:
        trees = sorted({rec.tree_id for rec in index.records})
        rng.shuffle(trees)
        _, n_val, n_test = split_sizes(len(trees), ratios)
        val_trees = set(trees[:n_val])
        test_trees = set(trees[n_val : n_val + n_test])
        train = tuple(r for r in index.records if r.tree_id not in val_trees | test_trees)
        val = tuple(r for r in index.records if r.tree_id in val_trees)
        test = tuple(r for r in index.records if r.tree_id in test_trees)
    else:
        shuffled = list(index.records)
        rng.shuffle(shuffled)
        _, n_val, n_test = split_sizes(len(shuffled), ratios)
        val = tuple(shuffled[:n_val])
        test = tuple(shuffled[n_val : n_val + n_test])
        train = tuple(shuffled[n_val + n_test :])
    return SplitSet(train=train, val=val, test=test, seed=seed, ratios=tuple(ratios))


# EXR depth channel preference; engine exporters disagree on naming.
DEPTH_CHANNEL_ORDER = ("R", "Y", "Z")


def read_exr_depth(path: str | Path, channel_order: tuple[str, ...] = DEPTH_CHANNEL_ORDER) -> DepthMap:
    """Load metric depth from a float EXR; non-finite/non-positive pixels invalid."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"depth file {path} does not exist")
    channels = exr.read_exr(path)
    name = next((c for c in channel_order if c in channels), None)
    if name is None:
        if not channels:
            raise exr.ExrError(f"{path}: no channels present")
        name = sorted(channels)[0]
    values = channels[name]
    valid = np.isfinite(values) & (values > 0)
    values = np.where(valid, values, 0.0).astype(np.float32)
    return DepthMap(values=values, valid=valid)


def write_exr_depth(path: str | Path, depth: DepthMap, channel: str = "R") -> None:
    """Write a DepthMap as a one-channel EXR; invalid pixels become NaN."""
    values = np.where(depth.valid, depth.values, np.nan).astype(np.float32)
    exr.write_exr(path, {channel: values})


def gt_disparity(record: SampleRecord, rig: CameraRig) -> DisparityMap:
    """Ground-truth disparity: EXR depth converted through the rig geometry."""
    return depth_to_disparity(read_exr_depth(record.depth_path), rig)
