"""Segmentation metrics and leakage-safe dataset splitting.

Dice is scored per frame on the union of predicted and true masks and
averaged over frames. Precision/recall use greedy one-to-one matching by
descending IOU. Splitting keeps blocks of adjacent frames together so
near-duplicate frames cannot straddle train and test.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .masks import BinaryMask, dice, iou, union_all

SPLIT_NAMES = ("train", "val", "test")


class EvalError(ValueError):
    """Inconsistent inputs to a metric or split."""


@dataclass(frozen=True)
class SplitConfig:
    block_size: int = 45
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if self.block_size < 1:
            raise EvalError("block_size must be >= 1")
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise EvalError("ratios must be three nonnegative numbers")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise EvalError(f"ratios must sum to 1, got {sum(self.ratios)}")


class SplitRow(NamedTuple):
    video: str
    frame: int
    block: int
    split: str


def greedy_match(
    preds: Sequence[BinaryMask],
    gts: Sequence[BinaryMask],
    threshold: float,
) -> list[tuple[int, int, float]]:
    """One-to-one (pred, gt, iou) matches with IOU >= threshold.

    Pairs are taken in descending IOU order; ties resolve by lowest pred
    then gt index, so the matching is deterministic.
    """
    pairs = []
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            v = iou(p, g)
            if v >= threshold:
                pairs.append((-v, i, j))
    pairs.sort()
    used_p: set[int] = set()
    used_g: set[int] = set()
    matches = []
    for neg_v, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, -neg_v))
    return matches


def video_dice(
    preds: Sequence[Sequence[BinaryMask]],
    gts: Sequence[Sequence[BinaryMask]],
    only_positive_frames: bool = False,
) -> float:
    """Mean per-frame Dice between unioned predictions and unioned truth."""
    if len(preds) != len(gts):
        raise EvalError(
            f"frame count mismatch: {len(preds)} predicted vs {len(gts)} truth"
        )
    scores = []
    for frame_preds, frame_gts in zip(preds, gts):
        all_masks = list(frame_preds) + list(frame_gts)
        if not all_masks:
            if not only_positive_frames:
                scores.append(1.0)
            continue
        w, h = all_masks[0].width, all_masks[0].height
        gt_union = union_all(list(frame_gts), w, h)
        if only_positive_frames and gt_union.is_empty:
            continue
        pred_union = union_all(list(frame_preds), w, h)
        scores.append(dice(pred_union, gt_union))
    if not scores:
        return 1.0
    return sum(scores) / len(scores)


def precision_recall_at_iou(
    preds: Sequence[Sequence[BinaryMask]],
    gts: Sequence[Sequence[BinaryMask]],
    threshold: float,
) -> tuple[float, float]:
    """Aggregate precision and recall over frames at one IOU threshold.

    With zero predictions precision is 1.0; with zero ground truth recall
    is 1.0 (nothing to find, nothing missed).
    """
    if not 0.0 < threshold < 1.0:
        raise EvalError("threshold must lie in (0, 1)")
    if len(preds) != len(gts):
        raise EvalError(
            f"frame count mismatch: {len(preds)} predicted vs {len(gts)} truth"
        )
    tp = 0
    n_pred = 0
    n_gt = 0
    for frame_preds, frame_gts in zip(preds, gts):
        n_pred += len(frame_preds)
        n_gt += len(frame_gts)
        tp += len(greedy_match(frame_preds, frame_gts, threshold))
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_gt if n_gt else 1.0
    return precision, recall


def time_block_split(
    frames: Iterable[tuple[str, int]], cfg: SplitConfig
) -> list[SplitRow]:
    """Assign frames to train/val/test at whole-block granularity.

    Frames are grouped per video in order, chunked into blocks of
    ``cfg.block_size`` (final partial block kept whole), shuffled by seed,
    and assigned so cumulative frame counts reach each ratio target;
    every assignment is therefore within one block of the exact ratio.
    """
    per_video: dict[str, list[int]] = {}
    for video, frame in frames:
        per_video.setdefault(str(video), []).append(int(frame))

    blocks: list[tuple[str, int, list[int]]] = []
    for video in sorted(per_video):
        ordered = sorted(per_video[video])
        for k in range(0, len(ordered), cfg.block_size):
            blocks.append((video, len(blocks), ordered[k : k + cfg.block_size]))

    order = list(range(len(blocks)))
    random.Random(cfg.seed).shuffle(order)

    total = sum(len(b[2]) for b in blocks)
    train_target = cfg.ratios[0] * total
    val_target = (cfg.ratios[0] + cfg.ratios[1]) * total

    rows: list[SplitRow] = []
    assigned = 0
    for pos in order:
        video, block_id, members = blocks[pos]
        mid = assigned + len(members) / 2.0
        if mid <= train_target:
            split = "train"
        elif mid <= val_target:
            split = "val"
        else:
            split = "test"
        for frame in members:
            rows.append(SplitRow(video, frame, block_id, split))
        assigned += len(members)
    rows.sort(key=lambda r: (r.video, r.frame))
    return rows
