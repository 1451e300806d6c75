"""Dice metrics, error regions, and curve aggregation.

Two volumetric conventions are supported side by side: one that scores
all voxels, and one that first drops slices whose ground truth is
empty. The second is never below the first (dropping such slices only
removes predicted-positive voxels from the denominator while the
intersection is unchanged).
"""

import math
from typing import List, NamedTuple, Tuple

import numpy as np

WITH_REMOVAL = "with"
WITHOUT_REMOVAL = "without"
CURVE_PASSES = 8
# 95% interval under the normal approximation.
CI_FACTOR = 1.96


class ShapeMismatch(Exception):
    pass


class EmptyGroundTruth(Exception):
    pass


class EmptySeries(Exception):
    pass


class NoCases(Exception):
    pass


class SliceScore(NamedTuple):
    slice: int
    dice: float
    error_pixels: int


class DicePair(NamedTuple):
    with_removal: float
    without_removal: float


class CurvePoint(NamedTuple):
    annotated_slices: int
    mean: float
    ci_low: float
    ci_high: float
    n: int


def _check_shapes(pred, gt):
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")


def dice2d(pred: np.ndarray, gt: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|); 1.0 when both masks are empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    _check_shapes(pred, gt)
    total = int(np.count_nonzero(pred)) + int(np.count_nonzero(gt))
    if total == 0:
        return 1.0
    overlap = int(np.count_nonzero(pred & gt))
    return 2.0 * overlap / total


def dice3d(pred: np.ndarray, gt: np.ndarray, remove_background_slices: bool) -> float:
    """Volumetric Dice, optionally excluding empty-ground-truth slices.

    With removal on, slices whose gt plane is empty are excluded from
    all three counts before the formula is applied.
    """
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    _check_shapes(pred, gt)
    if not gt.any():
        raise EmptyGroundTruth("ground truth has no foreground")
    if remove_background_slices:
        keep = gt.any(axis=(0, 1))
        pred = pred[:, :, keep]
        gt = gt[:, :, keep]
    overlap = int(np.count_nonzero(pred & gt))
    total = int(np.count_nonzero(pred)) + int(np.count_nonzero(gt))
    return 2.0 * overlap / total


def dice_pair(pred: np.ndarray, gt: np.ndarray) -> DicePair:
    return DicePair(
        with_removal=dice3d(pred, gt, remove_background_slices=True),
        without_removal=dice3d(pred, gt, remove_background_slices=False),
    )


def error_regions(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(false positives, false negatives); always disjoint."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    _check_shapes(pred, gt)
    return pred & ~gt, gt & ~pred


def score_slices(pred: np.ndarray, gt: np.ndarray) -> List[SliceScore]:
    """Per-slice Dice and error pixel counts over a 3D prediction."""
    _check_shapes(pred, gt)
    scores = []
    for k in range(pred.shape[2]):
        p = pred[:, :, k]
        g = gt[:, :, k]
        fp, fn = error_regions(p, g)
        errs = int(np.count_nonzero(fp)) + int(np.count_nonzero(fn))
        scores.append(SliceScore(slice=k, dice=dice2d(p, g), error_pixels=errs))
    return scores


def best_dice(series: List[DicePair]) -> DicePair:
    """Component-wise maximum over passes."""
    if not series:
        raise EmptySeries("no passes to take the best of")
    return DicePair(
        with_removal=max(p.with_removal for p in series),
        without_removal=max(p.without_removal for p in series),
    )


def extend_series(values: List[float], passes: int = CURVE_PASSES) -> List[float]:
    """Carry the final value forward so every series has `passes` slots."""
    if not values:
        raise EmptySeries("cannot extend an empty series")
    out = list(values[:passes])
    out += [out[-1]] * (passes - len(out))
    return out


def aggregate_curve(per_case, convention: str, passes: int = CURVE_PASSES) -> List[CurvePoint]:
    """Mean and 95% CI per pass over cases.

    per_case holds one DicePair series per case; series shorter than
    `passes` are extended by carrying the final value forward, so
    early-stopped cases hold their last score. With a single case the
    interval collapses to the mean.
    """
    if not per_case:
        raise NoCases("no case series to aggregate")
    if convention not in (WITH_REMOVAL, WITHOUT_REMOVAL):
        raise ValueError(f"convention must be '{WITH_REMOVAL}' or '{WITHOUT_REMOVAL}'")
    idx = 0 if convention == WITH_REMOVAL else 1
    rows = [extend_series([pair[idx] for pair in series], passes) for series in per_case]
    table = np.array(rows, dtype=float)
    n = table.shape[0]
    points = []
    for k in range(passes):
        col = table[:, k]
        mean = float(col.mean())
        if n == 1:
            low = high = mean
        else:
            half = CI_FACTOR * float(col.std(ddof=1)) / math.sqrt(n)
            low, high = mean - half, mean + half
        points.append(CurvePoint(annotated_slices=k + 1, mean=mean,
                                 ci_low=low, ci_high=high, n=n))
    return points
