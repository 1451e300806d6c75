"""The interactive annotation simulation.

One simulated run annotates at most 8 distinct slices. The first pass
places up to 5 clicks on the seed slice to form a good initial
segmentation; every later pass picks the worst remaining slice and
places up to 3 corrective clicks against the current propagated
prediction. Prompts accumulate in the backend session across passes,
and the backend re-propagates after each annotated slice.

All randomness flows through one per-case generator seeded from the
configured seed and the case id, so identical inputs give bit-identical
results.
"""

import dataclasses
import hashlib
from typing import List, NamedTuple, Optional, Set

import numpy as np

from . import mask_ops, metrics
from .backend_api import BackendError
from .mask_ops import PixelPoint
from .metrics import DicePair, SliceScore

POSITIVE = "positive"
NEGATIVE = "negative"

STOP_COMPLETED = "completed_all_passes"
STOP_NO_ERROR = "no_correctable_error"
STOP_EMPTY_ERROR = "empty_initial_error"


@dataclasses.dataclass(frozen=True)
class ProtocolConfig:
    max_annotated_slices: int = 8
    initial_clicks: int = 5
    correction_clicks: int = 3
    connectivity: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_annotated_slices < 1:
            raise ValueError("max_annotated_slices must be >= 1")
        if self.initial_clicks < 1:
            raise ValueError("initial_clicks must be >= 1")
        if self.correction_clicks < 0:
            raise ValueError("correction_clicks must be >= 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


class ClickPoint(NamedTuple):
    slice: int
    point: PixelPoint
    polarity: str


@dataclasses.dataclass(frozen=True)
class PassRecord:
    pass_index: int
    annotated_slice: int
    clicks: List[ClickPoint]
    dice: DicePair
    slice_scores: List[SliceScore]


@dataclasses.dataclass(frozen=True)
class SimulationResult:
    case_id: str
    target_label: int
    passes: List[PassRecord]
    best: DicePair
    stop_reason: str


def case_rng(rng_seed: int, case_id: str) -> np.random.Generator:
    """Per-case generator; the digest ties it to both seed and case."""
    digest = hashlib.sha256(f"{rng_seed}:{case_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def _eroded_errors(pred, gt):
    fp, fn = metrics.error_regions(pred, gt)
    return mask_ops.erode3x3(fp), mask_ops.erode3x3(fn)


def initial_annotation(session, slice_index, gt_slice, seed_point, cfg):
    """Click the seed slice until it is good or the budget runs out.

    Click 1 is positive at the seed point. Each following click goes
    against the backend's current prediction for the slice: the error
    regions are eroded by the 3x3 kernel, and if nothing survives the
    iteration stops; otherwise the larger eroded side gets a click at
    the interior center of its largest component (negative for false
    positives, positive for false negatives).
    """
    first = ClickPoint(slice=slice_index, point=seed_point, polarity=POSITIVE)
    clicks = [first]
    refined = session.add_points(slice_index, [first])
    while len(clicks) < cfg.initial_clicks:
        eroded_fp, eroded_fn = _eroded_errors(refined, gt_slice)
        n_fp = int(np.count_nonzero(eroded_fp))
        n_fn = int(np.count_nonzero(eroded_fn))
        if n_fp == 0 and n_fn == 0:
            break
        if n_fp > n_fn:
            region, polarity = eroded_fp, NEGATIVE
        else:
            region, polarity = eroded_fn, POSITIVE
        center = mask_ops.interior_center(
            mask_ops.largest_component(region, cfg.connectivity))
        click = ClickPoint(slice=slice_index, point=center, polarity=polarity)
        clicks.append(click)
        refined = session.add_points(slice_index, [click])
    return clicks, refined


def select_worst_slice(slice_scores, already_annotated: Set[int]) -> Optional[int]:
    """Lowest Dice wins; ties go to the most error pixels, then the
    lowest index. Returns None when every remaining slice is perfect.
    """
    candidates = [s for s in slice_scores if s.slice not in already_annotated]
    candidates = [s for s in candidates if s.dice < 1.0]
    if not candidates:
        return None
    best = min(candidates, key=lambda s: (s.dice, -s.error_pixels, s.slice))
    return best.slice


def correction_clicks(slice_index, pred_slice, gt_slice, cfg, rng) -> List[ClickPoint]:
    """Up to 3 corrective clicks for one slice.

    Both error regions are eroded by the 3x3 kernel first. Click A is
    positive at the false-negative interior center, click B negative at
    the false-positive interior center (each only if its eroded region
    is non-empty). Click C is drawn uniformly from the larger eroded
    region (polarity matching it, ties toward false negatives) and is
    dropped rather than redrawn if it repeats a pixel already chosen in
    this call. An empty result signals the caller to stop.
    """
    eroded_fp, eroded_fn = _eroded_errors(pred_slice, gt_slice)
    n_fp = int(np.count_nonzero(eroded_fp))
    n_fn = int(np.count_nonzero(eroded_fn))
    clicks = []
    if n_fn > 0:
        center = mask_ops.interior_center(
            mask_ops.largest_component(eroded_fn, cfg.connectivity))
        clicks.append(ClickPoint(slice_index, center, POSITIVE))
    if n_fp > 0:
        center = mask_ops.interior_center(
            mask_ops.largest_component(eroded_fp, cfg.connectivity))
        clicks.append(ClickPoint(slice_index, center, NEGATIVE))
    if n_fp > 0 or n_fn > 0:
        if n_fp > n_fn:
            region, polarity = eroded_fp, NEGATIVE
        else:
            region, polarity = eroded_fn, POSITIVE
        pixels = np.argwhere(region)
        row, col = pixels[int(rng.integers(len(pixels)))]
        point = PixelPoint(int(row), int(col))
        if all(c.point != point for c in clicks):
            clicks.append(ClickPoint(slice_index, point, polarity))
    return clicks[: cfg.correction_clicks]


def run_simulation(image, gt, backend_factory, cfg, case_id,
                   target_label=0) -> SimulationResult:
    """Drive the full multi-pass protocol for one case.

    `backend_factory` must return an open backend session bound to this
    case's volume. The session is closed before returning, whatever
    happens.
    """
    gt = np.asarray(gt, dtype=bool)
    if not gt.any():
        raise metrics.EmptyGroundTruth(f"{case_id}: ground truth is empty")
    if image is not None and tuple(image.shape) != gt.shape:
        raise metrics.ShapeMismatch(
            f"{case_id}: image {tuple(image.shape)} vs gt {gt.shape}")

    rng = case_rng(cfg.rng_seed, case_id)
    session = backend_factory()
    try:
        seed_slice, seed_point = mask_ops.foreground_seed(gt)
        clicks, _ = initial_annotation(
            session, seed_slice, gt[:, :, seed_slice], seed_point, cfg)
        prediction = session.propagate()
        scores = metrics.score_slices(prediction, gt)
        passes = [PassRecord(
            pass_index=1,
            annotated_slice=seed_slice,
            clicks=clicks,
            dice=metrics.dice_pair(prediction, gt),
            slice_scores=scores,
        )]
        annotated = {seed_slice}
        stop_reason = STOP_COMPLETED

        for pass_index in range(2, cfg.max_annotated_slices + 1):
            worst = select_worst_slice(scores, annotated)
            if worst is None:
                stop_reason = STOP_NO_ERROR
                break
            clicks = correction_clicks(
                worst, prediction[:, :, worst], gt[:, :, worst], cfg, rng)
            if not clicks:
                stop_reason = STOP_EMPTY_ERROR
                break
            session.add_points(worst, clicks)
            prediction = session.propagate()
            scores = metrics.score_slices(prediction, gt)
            passes.append(PassRecord(
                pass_index=pass_index,
                annotated_slice=worst,
                clicks=clicks,
                dice=metrics.dice_pair(prediction, gt),
                slice_scores=scores,
            ))
            annotated.add(worst)
    finally:
        try:
            session.close()
        except BackendError:
            pass

    return SimulationResult(
        case_id=case_id,
        target_label=target_label,
        passes=passes,
        best=metrics.best_dice([p.dice for p in passes]),
        stop_reason=stop_reason,
    )
