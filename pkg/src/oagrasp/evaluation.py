"""Rectangle-metric scoring, prediction selection and threshold sweeps."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from ._backend import kernels
from .anchors import AnchorGridConfig, anchor_array, decode_array
from .geometry import OrientedRect, angle_diff, jaccard, rects_to_array
from .loss import PredictionMap, graspable_probability

DEFAULT_JACCARD = (0.20, 0.25, 0.30, 0.35)
DEFAULT_ANGLES = (30.0, 25.0, 20.0, 15.0, 10.0)
REPORT_SCHEMA = "oagrasp.evalreport/1.0"


@dataclass(frozen=True)
class GraspPrediction:
    rect: OrientedRect
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")

    def to_dict(self) -> dict:
        d = self.rect.to_dict()
        d["score"] = self.score
        return d


def is_correct(pred: OrientedRect, gts: Sequence[OrientedRect], j_thresh: float = 0.25,
               a_thresh: float = 30.0) -> bool:
    """True when some ground truth is within ``a_thresh`` degrees and overlaps more than ``j_thresh``."""
    if not gts:
        raise ValueError("at least one ground-truth rectangle is required")
    for gt in gts:
        if angle_diff(pred.theta, gt.theta) <= a_thresh and jaccard(pred, gt) > j_thresh:
            return True
    return False


def select_predictions(preds: PredictionMap, grid: AnchorGridConfig, mode: str = "top1",
                       score_thresh: float = 0.5) -> list[GraspPrediction]:
    """Decode every slot and keep the best one (``top1``) or all above threshold (``multi``)."""
    preds.check(grid)
    p_g = graspable_probability(preds)
    # stable sort on -p keeps the lower slot first among ties
    order = np.argsort(-p_g, kind="stable")
    if mode == "top1":
        keep = order[:1]
    elif mode == "multi":
        keep = order[p_g[order] > score_thresh]
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    if len(keep) == 0:
        return []
    rects = decode_array(preds.flat_offsets()[keep], anchor_array(grid)[keep], grid.k)
    return [GraspPrediction(OrientedRect(*map(float, r)), float(min(1.0, max(0.0, p))))
            for r, p in zip(rects, p_g[keep])]


def oriented_nms(grasps: Sequence[GraspPrediction], iou_thresh: float) -> list[GraspPrediction]:
    """Greedy suppression by descending score; survivors overlap by at most ``iou_thresh``."""
    if not grasps:
        return []
    scores = np.array([g.score for g in grasps])
    order = np.argsort(-scores, kind="stable")
    kept = kernels.nms(rects_to_array([g.rect for g in grasps]), order, float(iou_thresh))
    return [grasps[int(i)] for i in kept]


@dataclass
class EvalReport:
    jaccard_thresholds: list
    angle_thresholds: list
    correct: dict  # (j, a) -> count
    total: int
    split: str = "unspecified"

    def accuracy(self, j: float, a: float) -> float:
        return self.correct[(j, a)] / self.total

    def to_dict(self) -> dict:
        cells = [
            {"jaccard": j, "angle": a, "correct": self.correct[(j, a)], "total": self.total,
             "accuracy": round(self.accuracy(j, a), 6)}
            for a in self.angle_thresholds for j in self.jaccard_thresholds
        ]
        return {"schema": REPORT_SCHEMA, "split": self.split,
                "jaccard_thresholds": list(self.jaccard_thresholds),
                "angle_thresholds": list(self.angle_thresholds),
                "total": self.total, "cells": cells}

    def to_csv(self) -> str:
        """Angle thresholds down the rows, Jaccard thresholds across, accuracy in percent."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["angle_threshold"] + [f"jaccard_{int(round(j * 100))}%" for j in self.jaccard_thresholds])
        for a in self.angle_thresholds:
            w.writerow([f"{a:g}"] + [f"{100.0 * self.accuracy(j, a):.2f}" for j in self.jaccard_thresholds])
        return buf.getvalue()


PredLike = Union[OrientedRect, GraspPrediction, Sequence[GraspPrediction]]


def _top1(pred: PredLike):
    if isinstance(pred, OrientedRect):
        return pred
    if isinstance(pred, GraspPrediction):
        return pred.rect
    if not pred:
        return None
    best = max(range(len(pred)), key=lambda i: (pred[i].score, -i))
    return pred[best].rect


def evaluate(dataset: Iterable, j_list: Sequence[float] = DEFAULT_JACCARD,
             a_list: Sequence[float] = DEFAULT_ANGLES, split: str = "unspecified") -> EvalReport:
    """Top-1 accuracy for every (Jaccard, angle) threshold pair.

    ``dataset`` yields ``(prediction, gts)`` pairs, where the prediction is a
    rectangle, a scored grasp, or a list of scored grasps (its best is used).
    An image with no prediction counts as incorrect.
    """
    items = list(dataset)
    if not items:
        raise ValueError("cannot evaluate an empty dataset")
    j_list, a_list = [float(j) for j in j_list], [float(a) for a in a_list]
    correct = {(j, a): 0 for j in j_list for a in a_list}
    for pred, gts in items:
        rect = _top1(pred)
        if rect is None:
            continue
        if not gts:
            raise ValueError("every evaluated image needs ground truth")
        jac = [jaccard(rect, g) for g in gts]
        ang = [angle_diff(rect.theta, g.theta) for g in gts]
        for j in j_list:
            for a in a_list:
                if any(jj > j and aa <= a for jj, aa in zip(jac, ang)):
                    correct[(j, a)] += 1
    return EvalReport(j_list, a_list, correct, len(items), split)
